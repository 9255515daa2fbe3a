import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tinyquant.numrep import (
    FixedFormat,
    FloatFormat,
    NaRError,
    PositFormat,
    RepParams,
    TruncFloatFormat,
    ZeroSkewFormat,
    fixed_scale_for,
    format_from_json,
    quantize,
    zeroskew_params,
)
from tinyquant.numrep.posit import posit_decode, posit_encode

from .oracles import fixed_floor, posit_nearest, posit_value

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


# ---------------------------------------------------------------- posit


def test_posit_decode_golden():
    assert PositFormat(8, 2).decode(0b01101101) == 160.0


def test_posit_special_codes():
    f = PositFormat(8, 2)
    assert f.decode(0) == 0.0
    assert math.isnan(f.decode(0x80))
    assert f.encode(math.nan) == 0x80
    assert f.encode(math.inf) == 0x80
    assert f.maxpos == 2.0**24
    assert f.minpos == 2.0**-24
    assert f.useed == 16


@pytest.mark.parametrize("n,es", [(n, es) for n in (4, 5, 6, 8, 10) for es in range(4)])
def test_posit_decode_matches_bit_string_oracle(n, es):
    f = PositFormat(n, es)
    for code in range(1 << n):
        want = posit_value(code, n, es)
        got = f.decode(code)
        if want is None:
            assert math.isnan(got)
        else:
            assert got == float(want), code


@pytest.mark.parametrize("n,es", [(8, 0), (8, 2), (16, 1), (16, 2), (32, 2), (12, 3)])
def test_posit_round_trip_sampled(n, es):
    f = PositFormat(n, es)
    codes = range(1 << n) if n <= 16 else np.random.default_rng(0).integers(0, 1 << n, 20000)
    for code in codes:
        code = int(code)
        if code == f.nar_code:
            continue
        assert f.encode(f.decode(code)) == code


@pytest.mark.parametrize("n,es", [(6, 0), (6, 2), (8, 1), (8, 2)])
def test_posit_encode_nearest_against_exhaustive(n, es):
    f = PositFormat(n, es)
    rng = np.random.default_rng(1)
    xs = list(rng.normal(0, 4, 150)) + list(2.0 ** rng.uniform(-30, 30, 50) * rng.choice([-1, 1], 50))
    # exact midpoints between neighbours exercise the tie rule
    for code in range(1, (1 << (n - 1)) - 1):
        xs.append((f.decode(code) + f.decode(code + 1)) / 2)
    for x in xs:
        assert f.encode(float(x)) == posit_nearest(float(x), n, es) % (1 << n), x


def test_posit_saturates():
    f = PositFormat(8, 2)
    assert f.quantize(1e30) == f.maxpos
    assert f.quantize(-1e30) == -f.maxpos
    assert f.quantize(1e-30) == f.minpos
    assert f.quantize(-1e-30) == -f.minpos


@given(finite, finite)
@settings(max_examples=300, deadline=None)
def test_posit_encode_monotone(a, b):
    f = PositFormat(16, 2)
    lo, hi = min(a, b), max(a, b)
    assert f.quantize(lo) <= f.quantize(hi)


@given(finite)
@settings(max_examples=300, deadline=None)
def test_posit_quantize_idempotent_and_sign_symmetric(x):
    f = PositFormat(12, 1)
    q = f.quantize(x)
    assert f.quantize(q) == q
    assert f.quantize(-x) == -q


def test_posit_array_matches_scalar():
    f = PositFormat(10, 2)
    x = np.random.default_rng(3).normal(0, 10, 500)
    assert np.array_equal(f.quantize_array(x), np.array([f.quantize(v) for v in x]))


def test_posit_functional_api_and_validation():
    f = PositFormat(16, 2)
    assert posit_decode(posit_encode(1.5, f), f) == 1.5
    with pytest.raises(ValueError):
        PositFormat(40, 2)
    with pytest.raises(ValueError):
        PositFormat(8, 7)


# ---------------------------------------------------------------- fixed point


def test_fixed_golden():
    s = fixed_scale_for(1.6181, 16)
    assert s == 14
    f = FixedFormat(16, s)
    assert f.encode(1.6181) == 26510
    assert abs(f.decode(26510) - 1.6181) < 1e-4


@given(st.floats(min_value=-1e6, max_value=1e6, allow_nan=False), st.sampled_from([8, 16, 32]), st.integers(-8, 20))
def test_fixed_encode_is_saturating_floor(r, b, s):
    assert FixedFormat(b, s).encode(r) == fixed_floor(r, b, s)


@given(st.floats(min_value=1e-6, max_value=1e6), st.sampled_from([8, 12, 16, 32]))
def test_fixed_scale_is_largest_that_fits(maxabs, b):
    s = fixed_scale_for(maxabs, b)
    assert math.floor(maxabs * 2.0**s) <= (1 << (b - 1)) - 1
    assert math.floor(maxabs * 2.0 ** (s + 1)) > (1 << (b - 1)) - 1


def test_fixed_edge_cases():
    f = FixedFormat(8, 4)
    assert f.encode(-1e9) == -128 and f.encode(1e9) == 127
    assert f.encode(math.inf) == 127
    with pytest.raises(ValueError):
        f.encode(math.nan)
    assert fixed_scale_for(0.0, 16) == 14
    x = np.array([-9.0, -0.07, 0.0, 0.3, 9.0])
    assert list(f.encode_array(x)) == [f.encode(v) for v in x]


# ---------------------------------------------------------------- zero-skew


def test_zeroskew_golden():
    f = zeroskew_params(-2.0, 2.0, 8)
    assert f.S == pytest.approx(4 / 255, abs=1e-15)
    assert f.Z == 128
    assert f.encode(1.6181) == 231
    assert abs(f.decode(231) - 1.6157) < 1e-4


def test_zeroskew_other_ranges():
    assert zeroskew_params(-1.0, 3.0, 8).Z == 64
    f = zeroskew_params(2.0, 5.0, 8)  # widened to include zero
    assert f.decode(f.encode(0.0)) == 0.0
    g = zeroskew_params(0.0, 0.0, 8)
    assert g.S == 1.0
    assert isinstance(f, ZeroSkewFormat)


@given(st.floats(-50, 50), st.floats(0.01, 50), st.sampled_from([4, 8, 16]), st.floats(-1, 1))
def test_zeroskew_error_within_one_step(lo, width, b, frac):
    f = zeroskew_params(lo, lo + width, b)
    lo2, hi2 = min(lo, 0.0), max(lo + width, 0.0)
    r = lo2 + (frac + 1) / 2 * (hi2 - lo2)
    assert 0 <= f.encode(r) <= f.qmax
    assert abs(f.quantize(r) - r) <= f.S * (1 + 1e-9) + 1e-12


# ---------------------------------------------------------------- truncated float and plumbing


def test_truncfloat_bfloat16():
    f = TruncFloatFormat(16)
    assert f.quantize(1.0) == 1.0
    assert f.quantize(1.0 + 2.0**-8) == 1.0  # tie to even
    assert f.quantize(1.0 + 3 * 2.0**-8) == 1.0 + 2.0**-6
    assert f.decode(f.encode(3.140625)) == 3.140625
    x = np.random.default_rng(4).normal(0, 100, 300)
    assert np.array_equal(f.quantize_array(x), np.array([f.quantize(v) for v in x]))


def test_quantize_dispatch_and_nar():
    assert quantize(0.3, FloatFormat()) == 0.3
    with pytest.raises(NaRError):
        quantize(math.nan, PositFormat(8, 2))


def test_rep_params_round_trip():
    p = RepParams("posit", shared={8: PositFormat(8, 0), 16: PositFormat(16, 2)})
    assert RepParams.from_json(p.to_json()) == p
    q = RepParams("fixed", tensors={"a": {8: FixedFormat(8, 3)}})
    assert RepParams.from_json(q.to_json()).format_for("a", 8) == FixedFormat(8, 3)
    assert format_from_json(TruncFloatFormat(12).to_json()) == TruncFloatFormat(12)
    assert isinstance(RepParams("float").format_for("anything", 8), FloatFormat)
