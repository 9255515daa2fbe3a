import math

import numpy as np
import pytest

from tinyquant.interp import Dataset, Executor, RunResult, disagreement, integer_op, score, shift_right
from tinyquant.ir import parse
from tinyquant.numrep import FixedFormat, PositFormat, RepParams

from .conftest import FLOAT_OUT, POSIT8, POSIT16

POSIT = RepParams("posit", shared={8: PositFormat(8, 2), 16: PositFormat(16, 2)})


def _expected(ops, t1_bits, t2_bits):
    """Appendix example evaluated by hand from the quantized operands."""
    p16, p8 = PositFormat(16, 2), PositFormat(8, 2)
    q = {16: p16.quantize, 8: p8.quantize}
    w, x, b = ops["W1"], ops["X1"], ops["B1"]
    t1 = q[t1_bits](w[0] * x[0] + w[1] * x[1])
    return q[t2_bits](t1 + b[0])


def test_float_reference(worked_executor):
    assert worked_executor.reference.outputs[0].item() == pytest.approx(FLOAT_OUT, abs=1e-12)
    assert FLOAT_OUT == pytest.approx(-6.54953, abs=1e-5)


def test_quantized_operands(worked_executor):
    names = worked_executor.program.tensor_names
    for bits, ops in ((16, POSIT16), (8, POSIT8)):
        res = worked_executor.run(POSIT, {t: bits for t in names}, log_values=True)
        for t, want in ops.items():
            assert tuple(res.value_map[t]) == want


@pytest.mark.parametrize(
    "rho,t1,t2,err",
    [
        ({"t1": 16, "t2": 16}, -6.6953125, -6.548828125, None),
        ({"t1": 8, "t2": 8}, -7.0, -7.0, 0.45047),
        ({"t1": 16, "t2": 8}, None, None, 0.04953),
        ({"t1": 8, "t2": 16}, None, None, 0.19601),
    ],
)
def test_heterogeneous_runs(worked_executor, rho, t1, t2, err):
    ex = worked_executor
    params_bits = 8 if t1 == -7.0 else 16
    full = {t: params_bits for t in ex.program.param_names} | rho
    res = ex.run(POSIT, full, log_values=True)
    out = res.outputs[0].item()
    ops = POSIT16 if params_bits == 16 else POSIT8
    assert out == _expected(ops, rho["t1"], rho["t2"])
    if t1 is not None:
        assert res.value_map["t1"][0] == t1 and out == t2
    if err is not None:
        assert abs(out - FLOAT_OUT) == pytest.approx(err, abs=1e-5)
        assert ex.score(res) == pytest.approx(-err, abs=1e-5)


def test_execution_counter(worked_executor):
    ex = worked_executor
    ex.reference
    assert ex.execution_calls == 0
    ex.run(POSIT, {t: 8 for t in ex.program.tensor_names})
    assert ex.execution_calls == 1


def test_classifier_metrics():
    ref = RunResult([np.array([1.0]), np.array([0.0]), np.array([2.0])], [True] * 3, True)
    res = RunResult([np.array([1.0]), np.array([1.0]), np.array([2.0])], [True, True, False], True)
    assert disagreement(res, ref) == 2
    ds = Dataset([None] * 3)
    assert score(res, ds, ref) == pytest.approx(1 / 3)
    labelled = Dataset([None] * 3, labels=[1, 1, 0])
    assert score(res, labelled, ref) == pytest.approx(2 / 3)


def test_regression_metric_and_invalid():
    ref = RunResult([np.array([1.0, 2.0])], [True], False)
    res = RunResult([np.array([1.5, 1.0])], [True], False)
    assert disagreement(res, ref) == pytest.approx(0.75)
    assert disagreement(RunResult(res.outputs, [False], False), ref) == math.inf


def test_nar_marks_sample_invalid():
    p = parse("input x : R[1][1]\nlet y = exp(x)\nreturn y\n")
    ex = Executor(p, {}, Dataset([np.array([[800.0]]), np.array([[0.5]])]))
    res = ex.run(RepParams("posit", shared={8: PositFormat(8, 2)}), {"x": 8, "y": 8})
    assert res.valid == [False, True]


def test_weight_validation():
    p = parse("param w : R[1][2] = k\ninput x : R[2][1]\nreturn w * x\n")
    with pytest.raises(KeyError):
        Executor(p, {}, Dataset([np.zeros((2, 1))]))
    with pytest.raises(ValueError):
        Executor(p, {"k": np.zeros(3)}, Dataset([np.zeros((2, 1))]))
    with pytest.raises(ValueError):
        Executor(p, {"k": np.zeros(2)}, Dataset([np.zeros(5)]))


def test_shift_right_is_floor():
    v = np.array([-7, -1, 0, 5], dtype=np.int64)
    assert list(shift_right(v, 1)) == [-4, -1, 0, 2]
    assert list(shift_right(v, -2)) == [-28, -4, 0, 20]
    assert list(shift_right(v, 100)) == [-1, -1, 0, 0]


def test_integer_matmul_floor_semantics():
    p = parse("param a : R[1][2] = a\ninput x : R[2][1]\nreturn a * x\n")
    b = p.body[0]
    fa, fx, fd = FixedFormat(8, 4), FixedFormat(8, 4), FixedFormat(8, 3)
    out = integer_op(b, [np.array([[16, -8]]), np.array([[24], [5]])], [fa, fx], fd)
    # (16*24 - 8*5) = 344 at scale 8 -> floor(344 / 32) = 10 at scale 3
    assert out.tolist() == [[10]]
    sat = integer_op(b, [np.array([[127, 127]]), np.array([[127], [127]])], [fa, fx], fd)
    assert sat.tolist() == [[127]]


def test_integer_mode_tracks_float():
    p = parse("param w : R[2][3] = w\ninput x : R[3][1]\nlet h = tanh(w * x)\nreturn 0.5 * h\n")
    rng = np.random.default_rng(0)
    w = rng.normal(0, 0.5, (2, 3))
    ex = Executor(p, {"w": w}, Dataset([rng.normal(0, 1, (3, 1)) for _ in range(20)]))
    prof = ex.profile()
    from tinyquant.numrep import fixed_scale_for

    fmts = {t: {16: FixedFormat(16, fixed_scale_for(max(abs(lo), abs(hi)), 16))} for t, (lo, hi) in prof.items()}
    res = ex.run(RepParams("fixed", tensors=fmts), {t: 16 for t in p.tensor_names}, fixed_mode="integer")
    assert res.raw_outputs is not None
    assert -ex.score(res) < 2e-3
