import os
import subprocess
import sys

import numpy as np
import pytest

from tinyquant import _kernels
from tinyquant._kernels import _pure
from tinyquant.memplan import build_cover_matrix

try:
    from tinyquant._kernels import _ext
except ImportError:  # extension not built
    _ext = None

needs_ext = pytest.mark.skipif(_ext is None, reason="compiled extension not built")


def test_backend_selected():
    assert _kernels.BACKEND in ("compiled", "python")
    if _ext is not None and not os.environ.get("TINYQUANT_PURE_PYTHON"):
        assert _kernels.BACKEND == "compiled"


def test_env_var_forces_pure_backend():
    code = "from tinyquant import _kernels; print(_kernels.BACKEND)"
    env = dict(os.environ, TINYQUANT_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@needs_ext
@pytest.mark.parametrize("n,es", [(8, 0), (8, 2), (12, 1), (16, 2), (24, 3), (32, 2)])
def test_posit_kernels_agree(n, es):
    rng = np.random.default_rng(n * 10 + es)
    x = np.concatenate([rng.normal(0, 10, 2000), 2.0 ** rng.uniform(-120, 120, 2000), [0.0, np.nan, np.inf, -np.inf]])
    a = _ext.posit_encode_array(x, n, es)
    b = _pure.posit_encode_array(x, n, es)
    assert np.array_equal(a, b)
    codes = rng.integers(0, 1 << n, 3000)
    da, db = _ext.posit_decode_array(codes, n, es), _pure.posit_decode_array(codes, n, es)
    assert np.array_equal(da, db, equal_nan=True)


@needs_ext
def test_dlx_kernels_agree():
    rng = np.random.default_rng(7)
    for _ in range(40):
        t = int(rng.integers(1, 6))
        width = int(rng.integers(1, 6))
        units = [int(v) for v in rng.integers(1, 5, t)]
        starts, ends = [], []
        for _ in range(t):
            a, b = sorted(int(v) for v in rng.integers(0, width, 2))
            starts.append(a)
            ends.append(b)
        height = int(rng.integers(max(units), sum(units) + 1))
        m = build_cover_matrix(units, starts, ends, height, width)
        args = (m.L, m.R, m.U, m.D, m.C, m.S, m.ROW, m.n_primary, float("inf"))
        ra, va, ta = _ext.dlx_search(*args)
        rb, vb, tb = _pure.dlx_search(*args)
        assert ra == rb and va == vb and ta == tb == False  # noqa: E712


def test_dlx_times_out():
    m = build_cover_matrix([3, 3, 3, 2, 2, 2], [0] * 6, [0] * 6, 14, 1)
    rows, visited, timed_out = _pure.dlx_search(m.L, m.R, m.U, m.D, m.C, m.S, m.ROW, m.n_primary, 0.0, 1)
    assert rows is None and timed_out and visited == 1


PROBE = """
import json, numpy as np
from tinyquant import _kernels
from tinyquant.memplan import LiveRange, solve_exact
from tinyquant.numrep import PositFormat
rng = np.random.default_rng(9)
peaks = []
for _ in range(40):
    rs = []
    for i in range(int(rng.integers(1, 8))):
        a, b = sorted(int(v) for v in rng.integers(0, 10, 2))
        rs.append(LiveRange(f"t{i}", int(rng.integers(1, 20)), a, b))
    mm = solve_exact(rs)
    peaks.append([mm.peak, mm.offsets])
x = rng.normal(0, 5, 1000)
q = PositFormat(16, 1).quantize_array(x).tolist()
print(json.dumps({"backend": _kernels.BACKEND, "peaks": peaks, "q": q}))
"""


def _probe(pure: bool) -> dict:
    import json

    env = dict(os.environ)
    env.pop("TINYQUANT_PURE_PYTHON", None)
    if pure:
        env["TINYQUANT_PURE_PYTHON"] = "1"
    out = subprocess.run([sys.executable, "-c", PROBE], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


@needs_ext
def test_planner_and_codec_identical_across_backends():
    compiled, pure = _probe(False), _probe(True)
    assert compiled["backend"] == "compiled" and pure["backend"] == "python"
    assert compiled["peaks"] == pure["peaks"]
    assert compiled["q"] == pure["q"]
