"""Compiled vs pure-Python kernels: posit codecs and the exact-cover search.

    python benchmarks/bench_kernels.py [--repeat 3] [--json out.json]
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from tinyquant._kernels import _pure
from tinyquant.memplan import LiveRange, build_cover_matrix, lower_bound

try:
    from tinyquant._kernels import _ext
except ImportError:
    _ext = None


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cover_problems(seed: int, count: int):
    """Random placement instances at their max-live height, as the planner first tries them."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        n_instr = int(rng.integers(4, 14))
        ranges = []
        for i in range(int(rng.integers(4, 9))):
            a, b = sorted(int(v) for v in rng.integers(0, n_instr, 2))
            ranges.append(LiveRange(f"t{i}", int(rng.integers(1, 12)), a, b))
        units = [r.size for r in ranges]
        out.append(build_cover_matrix(units, [r.start for r in ranges], [r.end for r in ranges],
                                      lower_bound(ranges), n_instr))
    return out


def run(repeat: int) -> list[dict]:
    backends = {"python": _pure}
    if _ext is not None:
        backends["compiled"] = _ext
    rng = np.random.default_rng(0)
    x = rng.normal(0, 8, 200_000)
    codes = rng.integers(0, 1 << 16, 200_000)
    mats = cover_problems(1, 60)

    def dlx(mod):
        for m in mats:
            mod.dlx_search(m.L, m.R, m.U, m.D, m.C, m.S, m.ROW, m.n_primary, float("inf"))

    cases = {
        "posit16 encode (200k)": lambda mod: mod.posit_encode_array(x, 16, 1),
        "posit16 decode (200k)": lambda mod: mod.posit_decode_array(codes, 16, 1),
        "exact cover (60 problems)": dlx,
    }
    rows = []
    for name, fn in cases.items():
        row = {"kernel": name}
        for label, mod in backends.items():
            row[label] = best_of(lambda: fn(mod), repeat)
        if "compiled" in row:
            row["speedup"] = row["python"] / row["compiled"]
        rows.append(row)
    return rows


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", default=None, help="also write results here")
    args = ap.parse_args(argv)
    if _ext is None:
        print("compiled extension not built; timing the Python kernels only", file=sys.stderr)
    rows = run(args.repeat)
    print(f"{'kernel':<28}{'python s':>12}{'compiled s':>12}{'speedup':>10}")
    for r in rows:
        comp = f"{r['compiled']:.4f}" if "compiled" in r else "-"
        speed = f"{r['speedup']:.1f}x" if "speedup" in r else "-"
        print(f"{r['kernel']:<28}{r['python']:>12.4f}{comp:>12}{speed:>10}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
