"""Command-line driver: compile, explore, plan, eval and demo."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .codegen import emit_c, emit_memory_map
from .haunter import DEFAULT_ES, ExploreConfig, Haunter
from .interp import Dataset, Executor, load_dataset, load_weights
from .ir import DSLError, linearize, load_program, parse
from .memplan import DEFAULT_TIMEOUT, live_ranges, ranges_from_json, solve_exact, solve_first_fit, tensor_bytes
from .numrep import REPS, RepParams

log = logging.getLogger("tinyquant")

EXIT_OK, EXIT_BUDGET, EXIT_ERROR = 0, 1, 2

# Two-input linear classifier used by the demo; X1 is baked in as a param.
DEMO_SOURCE = """\
param W1 : R[1][2] = W1
param X1 : R[2][1] = X1
param B1 : R[1][1] = B1
return W1 * X1 + B1
"""
DEMO_WEIGHTS = {"W1": [[-2.139562, 1.885351]], "X1": [[1.185109], [-2.206466]], "B1": [[0.146048]]}


class PhaseError(Exception):
    def __init__(self, phase: str, err: BaseException):
        super().__init__(f"[{phase}] {err}")
        self.phase = phase


class Timer:
    def __init__(self) -> None:
        self.seconds: dict[str, float] = {}

    @contextmanager
    def phase(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        except PhaseError:
            raise
        except Exception as err:  # surfaced with the phase tag
            raise PhaseError(name, err) from err
        finally:
            self.seconds[name] = self.seconds.get(name, 0.0) + time.perf_counter() - t0


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=False, allow_nan=False) + "\n", encoding="utf-8")


def _finite(x: float) -> Optional[float]:
    return x if math.isfinite(x) else None


def _config(args) -> ExploreConfig:
    es = dict(DEFAULT_ES)
    if args.es_low is not None:
        es[args.low] = (args.es_low,)
    if args.es_high is not None:
        es[args.high] = (args.es_high,)
    return ExploreConfig(
        low=args.low,
        high=args.high,
        memory_limit=math.inf if args.mem_limit is None else args.mem_limit,
        soft_limit=args.soft_limit,
        es_candidates=es,
        planner=args.planner,
        coarsen=args.coarsen,
        timeout=args.timeout_secs,
        fixed_mode=args.fixed_mode,
    )


def _load_inputs(args, timer: Timer):
    with timer.phase("load"):
        program = load_program(args.model)
        weights = load_weights(args.weights)
        dataset = load_dataset(args.data)
        executor = Executor(program, weights, dataset)
    return program, executor


def run_pipeline(program, executor: Executor, rep: str, cfg: ExploreConfig, out: Path, emit: bool = True):
    """Explore, plan and (for fixed point) emit. Returns (exit code, report)."""
    timer = Timer()
    out.mkdir(parents=True, exist_ok=True)
    with timer.phase("explore"):
        result = Haunter(executor, rep, cfg).explore()
    with timer.phase("plan"):
        ranges = live_ranges(linearize(program), program, tensor_bytes(program, result.rho))
        ff = solve_first_fit(ranges)
        exact = solve_exact(ranges, cfg.coarsen, cfg.timeout)
        doc, text = emit_memory_map(exact, ranges)
        _write_json(out / "memory_map.json", doc)
        (out / "memory_map.txt").write_text(text, encoding="utf-8")
    emitted = None
    if emit and rep == "fixed":
        with timer.phase("codegen"):
            emitted = emit_c(program, result.rho, result.params, exact, executor.weights)
            (out / "model.c").write_text(emitted.source, encoding="utf-8")
    elif emit:
        log.info("no C emitted: C output supports fixed point only")

    with timer.phase("report"):
        budget = cfg.budget
        within = exact.peak <= budget
        report = {
            "tool": f"tinyquant {__version__}",
            "representation": rep,
            "low": cfg.low,
            "high": cfg.high,
            "rho": result.rho,
            "rep_params": result.params.to_json(),
            "metric": result.metric,
            "float_metric": executor.score(executor.reference),
            "metric_kind": _metric_kind(program, executor.dataset),
            "ram": {
                "first_fit_bytes": ff.peak,
                "exact_bytes": exact.peak,
                "exact_optimal": exact.optimal,
                "coarsen": cfg.coarsen,
            },
            "budget": {
                "memory_limit": _finite(cfg.memory_limit),
                "soft_limit": cfg.soft_limit,
                "budget_bytes": _finite(budget),
                "satisfied": within,
                "all_low_feasible": result.budget_feasible,
            },
            "stats": result.stats.to_json(),
            "heat_map": result.heat_map,
            "promotion_order": result.promotion_order,
            "overshooting": result.overshooting,
            "scratch_offsets": exact.offsets,
            "c_source": "model.c" if emitted else None,
        }
        _write_json(out / "report.json", report)
        with open(out / "ledger.jsonl", "w", encoding="utf-8") as fh:
            for e in result.ledger:
                fh.write(json.dumps(e.to_json(), allow_nan=False) + "\n")
    _write_json(out / "timings.json", timer.seconds)
    if not result.budget_feasible:
        log.warning("budget infeasible: the all-low assignment already exceeds %s bytes", budget)
    return (EXIT_OK if within else EXIT_BUDGET), report


def _metric_kind(program, dataset: Dataset) -> str:
    if dataset.labels is not None:
        return "accuracy"
    return "agreement with float reference" if program.is_classifier else "negated mean absolute error"


def cmd_compile(args, emit: bool = True) -> int:
    timer = Timer()
    program, executor = _load_inputs(args, timer)
    with timer.phase("config"):
        cfg = _config(args)
    code, report = run_pipeline(program, executor, args.rep, cfg, Path(args.out), emit=emit)
    print(
        f"rho: {json.dumps(report['rho'])}\n"
        f"metric ({report['metric_kind']}): {report['metric']:.6g} (float {report['float_metric']:.6g})\n"
        f"RAM: exact {report['ram']['exact_bytes']} B, first-fit {report['ram']['first_fit_bytes']} B\n"
        f"artifacts in {args.out}"
    )
    if code == EXIT_BUDGET:
        print("budget not satisfied", file=sys.stderr)
    return code


def cmd_explore(args) -> int:
    return cmd_compile(args, emit=False)


def cmd_plan(args) -> int:
    timer = Timer()
    with timer.phase("load"):
        with open(args.trace, encoding="utf-8") as fh:
            ranges = ranges_from_json(json.load(fh))
    with timer.phase("plan"):
        ff = solve_first_fit(ranges)
        exact = solve_exact(ranges, args.coarsen, args.timeout_secs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    doc, text = emit_memory_map(exact, ranges)
    _write_json(out / "memory_map.json", doc)
    (out / "memory_map.txt").write_text(text, encoding="utf-8")
    _write_json(
        out / "report.json",
        {
            "first_fit_bytes": ff.peak,
            "exact_bytes": exact.peak,
            "exact_optimal": exact.optimal,
            "coarsen": args.coarsen,
            "first_fit_offsets": ff.offsets,
            "exact_offsets": exact.offsets,
        },
    )
    _write_json(out / "timings.json", timer.seconds)
    print(f"exact {exact.peak} B{'' if exact.optimal else ' (timed out, first-fit)'}, first-fit {ff.peak} B")
    print(text, end="")
    return EXIT_OK


def cmd_eval(args) -> int:
    timer = Timer()
    program, executor = _load_inputs(args, timer)
    with timer.phase("eval"):
        if args.rho:
            with open(args.rho, encoding="utf-8") as fh:
                rho = {k: int(v) for k, v in json.load(fh).items()}
        else:
            rho = {t: args.bits for t in program.tensor_names}
        bits = sorted(set(rho.values()))
        es = None if args.es is None else {b: args.es for b in bits}
        params = Haunter(executor, args.rep, ExploreConfig()).params_for(bits, es)
        res = executor.run(params, rho, fixed_mode=args.fixed_mode)
        doc = {
            "representation": args.rep,
            "rho": rho,
            "metric": executor.score(res),
            "float_metric": executor.score(executor.reference),
            "metric_kind": _metric_kind(program, executor.dataset),
            "invalid_samples": sum(1 for ok in res.valid if not ok),
        }
    print(json.dumps(doc, indent=2))
    return EXIT_OK


def cmd_demo(args) -> int:
    program = parse(DEMO_SOURCE)
    weights = {k: np.asarray(v) for k, v in DEMO_WEIGHTS.items()}
    executor = Executor(program, weights, Dataset([None]))
    es = {args.low: (2,), args.high: (2,)}
    cfg = ExploreConfig(
        low=args.low,
        high=args.high,
        memory_limit=args.mem_limit,
        soft_limit=args.soft_limit,
        es_candidates=es,
        fixed_mode="qcq",
    )
    h = Haunter(executor, args.rep, cfg)
    result = h.explore()
    ref = executor.reference.outputs[0].item()
    print("program:")
    print("  " + program.format().replace("\n", "\n  ").rstrip())
    print(f"\nfloat output: {ref:.6f}")
    print(f"\nrepresentation: {args.rep}; value maps ({args.high}-bit vs {args.low}-bit)")
    print(f"  {'tensor':<8}{'high':>28}{'low':>28}")
    for t in program.tensor_names:
        hi = ", ".join(f"{v:.5f}" for v in result.high_map[t])
        lo = ", ".join(f"{v:.5f}" for v in result.low_map[t])
        print(f"  {t:<8}{hi:>28}{lo:>28}")
    print("\npromotability (95th-percentile deviation / element count):")
    for t in program.tensor_names:
        print(f"  {t:<8}{result.heat_map[t]:.5f}")
    print(f"promotion order: {', '.join(result.promotion_order)}")
    print(f"overshooting: {', '.join(result.overshooting) or '-'}")
    print(f"\nbudget: {args.mem_limit} B x {args.soft_limit}")
    print(f"  {'stage':<18}{'promoted':<26}{'RAM':>5}{'|out - float|':>16}")
    for e in result.ledger:
        promoted = ",".join(t for t in program.tensor_names if e.rho[t] == args.high) or "-"
        err = -e.metric
        print(f"  {e.stage:<18}{promoted:<26}{e.planned_ram_bytes:>5}{err:>16.5f}")
    ranges = live_ranges(linearize(program), program, tensor_bytes(program, result.rho))
    exact = solve_exact(ranges)
    print(f"\nchosen: {json.dumps(result.rho)}  |out - float| = {-result.metric:.5f}")
    print(emit_memory_map(exact, ranges)[1], end="")
    return EXIT_OK if exact.peak <= cfg.budget else EXIT_BUDGET


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tinyquant", description="Two-bitwidth quantization and RAM planning")
    ap.add_argument("--version", action="version", version=f"tinyquant {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    def common(p, data=True):
        p.add_argument("--model", required=True, help="DSL source file")
        p.add_argument("--weights", required=True, help="JSON: key -> nested arrays")
        if data:
            p.add_argument("--data", required=True, help='JSON: {"inputs": [...], "labels": [...]}')
        p.add_argument("--rep", choices=REPS, default="posit")
        p.add_argument("--fixed-mode", choices=("integer", "qcq"), default="integer",
                       help="fixed-point semantics for evaluation (integer matches the emitted C)")

    def explore_flags(p):
        p.add_argument("--low", type=int, default=8)
        p.add_argument("--high", type=int, default=16)
        p.add_argument("--es-low", type=int, default=None, help="fix posit es at the low bitwidth")
        p.add_argument("--es-high", type=int, default=None, help="fix posit es at the high bitwidth")
        p.add_argument("--mem-limit", type=float, default=None, help="RAM budget in bytes (default: none)")
        p.add_argument("--soft-limit", type=float, default=1.0)
        p.add_argument("--coarsen", type=int, default=1)
        p.add_argument("--timeout-secs", type=float, default=DEFAULT_TIMEOUT)
        p.add_argument("--planner", choices=("exact", "firstfit"), default="firstfit",
                       help="memory evaluator during exploration; the final plan is always exact")
        p.add_argument("--out", default="out")

    for name, fn, helptext in (
        ("compile", cmd_compile, "explore, plan and emit C (fixed point)"),
        ("explore", cmd_explore, "explore and plan without emitting C"),
    ):
        p = sub.add_parser(name, help=helptext)
        common(p)
        explore_flags(p)
        p.set_defaults(func=fn)

    p = sub.add_parser("plan", help="plan a live-range trace")
    p.add_argument("--trace", required=True, help='JSON: {"tensors": [{name, size, start, end}, ...]}')
    p.add_argument("--coarsen", type=int, default=1)
    p.add_argument("--timeout-secs", type=float, default=DEFAULT_TIMEOUT)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("eval", help="score one bitwidth assignment")
    common(p)
    p.add_argument("--bits", type=int, default=16, help="homogeneous bitwidth when --rho is absent")
    p.add_argument("--rho", default=None, help="JSON: tensor -> bits")
    p.add_argument("--es", type=int, default=None, help="posit es (default per bitwidth)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("demo", help="walk through the two-input linear classifier example")
    p.add_argument("--rep", choices=REPS, default="posit")
    p.add_argument("--low", type=int, default=8)
    p.add_argument("--high", type=int, default=16)
    p.add_argument("--mem-limit", type=float, default=3)
    p.add_argument("--soft-limit", type=float, default=1.0)
    p.set_defaults(func=cmd_demo)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except PhaseError as err:
        print(f"error {err}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, DSLError, ValueError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
