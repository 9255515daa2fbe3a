"""Two-bitwidth exploration under a RAM budget.

Stage I fixes data-dependent representation parameters (posit ``es``,
fixed-point scales, zero-skew ranges). Stage II runs the program once with
every tensor at the high bitwidth and once at the low bitwidth, and ranks
tensors by promotability: the 95th-percentile absolute deviation between
the two runs divided by the tensor's element count. Stage III greedily
promotes tensors in that order while the planned scratch size stays within
``memory_limit * soft_limit``, restarting from each tensor that overshot
the budget and from all of them at once, and keeps the best configuration
seen.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, MutableMapping, Optional, Sequence

import numpy as np

from .interp import Executor
from .ir import linearize
from .memplan import live_ranges, solve_exact, solve_first_fit, tensor_bytes
from .numrep import FixedFormat, PositFormat, RepParams, TruncFloatFormat, fixed_scale_for, zeroskew_params

log = logging.getLogger(__name__)

DEFAULT_ES = {8: (0, 2), 16: (1, 2)}
PERCENTILE = 0.95
PAIR_CANDIDATES = (8, 9, 10, 12, 16)


@dataclass
class ExploreConfig:
    low: int = 8
    high: int = 16
    memory_limit: float = math.inf
    soft_limit: float = 1.0
    es_candidates: dict[int, tuple[int, ...]] = field(default_factory=lambda: dict(DEFAULT_ES))
    planner: str = "firstfit"  # memory evaluator used inside the exploration
    coarsen: int = 1
    timeout: Optional[float] = 7200.0
    fixed_mode: str = "qcq"

    def __post_init__(self) -> None:
        if not self.low < self.high:
            raise ValueError(f"low bitwidth {self.low} must be below high bitwidth {self.high}")
        if not self.soft_limit > 0:
            raise ValueError(f"soft limit factor must be positive, got {self.soft_limit}")
        if self.memory_limit < 0:
            raise ValueError("memory limit must be nonnegative")
        if self.planner not in ("firstfit", "exact"):
            raise ValueError(f"unknown planner {self.planner!r}")

    @property
    def budget(self) -> float:
        return self.memory_limit * self.soft_limit


@dataclass
class ExploreStats:
    codegen_calls: int = 0
    execution_calls: int = 0
    preprocess_execution_calls: int = 0
    pair_selection_calls: int = 0

    def to_json(self) -> dict:
        return dict(self.__dict__)


@dataclass
class LedgerEntry:
    rho: dict[str, int]
    planned_ram_bytes: int
    metric: float
    stage: str

    def to_json(self) -> dict:
        return {
            "rho": dict(self.rho),
            "planned_ram_bytes": self.planned_ram_bytes,
            "metric": self.metric,
            "stage": self.stage,
        }


@dataclass
class ExploreResult:
    rho: dict[str, int]
    params: RepParams
    metric: float
    ledger: list[LedgerEntry]
    stats: ExploreStats
    heat_map: dict[str, float]
    promotion_order: list[str]
    overshooting: list[str]
    low_map: dict[str, np.ndarray]
    high_map: dict[str, np.ndarray]
    budget_feasible: bool = True


def percentile_index(n: int) -> int:
    """Zero-based nearest-rank index of the 95th percentile among ``n`` sorted values."""
    return math.floor(PERCENTILE * (n - 1))


def create_heat_map(
    low_map: Mapping[str, np.ndarray], high_map: Mapping[str, np.ndarray], sizes: Mapping[str, int]
) -> tuple[dict[str, float], list[str]]:
    """Promotability per tensor and the tensors sorted by it, highest first.

    Ties keep the value maps' tensor order.
    """
    heat: dict[str, float] = {}
    for name, low in low_map.items():
        high = high_map[name]
        if len(low) != len(high):
            raise ValueError(f"{name}: value maps differ in length ({len(low)} vs {len(high)})")
        if len(low) == 0:
            raise ValueError(f"{name}: no logged values")
        dev = np.sort(np.abs(np.asarray(high, dtype=np.float64) - np.asarray(low, dtype=np.float64)))
        score = float(dev[percentile_index(len(dev))]) / sizes[name]
        heat[name] = 0.0 if math.isnan(score) else score
    order = sorted(heat, key=lambda t: -heat[t])
    return heat, order


def promote_within_memory_limit(
    rho: MutableMapping[str, int],
    promotion_order: Sequence[str],
    memory_limit: float,
    soft_limit: float,
    high: int,
    low: int,
    memory_usage: Callable[[Mapping[str, int]], int],
) -> list[str]:
    """Cumulatively promote tensors in order, reverting any that bust the budget.

    A tensor is reverted when usage exceeds the soft-scaled limit and is
    reported as overshooting when usage reaches or exceeds it, so a tensor
    landing exactly on the limit stays promoted and is still reported.
    Mutates ``rho``.
    """
    budget = memory_limit * soft_limit
    overshooting = []
    for var in promotion_order:
        rho[var] = high
        usage = memory_usage(rho)
        if usage > budget:
            rho[var] = low
        if usage >= budget:
            overshooting.append(var)
    return overshooting


def select_best(ledger: Sequence[LedgerEntry], high_bytes: Callable[[Mapping[str, int]], int]) -> LedgerEntry:
    """Highest metric; then fewest bytes held at the high bitwidth; then earliest."""
    if not ledger:
        raise ValueError("empty ledger")
    best_i = min(range(len(ledger)), key=lambda i: (-ledger[i].metric, high_bytes(ledger[i].rho), i))
    return ledger[best_i]


class Haunter:
    def __init__(self, executor: Executor, rep: str, cfg: ExploreConfig):
        self.ex = executor
        self.program = executor.program
        self.rep = rep
        self.cfg = cfg
        self.stats = ExploreStats()
        self.ledger: list[LedgerEntry] = []
        self.params: Optional[RepParams] = None
        self._instrs = linearize(self.program)
        self._profile: Optional[dict[str, tuple[float, float]]] = None

    # ---------------------------------------------------------------- helpers

    @property
    def tensors(self) -> tuple[str, ...]:
        return self.program.tensor_names

    def uniform(self, bits: int) -> dict[str, int]:
        return {t: bits for t in self.tensors}

    def memory_usage(self, rho: Mapping[str, int]) -> int:
        """Planned scratch bytes for ``rho``; one code-generation call."""
        self.stats.codegen_calls += 1
        ranges = live_ranges(self._instrs, self.program, tensor_bytes(self.program, rho))
        if self.cfg.planner == "exact":
            return solve_exact(ranges, self.cfg.coarsen, self.cfg.timeout).peak
        return solve_first_fit(ranges).peak

    def high_bytes(self, rho: Mapping[str, int]) -> int:
        return sum(
            math.ceil(rho[t] * self.program.cardinality(t) / 8) for t in self.tensors if rho[t] == self.cfg.high
        )

    def execute(self, rho: Mapping[str, int], params: Optional[RepParams] = None, log_values: bool = False):
        self.stats.execution_calls += 1
        res = self.ex.run(params or self.params, rho, log_values=log_values, fixed_mode=self.cfg.fixed_mode)
        return res, self.ex.score(res)

    def save(self, metric: float, rho: Mapping[str, int], stage: str, force: bool = False) -> None:
        usage = self.memory_usage(rho)
        if usage > self.cfg.budget and not force:
            log.warning("%s: configuration needs %d bytes, over the %.6g budget; not saved", stage, usage, self.cfg.budget)
            return
        self.ledger.append(LedgerEntry(dict(rho), usage, metric, stage))

    def _profile_once(self) -> dict[str, tuple[float, float]]:
        if self._profile is None:
            self.stats.preprocess_execution_calls += 1
            self._profile = self.ex.profile()
        return self._profile

    def params_for(self, bit_list: Sequence[int], es: Optional[Mapping[int, int]] = None) -> RepParams:
        """Representation parameters at each bitwidth in ``bit_list``."""
        rep = self.rep
        if rep == "float":
            return RepParams("float")
        if rep == "posit":
            es = es or {}
            return RepParams("posit", shared={b: PositFormat(b, es.get(b, _default_es(b))) for b in bit_list})
        if rep == "truncfloat":
            return RepParams("truncfloat", shared={b: TruncFloatFormat(b) for b in bit_list})
        prof = self._profile_once()
        labels = {b.name for b in self.program.body if b.op == "argmax"}
        tensors: dict[str, dict] = {}
        for t in self.tensors:
            lo, hi = prof[t]
            if rep == "fixed" and t in labels:
                tensors[t] = {b: FixedFormat(b, 0) for b in bit_list}  # class indices
            elif rep == "fixed":
                maxabs = max(abs(lo), abs(hi))
                tensors[t] = {b: FixedFormat(b, fixed_scale_for(maxabs, b)) for b in bit_list}
            else:
                tensors[t] = {b: zeroskew_params(lo, hi, b) for b in bit_list}
        return RepParams(rep, tensors=tensors)

    # ---------------------------------------------------------------- stages

    def preprocess(self) -> RepParams:
        """Stage I: pick representation parameters for the two bitwidths."""
        cfg = self.cfg
        if self.ex.dataset is None or len(self.ex.dataset) == 0:
            raise ValueError("preprocessing needs a nonempty dataset")
        bits = (cfg.low, cfg.high)
        if self.rep == "truncfloat" and cfg.low < 10:
            raise ValueError("truncated float needs bitwidths of at least 10")
        if self.rep != "posit":
            self.params = self.params_for(bits)
            return self.params
        chosen = {}
        for b in bits:
            cands = tuple(cfg.es_candidates.get(b, (_default_es(b),)))
            default = max(cands)
            if len(cands) == 1:
                chosen[b] = default
                continue
            accs = {}
            for es in cands:
                self.stats.preprocess_execution_calls += 1
                res = self.ex.run(RepParams("posit", shared={b: PositFormat(b, es)}), self.uniform(b))
                accs[es] = self.ex.score(res)
            best = default
            for es in sorted(cands):
                if accs[es] > accs[best]:
                    best = es
            chosen[b] = best
            log.info("posit%d: es accuracies %s -> es=%d", b, accs, best)
        self.params = self.params_for(bits, chosen)
        return self.params

    def create_value_maps(self):
        """Stage II, part 1: logged all-high and all-low runs; all-low goes to the ledger."""
        cfg = self.cfg
        high_res, _ = self.execute(self.uniform(cfg.high), log_values=True)
        rho_low = self.uniform(cfg.low)
        low_res, acc_low = self.execute(rho_low, log_values=True)
        self.save(acc_low, rho_low, "all-low", force=True)
        return low_res.value_map, high_res.value_map, acc_low

    def promote(self, rho: MutableMapping[str, int], order: Sequence[str]) -> list[str]:
        return promote_within_memory_limit(
            rho, order, self.cfg.memory_limit, self.cfg.soft_limit, self.cfg.high, self.cfg.low, self.memory_usage
        )

    def promotion_algorithm(self, order: Sequence[str]) -> tuple[dict[str, int], list[str]]:
        """Stage III. Returns the best saved assignment and the stage-1 overshooting list."""
        cfg = self.cfg
        rho = self.uniform(cfg.low)
        overshooting = self.promote(rho, order)
        _, acc = self.execute(rho)
        self.save(acc, rho, "cumulative")

        for var in overshooting:
            rho = self.uniform(cfg.low)
            rho[var] = cfg.high
            if self.memory_usage(rho) > cfg.budget:
                continue
            self.promote(rho, order)
            _, acc = self.execute(rho)
            self.save(acc, rho, f"seed:{var}")

        rho = self.uniform(cfg.low)
        for var in overshooting:
            rho[var] = cfg.high
        self.promote(rho, order)
        _, acc = self.execute(rho)
        self.save(acc, rho, "all-overshooting")

        best = select_best(self.ledger, self.high_bytes)
        return dict(best.rho), overshooting

    def explore(self) -> ExploreResult:
        params = self.preprocess()
        low_map, high_map, _ = self.create_value_maps()
        sizes = {t: self.program.cardinality(t) for t in self.tensors}
        heat, order = create_heat_map(low_map, high_map, sizes)
        feasible = self.ledger[0].planned_ram_bytes <= self.cfg.budget
        if not feasible:
            log.warning(
                "even the all-low assignment needs %d bytes, over the %.6g budget",
                self.ledger[0].planned_ram_bytes,
                self.cfg.budget,
            )
        rho, overshooting = self.promotion_algorithm(order)
        metric = next(e.metric for e in self.ledger if e.rho == rho)
        return ExploreResult(
            rho, params, metric, list(self.ledger), self.stats, heat, order, overshooting, low_map, high_map, feasible
        )

    def select_bitwidth_pair(self, candidates: Sequence[int] = PAIR_CANDIDATES) -> tuple[int, int]:
        """Pick the two homogeneous bitwidths whose accuracies straddle the float accuracy."""
        candidates = sorted(set(candidates))
        if len(candidates) < 2:
            raise ValueError("need at least two candidate bitwidths")
        params = self.params_for(candidates)
        acc = {}
        for b in candidates:
            self.stats.pair_selection_calls += 1
            acc[b] = self.ex.score(self.ex.run(params, self.uniform(b), fixed_mode=self.cfg.fixed_mode))
        return straddling_pair(acc, self.ex.score(self.ex.reference))


def straddling_pair(acc: Mapping[int, float], float_acc: float) -> tuple[int, int]:
    """(low, high) bitwidths whose homogeneous accuracies bracket ``float_acc``.

    Among ties the lowest bitwidth wins. If every accuracy exceeds the
    float accuracy the two smallest bitwidths are returned; if every one
    falls short, the two most accurate.
    """
    bits = sorted(acc)
    below = [b for b in bits if acc[b] <= float_acc]
    above = [b for b in bits if acc[b] >= float_acc]
    if not below:
        return bits[0], bits[1]
    lower = min(below, key=lambda b: (-acc[b], b))
    rest = [b for b in above if b != lower]
    if rest:
        upper = min(rest, key=lambda b: (acc[b], b))
    else:
        upper = min((b for b in bits if b != lower), key=lambda b: (-acc[b], b))
    return min(lower, upper), max(lower, upper)


def _default_es(bits: int) -> int:
    return max(DEFAULT_ES.get(bits, (2,)))
