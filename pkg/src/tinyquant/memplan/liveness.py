"""Live ranges of RAM tensors and the max-live lower bound."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Mapping

from ..ir import Instruction, Program

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LiveRange:
    name: str
    size: int  # bytes
    start: int  # first instruction, inclusive
    end: int  # last instruction, inclusive

    def __post_init__(self) -> None:
        if self.size < 1:
            raise ValueError(f"{self.name}: size must be >= 1 byte, got {self.size}")
        if not 0 <= self.start <= self.end:
            raise ValueError(f"{self.name}: bad live range [{self.start}, {self.end}]")

    def overlaps(self, other: "LiveRange") -> bool:
        return self.start <= other.end and other.start <= self.end

    def to_json(self) -> dict:
        return {"name": self.name, "size": self.size, "start": self.start, "end": self.end}


def tensor_bytes(program: Program, rho: Mapping[str, int]) -> dict[str, int]:
    """RAM bytes of each RAM tensor: bitwidth x cardinality, rounded up."""
    return {t: max(1, math.ceil(rho[t] * program.cardinality(t) / 8)) for t in program.ram_tensors}


def live_ranges(instrs: list[Instruction], program: Program, sizes: Mapping[str, int]) -> list[LiveRange]:
    """Live range of every RAM tensor, in definition order.

    A binding is live from its defining instruction through its last use,
    the return counting as a use. The model input is live from
    instruction 0. Flash-resident params are excluded.
    """
    define: dict[str, int] = {}
    if program.input is not None:
        define[program.input.name] = 0
    for ins in instrs:
        if ins.dest is not None:
            define[ins.dest] = ins.index
    last: dict[str, int] = {}
    for ins in instrs:
        for s in ins.srcs:
            if s in define:
                last[s] = ins.index
    out = []
    for name, start in define.items():
        if name not in last:
            log.warning("tensor %s is defined but never used", name)
        out.append(LiveRange(name, int(sizes[name]), start, last.get(name, start)))
    return out


def lower_bound(ranges: Iterable[LiveRange]) -> int:
    """Peak of tightly stacking the tensors live at each instruction."""
    ranges = list(ranges)
    if not ranges:
        return 0
    horizon = max(r.end for r in ranges) + 1
    load = [0] * (horizon + 1)
    for r in ranges:
        load[r.start] += r.size
        load[r.end + 1] -= r.size
    best = cur = 0
    for x in range(horizon):
        cur += load[x]
        best = max(best, cur)
    return best


def ranges_from_json(doc) -> list[LiveRange]:
    items = doc["tensors"] if isinstance(doc, dict) else doc
    return [LiveRange(str(t["name"]), int(t["size"]), int(t["start"]), int(t["end"])) for t in items]


def ranges_to_json(ranges: Iterable[LiveRange]) -> dict:
    return {"tensors": [r.to_json() for r in ranges]}
