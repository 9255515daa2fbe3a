"""Scratch-buffer offset assignment: first-fit and exact cover.

The exact planner encodes placement as an exact-cover problem on an
``M x I`` canvas (bytes x instructions). The universe is every canvas cell
plus one item per tensor. A placement row holds a tensor item and the
rectangle of cells it occupies at one offset; a filler row holds a single
cell, so packings with gaps are still exact covers. Algorithm X with
dancing links searches the rows, branching on tensors in decreasing
rectangle area and trying lower offsets first.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from functools import reduce
from typing import Optional, Sequence

import numpy as np

from .._kernels import backend
from .liveness import LiveRange, lower_bound

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 7200.0


@dataclass
class MemoryMap:
    offsets: dict[str, int]
    sizes: dict[str, int]
    peak: int
    method: str = "exact"
    optimal: bool = True
    k: int = 1
    stats: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"peak_bytes": self.peak, "offsets": dict(self.offsets)}


def check_memory_map(mm: MemoryMap, ranges: Sequence[LiveRange]) -> None:
    """Raise ``ValueError`` unless ``mm`` is a valid placement of ``ranges``."""
    for r in ranges:
        if r.name not in mm.offsets:
            raise ValueError(f"tensor {r.name} has no offset")
        off = mm.offsets[r.name]
        if off < 0 or off + r.size > mm.peak:
            raise ValueError(f"{r.name} [{off}, {off + r.size}) exceeds scratch of {mm.peak} bytes")
    for i, a in enumerate(ranges):
        for b in ranges[i + 1 :]:
            if not a.overlaps(b):
                continue
            oa, ob = mm.offsets[a.name], mm.offsets[b.name]
            if oa < ob + b.size and ob < oa + a.size:
                raise ValueError(f"{a.name} and {b.name} are live together and share bytes")


def _first_fit_offsets(sizes: Sequence[int], starts: Sequence[int], ends: Sequence[int]) -> list[int]:
    order = sorted(range(len(sizes)), key=lambda i: (starts[i], i))
    offsets = [0] * len(sizes)
    placed: list[int] = []
    for i in order:
        busy = sorted(
            (offsets[j], offsets[j] + sizes[j]) for j in placed if starts[j] <= ends[i] and starts[i] <= ends[j]
        )
        off = 0
        for lo, hi in busy:
            if lo >= off + sizes[i]:
                break
            off = max(off, hi)
        offsets[i] = off
        placed.append(i)
    return offsets


def solve_first_fit(ranges: Sequence[LiveRange]) -> MemoryMap:
    """Allocate in order of first use at the lowest offset free for the whole live range."""
    ranges = list(ranges)
    offs = _first_fit_offsets([r.size for r in ranges], [r.start for r in ranges], [r.end for r in ranges])
    peak = max((o + r.size for o, r in zip(offs, ranges)), default=0)
    return MemoryMap(
        {r.name: o for r, o in zip(ranges, offs)},
        {r.name: r.size for r in ranges},
        peak,
        method="firstfit",
        optimal=False,
    )


@dataclass
class CoverMatrix:
    """Array-encoded dancing-links matrix for one canvas height."""

    L: np.ndarray
    R: np.ndarray
    U: np.ndarray
    D: np.ndarray
    C: np.ndarray
    S: np.ndarray
    ROW: np.ndarray
    n_primary: int
    placements: list[tuple[int, int]]  # row id -> (tensor index, offset); fillers follow

    @property
    def n_nodes(self) -> int:
        return len(self.L)


def build_cover_matrix(
    units: Sequence[int], starts: Sequence[int], ends: Sequence[int], height: int, width: int
) -> CoverMatrix:
    """Exact-cover matrix for tensors of ``units`` height on a height x width canvas.

    Tensor columns come first in the header ring, ordered by decreasing
    rectangle area; cell (y, x) is column ``T + 1 + y * width + x``.
    """
    T = len(units)
    order = sorted(range(T), key=lambda i: (-units[i] * (ends[i] - starts[i] + 1), i))
    ncols = T + height * width

    row_cols: list[np.ndarray] = []
    row_lens: list[np.ndarray] = []
    placements: list[tuple[int, int]] = []
    for rank, t in enumerate(order):
        h, w = units[t], ends[t] - starts[t] + 1
        if h > height:
            continue
        ys = np.arange(height - h + 1)
        xs = np.arange(starts[t], ends[t] + 1)
        cells = (ys[:, None, None] + np.arange(h)[None, :, None]) * width + xs[None, None, :]
        cells = cells.reshape(len(ys), -1) + (T + 1)
        head = np.full((len(ys), 1), rank + 1)
        row_cols.append(np.hstack([head, cells]).ravel())
        row_lens.append(np.full(len(ys), 1 + h * w))
        placements.extend((t, int(y)) for y in ys)
    fillers = np.arange(T + 1, ncols + 1)
    row_cols.append(fillers)
    row_lens.append(np.ones(len(fillers), dtype=np.int64))

    row_len = np.concatenate(row_lens).astype(np.int64)
    col_of = np.concatenate(row_cols).astype(np.int64)
    n_rows = len(row_len)
    row_of = np.repeat(np.arange(n_rows), row_len)

    base = ncols + 1
    n = base + len(col_of)
    L = np.empty(n, dtype=np.int64)
    R = np.empty(n, dtype=np.int64)
    U = np.empty(n, dtype=np.int64)
    D = np.empty(n, dtype=np.int64)
    C = np.zeros(n, dtype=np.int64)
    ROW = np.full(n, -1, dtype=np.int64)

    # header ring
    hdr = np.arange(base)
    L[:base] = np.roll(hdr, 1)
    R[:base] = np.roll(hdr, -1)
    C[:base] = hdr

    # row rings
    nodes = np.arange(base, n)
    first = np.concatenate([[0], np.cumsum(row_len)[:-1]]) + base
    last = first + row_len - 1
    R[base:] = nodes + 1
    L[base:] = nodes - 1
    R[last] = first
    L[first] = last
    C[base:] = col_of
    ROW[base:] = row_of

    # column rings, nodes in row order so lower offsets come first
    by_col = np.argsort(col_of, kind="stable")
    sorted_nodes = nodes[by_col]
    sorted_cols = col_of[by_col]
    starts_grp = np.ones(len(sorted_cols), dtype=bool)
    starts_grp[1:] = sorted_cols[1:] != sorted_cols[:-1]
    ends_grp = np.ones(len(sorted_cols), dtype=bool)
    ends_grp[:-1] = sorted_cols[1:] != sorted_cols[:-1]
    prev = np.roll(sorted_nodes, 1)
    nxt = np.roll(sorted_nodes, -1)
    U[sorted_nodes] = np.where(starts_grp, sorted_cols, prev)
    D[sorted_nodes] = np.where(ends_grp, sorted_cols, nxt)
    U[0] = D[0] = 0
    U[1:base] = D[1:base] = hdr[1:]
    D[sorted_cols[starts_grp]] = sorted_nodes[starts_grp]
    U[sorted_cols[ends_grp]] = sorted_nodes[ends_grp]
    S = np.bincount(col_of, minlength=base).astype(np.int64)
    S[0] = 0

    placements = placements + [(-1, int(c)) for c in fillers]
    return CoverMatrix(L, R, U, D, C, S, ROW, T, placements)


def solve_exact(ranges: Sequence[LiveRange], k: int = 1, timeout: Optional[float] = DEFAULT_TIMEOUT) -> MemoryMap:
    """Minimum-peak placement at granularity ``k`` via exact cover.

    Sizes are rounded up to multiples of ``k``. Canvas heights are tried
    from the max-live lower bound upward in steps of one unit until a cover
    exists; a first-fit packing bounds the search from above. When all
    rounded sizes share a factor ``g`` the canvas unit is ``k * g``: every
    packing can be slid down until each tensor rests on 0 or on another
    tensor, so offsets and the optimal peak are multiples of ``g`` anyway.

    On timeout the byte-level first-fit map is returned with
    ``optimal=False``.
    """
    if k < 1:
        raise ValueError(f"coarsening constant must be >= 1, got {k}")
    ranges = list(ranges)
    sizes = {r.name: r.size for r in ranges}
    if not ranges:
        return MemoryMap({}, {}, 0, method="exact", optimal=True, k=k)
    t0 = time.monotonic()
    deadline = math.inf if timeout is None else t0 + timeout

    rounded = [math.ceil(r.size / k) for r in ranges]
    g = reduce(math.gcd, rounded)
    unit = k * g
    units = [u // g for u in rounded]
    starts = [r.start for r in ranges]
    ends = [r.end for r in ranges]
    width = max(ends) + 1

    lb = lower_bound(LiveRange(r.name, u, r.start, r.end) for r, u in zip(ranges, units))
    ff = _first_fit_offsets(units, starts, ends)
    ff_height = max(o + u for o, u in zip(ff, units))

    stats = {"unit_bytes": unit, "heights_tried": [], "visited": 0, "nodes": 0}
    offsets_units: Optional[list[int]] = None
    height = lb
    for height in range(lb, ff_height):
        stats["heights_tried"].append(height)
        mat = build_cover_matrix(units, starts, ends, height, width)
        stats["nodes"] = max(stats["nodes"], mat.n_nodes)
        rows, visited, timed_out = backend.dlx_search(
            mat.L, mat.R, mat.U, mat.D, mat.C, mat.S, mat.ROW, mat.n_primary, deadline
        )
        stats["visited"] += int(visited)
        if timed_out:
            log.warning("exact planner timed out after %.1fs; falling back to first-fit", time.monotonic() - t0)
            mm = solve_first_fit(ranges)
            mm.stats = {**stats, "timed_out": True}
            mm.k = k
            return mm
        if rows is not None:
            offsets_units = [0] * len(ranges)
            for row in rows:
                t, y = mat.placements[row]
                if t >= 0:
                    offsets_units[t] = y
            break
    else:
        height = ff_height
        stats["heights_tried"].append(height)
        offsets_units = ff

    stats["seconds"] = time.monotonic() - t0
    return MemoryMap(
        {r.name: o * unit for r, o in zip(ranges, offsets_units)},
        sizes,
        height * unit,
        method="exact",
        optimal=True,
        k=k,
        stats=stats,
    )
