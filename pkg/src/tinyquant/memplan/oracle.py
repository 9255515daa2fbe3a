"""Brute-force minimum peak for small planning instances (test oracle)."""

from __future__ import annotations

from typing import Sequence

from .liveness import LiveRange, lower_bound

MAX_TENSORS = 8


def brute_force_min(ranges: Sequence[LiveRange], cap: int = 512) -> int:
    """Smallest scratch size admitting a valid placement of ``ranges``.

    Depth-first search over offsets, one height at a time. Any packing can
    be slid down until every tensor sits at 0 or directly on top of a
    tensor it is live with; listing tensors by offset, each one then rests
    on an earlier one. So it suffices to place tensors in nondecreasing
    offset order at 0 or at the top of an already placed, overlapping
    tensor. Occupancy per instruction is kept as an int bitmask.
    """
    ranges = list(ranges)
    if len(ranges) > MAX_TENSORS:
        raise ValueError(f"brute force supports at most {MAX_TENSORS} tensors, got {len(ranges)}")
    if not ranges:
        return 0
    width = max(r.end for r in ranges) + 1
    n = len(ranges)
    conflicts = [[j for j in range(n) if j != i and ranges[i].overlaps(ranges[j])] for i in range(n)]

    def feasible(height: int) -> bool:
        occ = [0] * width
        offset = [-1] * n

        def dfs(placed: int, floor: int) -> bool:
            if placed == n:
                return True
            for i in range(n):
                if offset[i] >= 0:
                    continue
                r = ranges[i]
                cands = {0} | {offset[j] + ranges[j].size for j in conflicts[i] if offset[j] >= 0}
                for y in sorted(c for c in cands if c >= floor and c + r.size <= height):
                    mask = ((1 << r.size) - 1) << y
                    if any(occ[x] & mask for x in range(r.start, r.end + 1)):
                        continue
                    for x in range(r.start, r.end + 1):
                        occ[x] |= mask
                    offset[i] = y
                    if dfs(placed + 1, y):
                        return True
                    offset[i] = -1
                    for x in range(r.start, r.end + 1):
                        occ[x] &= ~mask
            return False

        return dfs(0, 0)

    for height in range(lower_bound(ranges), cap + 1):
        if feasible(height):
            return height
    raise ValueError(f"no placement within cap={cap} bytes")
