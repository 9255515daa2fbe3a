"""Static scratch-buffer planning for RAM tensors."""

from .liveness import LiveRange, live_ranges, lower_bound, ranges_from_json, ranges_to_json, tensor_bytes
from .oracle import brute_force_min
from .planners import DEFAULT_TIMEOUT, MemoryMap, build_cover_matrix, check_memory_map, solve_exact, solve_first_fit

__all__ = [
    "DEFAULT_TIMEOUT",
    "LiveRange",
    "MemoryMap",
    "brute_force_min",
    "build_cover_matrix",
    "check_memory_map",
    "live_ranges",
    "lower_bound",
    "ranges_from_json",
    "ranges_to_json",
    "solve_exact",
    "solve_first_fit",
    "tensor_bytes",
]
