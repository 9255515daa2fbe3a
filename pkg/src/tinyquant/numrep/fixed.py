"""Power-of-two scaled fixed point: ``r`` is stored as ``floor(r * 2**s)``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FixedFormat:
    b: int
    s: int

    def __post_init__(self) -> None:
        if self.b < 2:
            raise ValueError(f"fixed-point bitwidth must be >= 2, got {self.b}")

    @property
    def bits(self) -> int:
        return self.b

    @property
    def qmin(self) -> int:
        return -(1 << (self.b - 1))

    @property
    def qmax(self) -> int:
        return (1 << (self.b - 1)) - 1

    def encode(self, r: float) -> int:
        return fixed_encode(r, self)

    def decode(self, q: int) -> float:
        return fixed_decode(q, self)

    def quantize(self, r: float) -> float:
        return fixed_decode(fixed_encode(r, self), self)

    def encode_array(self, x: np.ndarray) -> np.ndarray:
        y = np.floor(np.ldexp(np.asarray(x, dtype=np.float64), self.s))
        return np.clip(y, self.qmin, self.qmax).astype(np.int64)

    def quantize_array(self, x: np.ndarray) -> np.ndarray:
        return np.ldexp(self.encode_array(x).astype(np.float64), -self.s)

    def to_json(self) -> dict:
        return {"kind": "fixed", "b": self.b, "s": self.s}


def fixed_scale_for(maxabs: float, b: int) -> int:
    """Largest scale at which ``maxabs`` still fits a signed ``b``-bit word."""
    if b < 2:
        raise ValueError(f"bitwidth must be >= 2, got {b}")
    if maxabs < 0:
        raise ValueError("maxabs must be nonnegative")
    if maxabs == 0:
        return b - 2
    _, e = math.frexp(maxabs)  # maxabs in [2**(e-1), 2**e)
    return (b - 2) - (e - 1)


def fixed_encode(r: float, fmt: FixedFormat) -> int:
    if math.isnan(r):
        raise ValueError("cannot encode NaN in fixed point")
    if math.isinf(r):
        return fmt.qmax if r > 0 else fmt.qmin
    q = math.floor(math.ldexp(r, fmt.s))
    return min(max(q, fmt.qmin), fmt.qmax)


def fixed_decode(q: int, fmt: FixedFormat) -> float:
    return math.ldexp(q, -fmt.s)
