"""Affine unsigned quantization ``r = S * (q - Z)``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ZeroSkewFormat:
    b: int
    S: float
    Z: int

    def __post_init__(self) -> None:
        if self.b < 1:
            raise ValueError(f"bitwidth must be >= 1, got {self.b}")
        if not self.S > 0:
            raise ValueError(f"skew must be positive, got {self.S}")
        if not 0 <= self.Z <= self.qmax:
            raise ValueError(f"zero point {self.Z} outside [0, {self.qmax}]")

    @property
    def bits(self) -> int:
        return self.b

    @property
    def qmax(self) -> int:
        return (1 << self.b) - 1

    def encode(self, r: float) -> int:
        return zeroskew_encode(r, self)

    def decode(self, q: int) -> float:
        return zeroskew_decode(q, self)

    def quantize(self, r: float) -> float:
        return zeroskew_decode(zeroskew_encode(r, self), self)

    def encode_array(self, x: np.ndarray) -> np.ndarray:
        q = np.floor(np.asarray(x, dtype=np.float64) / self.S) + self.Z
        return np.clip(q, 0, self.qmax).astype(np.int64)

    def quantize_array(self, x: np.ndarray) -> np.ndarray:
        return self.S * (self.encode_array(x) - self.Z).astype(np.float64)

    def to_json(self) -> dict:
        return {"kind": "zeroskew", "b": self.b, "S": self.S, "Z": self.Z}


def zeroskew_params(lo: float, hi: float, b: int) -> ZeroSkewFormat:
    """Skew and zero point covering ``[lo, hi]`` (widened to contain 0)."""
    if lo > hi:
        raise ValueError(f"empty range [{lo}, {hi}]")
    lo, hi = min(lo, 0.0), max(hi, 0.0)
    qmax = (1 << b) - 1
    if hi == lo:
        return ZeroSkewFormat(b, 1.0, min(max(_round_half_up(-lo), 0), qmax))
    S = (hi - lo) / qmax
    Z = min(max(_round_half_up(-lo / S), 0), qmax)
    return ZeroSkewFormat(b, S, Z)


def zeroskew_encode(r: float, fmt: ZeroSkewFormat) -> int:
    if math.isnan(r):
        raise ValueError("cannot encode NaN in zero-skew")
    if math.isinf(r):
        return fmt.qmax if r > 0 else 0
    q = math.floor(r / fmt.S) + fmt.Z
    return min(max(q, 0), fmt.qmax)


def zeroskew_decode(q: int, fmt: ZeroSkewFormat) -> float:
    return fmt.S * (q - fmt.Z)


def _round_half_up(v: float) -> int:
    return math.floor(v + 0.5)
