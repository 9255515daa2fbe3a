"""Truncated binary32: the top ``b`` bits of an IEEE-754 single.

With ``b = 16`` this is bfloat16 (8 exponent bits, 7 explicit mantissa
bits). Rounding is to nearest, ties to even, performed directly from the
double so there is no double rounding through binary32.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_EMIN = -126  # smallest normal binary32 exponent
_FLT_MAX_EXP = 127


@dataclass(frozen=True)
class TruncFloatFormat:
    b: int = 16

    def __post_init__(self) -> None:
        if not 10 <= self.b <= 32:
            raise ValueError(f"truncated float width must be in [10, 32], got {self.b}")

    @property
    def bits(self) -> int:
        return self.b

    @property
    def mantissa_bits(self) -> int:
        return self.b - 9

    @property
    def max_finite(self) -> float:
        p = self.mantissa_bits
        return math.ldexp((1 << (p + 1)) - 1, _FLT_MAX_EXP - p)

    def quantize(self, x: float) -> float:
        if not math.isfinite(x) or x == 0:
            return x
        p = self.mantissa_bits
        _, e = math.frexp(x)
        exp = max(e - 1, _EMIN)
        q = math.ldexp(round(math.ldexp(x, p - exp)), exp - p)
        if abs(q) > self.max_finite:
            return math.copysign(math.inf, x)
        return q

    def encode(self, x: float) -> int:
        q = np.float32(self.quantize(x))
        return int(q.view(np.uint32)) >> (32 - self.b)

    def decode(self, code: int) -> float:
        word = np.uint32((code & ((1 << self.b) - 1)) << (32 - self.b))
        return float(word.view(np.float32))

    def quantize_array(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        p = self.mantissa_bits
        with np.errstate(all="ignore"):
            _, e = np.frexp(x)
            exp = np.maximum(e - 1, _EMIN)
            q = np.ldexp(np.rint(np.ldexp(x, p - exp)), exp - p)
            q = np.where(np.abs(q) > self.max_finite, np.copysign(np.inf, x), q)
        return np.where(np.isfinite(x) & (x != 0), q, x)

    def to_json(self) -> dict:
        return {"kind": "truncfloat", "b": self.b}
