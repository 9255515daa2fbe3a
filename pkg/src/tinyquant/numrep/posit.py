"""Posit codec.

Codes are plain Python ints holding the ``n``-bit pattern (unsigned view).
Zero is the all-zero pattern and NaR (not-a-real) is ``1`` followed by
``n - 1`` zeros. Negative codes are the two's complement of the positive
code with the same magnitude. NaR decodes to ``nan``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

NAR = float("nan")


@dataclass(frozen=True)
class PositFormat:
    n: int
    es: int

    def __post_init__(self) -> None:
        if not 2 <= self.n <= 32:
            raise ValueError(f"posit width must be in [2, 32], got {self.n}")
        if not 0 <= self.es <= 4:
            raise ValueError(f"posit es must be in [0, 4], got {self.es}")

    @property
    def bits(self) -> int:
        return self.n

    @property
    def useed(self) -> int:
        return 1 << (1 << self.es)

    @property
    def nar_code(self) -> int:
        return 1 << (self.n - 1)

    @property
    def maxpos_code(self) -> int:
        return (1 << (self.n - 1)) - 1

    @property
    def maxpos(self) -> float:
        return posit_decode(self.maxpos_code, self)

    @property
    def minpos(self) -> float:
        return posit_decode(1, self)

    def encode(self, x: float) -> int:
        return posit_encode(x, self)

    def decode(self, code: int) -> float:
        return posit_decode(code, self)

    def quantize(self, x: float) -> float:
        return posit_decode(posit_encode(x, self), self)

    def quantize_array(self, x: np.ndarray) -> np.ndarray:
        from .._kernels import backend

        flat = np.ascontiguousarray(x, dtype=np.float64).ravel()
        codes = backend.posit_encode_array(flat, self.n, self.es)
        return backend.posit_decode_array(codes, self.n, self.es).reshape(np.shape(x))

    def to_json(self) -> dict:
        return {"kind": "posit", "n": self.n, "es": self.es}


def posit_decode(code: int, fmt: PositFormat) -> float:
    n, es = fmt.n, fmt.es
    mask = (1 << n) - 1
    code &= mask
    if code == 0:
        return 0.0
    sign_bit = 1 << (n - 1)
    if code == sign_bit:
        return NAR
    negative = bool(code & sign_bit)
    if negative:
        code = (-code) & mask

    rest = n - 1  # bits after the sign
    first = (code >> (rest - 1)) & 1
    i = rest - 1
    run = 0
    while i >= 0 and ((code >> i) & 1) == first:
        run += 1
        i -= 1
    k = run - 1 if first else -run
    remaining = max(i, 0)  # bits strictly below the terminator

    ebits = min(es, remaining)
    exp = (code >> (remaining - ebits)) & ((1 << ebits) - 1)
    exp <<= es - ebits
    fbits = remaining - ebits
    frac = code & ((1 << fbits) - 1)

    value = math.ldexp((1 << fbits) + frac, (k << es) + exp - fbits)
    return -value if negative else value


def posit_encode(x: float, fmt: PositFormat) -> int:
    """Nearest posit to ``x``; ties go to the even code.

    Magnitudes outside [minpos, maxpos] saturate instead of rounding to
    zero or NaR. Non-finite input encodes to NaR.
    """
    n, es = fmt.n, fmt.es
    if not math.isfinite(x):
        return 1 << (n - 1)
    if x == 0:
        return 0
    mag = abs(x)
    maxpos_code = (1 << (n - 1)) - 1
    if mag >= posit_decode(maxpos_code, fmt):
        code = maxpos_code
    elif mag <= posit_decode(1, fmt):
        code = 1
    else:
        code = _floor_code(mag, n, es)
        lo = posit_decode(code, fmt)
        if mag != lo:
            hi = posit_decode(code + 1, fmt)
            # lo, hi and mag are dyadic with few significant bits: exact
            twice, mid = 2.0 * mag, lo + hi
            if twice > mid or (twice == mid and code & 1):
                code += 1
    if x < 0:
        code = (-code) & ((1 << n) - 1)
    return code


def _floor_code(mag: float, n: int, es: int) -> int:
    # Truncating the infinite-precision bit string gives the largest code
    # whose value does not exceed mag.
    m, e = math.frexp(mag)
    scale = e - 1
    k = scale >> es
    exp = scale - (k << es)
    frac = int(math.ldexp(m, 53)) - (1 << 52)
    if k >= 0:
        regime, rlen = ((1 << (k + 1)) - 1) << 1, k + 2
    else:
        regime, rlen = 1, 1 - k
    body = (((regime << es) | exp) << 52) | frac
    blen = rlen + es + 52
    width = n - 1
    if blen > width:
        return body >> (blen - width)
    return body << (width - blen)
