"""Number representations and a uniform quantize facade over them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .fixed import FixedFormat, fixed_decode, fixed_encode, fixed_scale_for
from .posit import NAR, PositFormat, posit_decode, posit_encode
from .truncfloat import TruncFloatFormat
from .zeroskew import ZeroSkewFormat, zeroskew_decode, zeroskew_encode, zeroskew_params

REPS = ("fixed", "posit", "zeroskew", "truncfloat", "float")


@dataclass(frozen=True)
class FloatFormat:
    """Double-precision reference: quantization is the identity."""

    b: int = 64

    @property
    def bits(self) -> int:
        return self.b

    def quantize(self, x: float) -> float:
        return x

    def quantize_array(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=np.float64)

    def to_json(self) -> dict:
        return {"kind": "float", "b": self.b}


Format = Union[FixedFormat, PositFormat, ZeroSkewFormat, TruncFloatFormat, FloatFormat]


class NaRError(ArithmeticError):
    """A quantized value came out as NaR / NaN."""


def quantize(r: float, fmt: Format) -> float:
    """decode(encode(r)) for any format; NaR results raise :class:`NaRError`."""
    q = fmt.quantize(r)
    if isinstance(q, float) and math.isnan(q):
        raise NaRError(f"{r!r} is not representable in {fmt}")
    return q


def format_from_json(d: dict) -> Format:
    kind = d["kind"]
    if kind == "fixed":
        return FixedFormat(d["b"], d["s"])
    if kind == "posit":
        return PositFormat(d["n"], d["es"])
    if kind == "zeroskew":
        return ZeroSkewFormat(d["b"], d["S"], d["Z"])
    if kind == "truncfloat":
        return TruncFloatFormat(d["b"])
    if kind == "float":
        return FloatFormat(d.get("b", 64))
    raise ValueError(f"unknown format kind {kind!r}")


@dataclass
class RepParams:
    """Per-tensor, per-bitwidth formats for one number representation.

    Posit and truncated-float formats depend only on the bitwidth and are
    kept in ``shared``; fixed-point scales and zero-skew parameters are
    data dependent and kept per tensor in ``tensors``.
    """

    rep: str
    shared: dict[int, Format] = field(default_factory=dict)
    tensors: dict[str, dict[int, Format]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.rep not in REPS:
            raise ValueError(f"unknown representation {self.rep!r}; expected one of {REPS}")

    def format_for(self, tensor: str, bits: int) -> Format:
        if self.rep == "float":
            return FloatFormat()
        per = self.tensors.get(tensor)
        if per is not None and bits in per:
            return per[bits]
        if bits in self.shared:
            return self.shared[bits]
        raise KeyError(f"no {self.rep} format for tensor {tensor!r} at {bits} bits")

    def to_json(self) -> dict:
        return {
            "rep": self.rep,
            "shared": {str(b): f.to_json() for b, f in sorted(self.shared.items())},
            "tensors": {
                name: {str(b): f.to_json() for b, f in sorted(per.items())}
                for name, per in sorted(self.tensors.items())
            },
        }

    @classmethod
    def from_json(cls, d: dict) -> "RepParams":
        return cls(
            rep=d["rep"],
            shared={int(b): format_from_json(f) for b, f in d.get("shared", {}).items()},
            tensors={
                name: {int(b): format_from_json(f) for b, f in per.items()}
                for name, per in d.get("tensors", {}).items()
            },
        )


__all__ = [
    "NAR",
    "REPS",
    "FixedFormat",
    "FloatFormat",
    "Format",
    "NaRError",
    "PositFormat",
    "RepParams",
    "TruncFloatFormat",
    "ZeroSkewFormat",
    "fixed_decode",
    "fixed_encode",
    "fixed_scale_for",
    "format_from_json",
    "posit_decode",
    "posit_encode",
    "quantize",
    "zeroskew_decode",
    "zeroskew_encode",
    "zeroskew_params",
]
