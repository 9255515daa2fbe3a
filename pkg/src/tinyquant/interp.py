"""Reference executor for tensor programs under a bitwidth assignment.

Every operator computes in double precision on decoded operands and the
result is re-quantized into its destination's format (decode, compute,
encode). Fixed point can instead run the integer pipeline that the emitted
C code uses (``fixed_mode="integer"``); the two agree on scales but not on
rounding of intermediate results.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .ir import Program
from .numrep import FixedFormat, RepParams, fixed_scale_for

log = logging.getLogger(__name__)

FIXED_MODES = ("qcq", "integer")
SMUL_CONST_BITS = 16


@dataclass
class Dataset:
    inputs: list[Optional[np.ndarray]]
    labels: Optional[list[int]] = None

    def __post_init__(self) -> None:
        if self.labels is not None and len(self.labels) != len(self.inputs):
            raise ValueError(f"{len(self.labels)} labels for {len(self.inputs)} inputs")

    def __len__(self) -> int:
        return len(self.inputs)

    @classmethod
    def from_json(cls, doc: dict) -> "Dataset":
        inputs = [None if x is None else np.asarray(x, dtype=np.float64) for x in doc["inputs"]]
        labels = doc.get("labels")
        return cls(inputs, None if labels is None else [int(v) for v in labels])

    def to_json(self) -> dict:
        doc = {"inputs": [None if x is None else x.tolist() for x in self.inputs]}
        if self.labels is not None:
            doc["labels"] = list(self.labels)
        return doc


def load_dataset(path) -> Dataset:
    with open(path, encoding="utf-8") as fh:
        return Dataset.from_json(json.load(fh))


def load_weights(path) -> dict[str, np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        return {k: np.asarray(v, dtype=np.float64) for k, v in json.load(fh).items()}


@dataclass
class RunResult:
    outputs: list[np.ndarray]
    valid: list[bool]
    classifier: bool
    value_map: Optional[dict[str, np.ndarray]] = None
    raw_outputs: Optional[list[np.ndarray]] = None  # integer words (fixed integer mode)
    metric: Optional[float] = None

    @property
    def labels(self) -> list[int]:
        return [int(o.ravel()[0]) if self.classifier else int(np.argmax(o)) for o in self.outputs]


def disagreement(res: RunResult, ref: RunResult) -> float:
    """Differing labels for classifiers, mean absolute output error otherwise.

    Invalid samples count as disagreements (classifiers) or infinite error.
    """
    if len(res.outputs) != len(ref.outputs):
        raise ValueError(f"result has {len(res.outputs)} samples, reference has {len(ref.outputs)}")
    if not res.outputs:
        return 0.0
    if res.classifier:
        return float(
            sum(1 for a, b, ok in zip(res.labels, ref.labels, res.valid) if not ok or a != b)
        )
    if not all(res.valid):
        return math.inf
    errs = np.concatenate([np.abs(a.ravel() - b.ravel()) for a, b in zip(res.outputs, ref.outputs)])
    return float(errs.mean())


def score(res: RunResult, dataset: Dataset, ref: RunResult) -> float:
    """Higher is better: label accuracy when labels exist, else agreement with ``ref``.

    Unlabeled classifiers score the fraction of samples agreeing with the
    reference; unlabeled regressors score the negated mean absolute error.
    """
    n = len(dataset)
    if n == 0:
        raise ValueError("empty dataset")
    if dataset.labels is not None:
        predicted = res.labels
        return sum(1 for p, y, ok in zip(predicted, dataset.labels, res.valid) if ok and p == y) / n
    d = disagreement(res, ref)
    return 1.0 - d / n if res.classifier else -d


def _apply(op: str, args: Sequence[np.ndarray], const, shape) -> np.ndarray:
    if op == "matmul":
        return args[0] @ args[1]
    if op == "add":
        return args[0] + args[1]
    if op == "sub":
        return args[0] - args[1]
    if op == "hadamard":
        return args[0] * args[1]
    if op == "smul":
        return const * args[0]
    if op == "sigmoid":
        return _map(lambda v: 1.0 / (1.0 + _exp(-v)), args[0])
    if op == "tanh":
        return _map(math.tanh, args[0])
    if op == "exp":
        return _map(_exp, args[0])
    if op == "relu":
        return np.maximum(args[0], 0.0)
    if op == "argmax":
        return np.array([float(np.argmax(args[0]))])
    if op == "reshape":
        return args[0].reshape(shape)
    raise ValueError(f"unknown operator {op!r}")


def _exp(v: float) -> float:
    try:
        return math.exp(v)
    except OverflowError:
        return math.inf


def _map(fn, a: np.ndarray) -> np.ndarray:
    # libm scalar calls, so results match the emitted C bit for bit
    return np.array([fn(float(v)) for v in a.ravel()], dtype=np.float64).reshape(a.shape)


class Executor:
    """Runs one program over one dataset; counts full-dataset executions."""

    def __init__(self, program: Program, weights: Mapping[str, np.ndarray], dataset: Dataset):
        self.program = program
        self.dataset = dataset
        self.weights = {}
        for p in program.params:
            if p.key not in weights:
                raise KeyError(f"weights file has no entry {p.key!r} for param {p.name}")
            w = np.asarray(weights[p.key], dtype=np.float64)
            if w.size != math.prod(p.shape):
                raise ValueError(f"param {p.name}: expected {p.shape}, weights have shape {w.shape}")
            self.weights[p.name] = w.reshape(p.shape)
        if program.input is not None:
            for i, x in enumerate(dataset.inputs):
                if x is None or x.size != math.prod(program.input.shape):
                    raise ValueError(f"sample {i}: input does not match shape {program.input.shape}")
        self.execution_calls = 0
        self._reference: Optional[RunResult] = None

    @property
    def reference(self) -> RunResult:
        """Double-precision run, computed once."""
        if self._reference is None:
            self._reference = self.run(RepParams("float"), {}, count=False)
        return self._reference

    def score(self, res: RunResult) -> float:
        return score(res, self.dataset, self.reference)

    def profile(self) -> dict[str, tuple[float, float]]:
        """Per-tensor (min, max) over the double-precision run."""
        vm = self.run(RepParams("float"), {}, log_values=True, count=False).value_map
        return {t: (float(v.min()), float(v.max())) if v.size else (0.0, 0.0) for t, v in vm.items()}

    def run(
        self,
        params: RepParams,
        rho: Mapping[str, int],
        log_values: bool = False,
        fixed_mode: str = "qcq",
        count: bool = True,
    ) -> RunResult:
        if fixed_mode not in FIXED_MODES:
            raise ValueError(f"fixed_mode must be one of {FIXED_MODES}")
        if count:
            self.execution_calls += 1
        if params.rep == "fixed" and fixed_mode == "integer":
            return self._run_integer(params, rho, log_values)
        prog = self.program
        quant = params.rep != "float"

        def q(name: str, v: np.ndarray) -> np.ndarray:
            return params.format_for(name, rho[name]).quantize_array(v) if quant else v

        labels = {b.name for b in prog.body if b.op == "argmax"}
        flash = {name: q(name, w) for name, w in self.weights.items()}
        logs: dict[str, list[np.ndarray]] = {t: [] for t in prog.tensor_names}
        outputs, valid = [], []
        for x in self.dataset.inputs:
            env = dict(flash)
            if prog.input is not None:
                env[prog.input.name] = q(prog.input.name, x.reshape(prog.input.shape))
            ok = True
            for b in prog.body:
                with np.errstate(all="ignore"):
                    v = _apply(b.op, [env[s] for s in b.srcs], b.const, b.shape)
                env[b.name] = v if b.name in labels else q(b.name, v)
            if any(np.isnan(env[t]).any() for t in env):
                ok = False
            if log_values:
                for t in prog.tensor_names:
                    logs[t].append(env[t].ravel())
            outputs.append(env[prog.output].copy())
            valid.append(ok)
        value_map = {t: np.concatenate(v) if v else np.zeros(0) for t, v in logs.items()} if log_values else None
        return RunResult(outputs, valid, prog.is_classifier, value_map)

    # integer fixed-point pipeline, mirrored by codegen's emitted C
    def _run_integer(self, params: RepParams, rho: Mapping[str, int], log_values: bool) -> RunResult:
        prog = self.program
        fmt = {t: params.format_for(t, rho[t]) for t in prog.tensor_names}
        flash = {name: fmt[name].encode_array(w) for name, w in self.weights.items()}
        logs: dict[str, list[np.ndarray]] = {t: [] for t in prog.tensor_names}
        outputs, raw, valid = [], [], []
        for x in self.dataset.inputs:
            env = dict(flash)
            if prog.input is not None:
                env[prog.input.name] = fmt[prog.input.name].encode_array(x.reshape(prog.input.shape))
            for b in prog.body:
                env[b.name] = integer_op(b, [env[s] for s in b.srcs], [fmt[s] for s in b.srcs], fmt[b.name])
            if log_values:
                for t in prog.tensor_names:
                    logs[t].append(np.ldexp(env[t].astype(np.float64), -fmt[t].s).ravel())
            out = env[prog.output]
            raw.append(out.copy())
            outputs.append(np.ldexp(out.astype(np.float64), -fmt[prog.output].s))
            valid.append(True)
        value_map = {t: np.concatenate(v) if v else np.zeros(0) for t, v in logs.items()} if log_values else None
        return RunResult(outputs, valid, prog.is_classifier, value_map, raw_outputs=raw)


def shift_right(v: np.ndarray, sh: int) -> np.ndarray:
    """Arithmetic shift by ``sh`` (left when negative); right shifts cap at 63."""
    return v >> min(sh, 63) if sh >= 0 else v * (1 << -sh)


def smul_format(c: float) -> FixedFormat:
    return FixedFormat(SMUL_CONST_BITS, fixed_scale_for(abs(c), SMUL_CONST_BITS))


def integer_op(b, args: list[np.ndarray], fmts: list[FixedFormat], dst: FixedFormat) -> np.ndarray:
    """One binding on int64 words: widen, shift to the destination scale, saturate."""
    op = b.op
    if op == "argmax":
        return np.array([min(int(np.argmax(args[0])), dst.qmax)], dtype=np.int64)
    if op in ("matmul", "hadamard"):
        prod = args[0] @ args[1] if op == "matmul" else args[0] * args[1]
        acc = shift_right(prod, fmts[0].s + fmts[1].s - dst.s)
    elif op in ("add", "sub"):
        common = min(fmts[0].s, fmts[1].s)
        a = shift_right(args[0], fmts[0].s - common)
        c = shift_right(args[1], fmts[1].s - common)
        acc = shift_right(a + c if op == "add" else a - c, common - dst.s)
    elif op == "smul":
        cf = smul_format(b.const)
        acc = shift_right(args[0] * cf.encode(b.const), fmts[0].s + cf.s - dst.s)
    elif op == "relu":
        acc = shift_right(np.maximum(args[0], 0), fmts[0].s - dst.s)
    elif op == "reshape":
        acc = shift_right(args[0], fmts[0].s - dst.s).reshape(b.shape)
    elif op in ("sigmoid", "tanh", "exp"):
        real = np.ldexp(args[0].astype(np.float64), -fmts[0].s)
        y = _apply(op, [real], None, None)
        with np.errstate(all="ignore"):
            scaled = np.floor(np.ldexp(y, dst.s))
        return np.clip(np.nan_to_num(scaled, nan=0.0, posinf=dst.qmax, neginf=dst.qmin), dst.qmin, dst.qmax).astype(
            np.int64
        )
    else:
        raise ValueError(f"unknown operator {op!r}")
    return np.clip(acc, dst.qmin, dst.qmax).astype(np.int64)
