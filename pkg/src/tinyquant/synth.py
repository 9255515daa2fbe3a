"""Random tensor programs with weights and datasets, for property tests and benchmarks.

Seeds come from the caller or from ``TINYQUANT_SEED`` (default 0).
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .interp import Dataset
from .ir import Program, parse

ACTIVATIONS = ("relu", "tanh", "sigmoid")


def seed_from_env(default: int = 0) -> int:
    return int(os.environ.get("TINYQUANT_SEED", default))


@dataclass
class SynthCase:
    source: str
    program: Program
    weights: dict[str, np.ndarray]
    dataset: Dataset


def random_program(
    rng: np.random.Generator,
    n_tensors: int,
    classifier: Optional[bool] = None,
    n_samples: int = 16,
    max_dim: int = 8,
) -> SynthCase:
    """A straight-line program with exactly ``n_tensors`` tensors (params, input and bindings)."""
    if n_tensors < 3:
        raise ValueError("need at least 3 tensors")
    if classifier is None:
        classifier = bool(rng.integers(2))
    d_in = int(rng.integers(2, max_dim + 1))
    lines = [f"input X : R[{d_in}][1]"]
    weights: dict[str, np.ndarray] = {}
    shapes = {"X": (d_in, 1)}
    cur = "X"
    n = 1
    counter = {"W": 0, "t": 0}

    def fresh(prefix: str) -> str:
        counter[prefix] += 1
        return f"{prefix}{counter[prefix]}"

    def param(shape: tuple[int, int], scale: float) -> str:
        name = fresh("W")
        weights[name] = rng.normal(0.0, scale, size=shape)
        lines.insert(0, f"param {name} : R[{shape[0]}][{shape[1]}] = {name}")
        shapes[name] = shape
        return name

    def bind(expr: str, shape: tuple[int, int]) -> str:
        name = fresh("t")
        lines.append(f"let {name} = {expr}")
        shapes[name] = shape
        return name

    target = n_tensors - (1 if classifier else 0)
    while n < target:
        left = target - n
        rows = shapes[cur][0]
        same = [t for t in shapes if t != cur and shapes[t] == shapes[cur] and t.startswith("t")]
        options = ["act", "smul"] + (["mix"] if same else [])
        if left >= 2:
            options += ["dense", "dense", "bias", "gate"]
        kind = options[int(rng.integers(len(options)))]
        if kind == "dense":
            h = int(rng.integers(2, max_dim + 1))
            w = param((h, rows), 1.0 / np.sqrt(rows))
            cur = bind(f"{w} * {cur}", (h, 1))
            n += 2
        elif kind == "bias":
            b = param((rows, 1), 0.5)
            cur = bind(f"{cur} + {b}", (rows, 1))
            n += 2
        elif kind == "gate":
            g = param((rows, 1), 1.0)
            cur = bind(f"{cur} <*> {g}", (rows, 1))
            n += 2
        elif kind == "act":
            fn = ACTIVATIONS[int(rng.integers(len(ACTIVATIONS)))]
            cur = bind(f"{fn}({cur})", (rows, 1))
            n += 1
        elif kind == "smul":
            c = float(rng.choice([0.25, 0.5, 0.75, 1.5, 2.0]))
            cur = bind(f"{c} * {cur}", (rows, 1))
            n += 1
        else:
            other = same[int(rng.integers(len(same)))]
            op = "+" if rng.integers(2) else "-"
            cur = bind(f"{cur} {op} {other}", (rows, 1))
            n += 1
    if classifier:
        cur = bind(f"argmax({cur})", (1, 1))
    lines.append(f"return {cur}")
    source = "\n".join(lines) + "\n"
    program = parse(source)
    inputs = [rng.normal(0.0, 1.0, size=(d_in, 1)) for _ in range(n_samples)]
    return SynthCase(source, program, weights, Dataset(inputs))


def random_cases(count: int, lo: int = 5, hi: int = 20, seed: Optional[int] = None, **kw) -> list[SynthCase]:
    rng = np.random.default_rng(seed_from_env() if seed is None else seed)
    return [random_program(rng, int(rng.integers(lo, hi + 1)), **kw) for _ in range(count)]
