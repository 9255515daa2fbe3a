import numpy as np
import pytest

from tinyquant.cli import DEMO_SOURCE, DEMO_WEIGHTS
from tinyquant.interp import Dataset, Executor
from tinyquant.ir import parse
from tinyquant.memplan import LiveRange
from tinyquant.synth import seed_from_env

FRAG = [
    LiveRange("A", 64, 0, 2),
    LiveRange("B", 64, 0, 4),
    LiveRange("C", 64, 0, 2),
    LiveRange("D", 64, 0, 4),
    LiveRange("E", 128, 3, 4),
]

# operands after rounding to the nearest posit, es = 2
POSIT16 = {"W1": (-2.1396484375, 1.88525390625), "X1": (1.18505859375, -2.2060546875), "B1": (0.14605712890625,)}
POSIT8 = {"W1": (-2.25, 1.875), "X1": (1.125, -2.25), "B1": (0.140625,)}
FLOAT_OUT = -2.139562 * 1.185109 + 1.885351 * -2.206466 + 0.146048


@pytest.fixture
def worked_program():
    return parse(DEMO_SOURCE)


@pytest.fixture
def worked_executor(worked_program):
    weights = {k: np.asarray(v) for k, v in DEMO_WEIGHTS.items()}
    return Executor(worked_program, weights, Dataset([None]))


@pytest.fixture
def frag():
    return list(FRAG)


@pytest.fixture
def rng():
    return np.random.default_rng(seed_from_env())


def random_ranges(rng, max_tensors=8, max_instr=12, max_size=16):
    n_instr = int(rng.integers(1, max_instr + 1))
    out = []
    for i in range(int(rng.integers(1, max_tensors + 1))):
        a, b = sorted(int(v) for v in rng.integers(0, n_instr, size=2))
        out.append(LiveRange(f"T{i}", int(rng.integers(1, max_size + 1)), a, b))
    return out
