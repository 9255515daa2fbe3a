import json
import math
import subprocess
import sys

import numpy as np
import pytest

from tinyquant.cli import DEMO_SOURCE, DEMO_WEIGHTS, main
from tinyquant.synth import random_program

from .conftest import FRAG


@pytest.fixture
def worked_files(tmp_path):
    (tmp_path / "model.dsl").write_text(DEMO_SOURCE)
    (tmp_path / "weights.json").write_text(json.dumps(DEMO_WEIGHTS))
    (tmp_path / "data.json").write_text(json.dumps({"inputs": [None]}))
    return tmp_path


@pytest.fixture
def synth_files(tmp_path):
    c = random_program(np.random.default_rng(21), 10, classifier=True, n_samples=25)
    (tmp_path / "model.dsl").write_text(c.source)
    (tmp_path / "weights.json").write_text(json.dumps({k: v.tolist() for k, v in c.weights.items()}))
    (tmp_path / "data.json").write_text(json.dumps(c.dataset.to_json()))
    return tmp_path


def args_for(d, *extra):
    return ["--model", str(d / "model.dsl"), "--weights", str(d / "weights.json"), "--data", str(d / "data.json"),
            *extra]


def test_compile_worked_example(worked_files, capsys):
    d = worked_files
    out = d / "out"
    code = main(["compile", *args_for(d, "--rep", "posit", "--es-low", "2", "--es-high", "2", "--mem-limit", "3",
                                      "--out", str(out))])
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["rho"] == {"W1": 16, "X1": 16, "B1": 16, "t1": 16, "t2": 8}
    assert report["ram"]["exact_bytes"] == 3
    assert report["ram"]["exact_bytes"] <= report["ram"]["first_fit_bytes"]
    assert report["budget"]["satisfied"]
    ledger = [json.loads(line) for line in (out / "ledger.jsonl").read_text().splitlines()]
    assert {round(-e["metric"], 5) for e in ledger} == {0.45047, 0.19601, 0.04953}
    assert json.loads((out / "memory_map.json").read_text()) == {"peak_bytes": 3, "offsets": {"t1": 0, "t2": 2}}
    assert not (out / "model.c").exists()  # posit: no C output
    assert "timings" not in report and json.loads((out / "timings.json").read_text())


def test_compile_fixed_emits_c_and_is_reproducible(synth_files):
    d = synth_files
    outs = []
    for name in ("a", "b"):
        out = d / name
        assert main(["compile", *args_for(d, "--rep", "fixed", "--mem-limit", "60", "--out", str(out))]) == 0
        outs.append(out)
    for f in ("report.json", "ledger.jsonl", "memory_map.json", "memory_map.txt", "model.c"):
        assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes(), f


def test_soft_limit_loosens_budget(synth_files):
    d = synth_files
    out = d / "soft"
    assert main(["explore", *args_for(d, "--mem-limit", "40", "--soft-limit", "1.1", "--out", str(out))]) == 0
    ledger = [json.loads(line) for line in (out / "ledger.jsonl").read_text().splitlines()]
    assert all(e["planned_ram_bytes"] <= 44 for e in ledger)
    report = json.loads((out / "report.json").read_text())
    assert report["budget"]["budget_bytes"] == pytest.approx(44)


def test_zero_budget_exits_nonzero(worked_files, capsys):
    d = worked_files
    code = main(["compile", *args_for(d, "--mem-limit", "0", "--out", str(d / "z"))])
    assert code == 1
    report = json.loads((d / "z" / "report.json").read_text())
    assert set(report["rho"].values()) == {8}
    assert not report["budget"]["all_low_feasible"]


def test_phase_errors(tmp_path, worked_files, capsys):
    assert main(["compile", "--model", str(tmp_path / "nope"), "--weights", "w", "--data", "d"]) == 2
    assert "[load]" in capsys.readouterr().err
    bad = worked_files / "bad.dsl"
    bad.write_text("return Q\n")
    code = main(["compile", "--model", str(bad), "--weights", str(worked_files / "weights.json"),
                 "--data", str(worked_files / "data.json")])
    assert code == 2 and "Q" in capsys.readouterr().err


def test_plan_frag(tmp_path, capsys):
    trace = tmp_path / "trace.json"
    trace.write_text(json.dumps({"tensors": [r.to_json() for r in FRAG]}))
    assert main(["plan", "--trace", str(trace), "--out", str(tmp_path / "p")]) == 0
    report = json.loads((tmp_path / "p" / "report.json").read_text())
    assert report["exact_bytes"] == 256 and report["first_fit_bytes"] == 384
    assert "exact 256 B, first-fit 384 B" in capsys.readouterr().out


def test_plan_empty(tmp_path):
    trace = tmp_path / "trace.json"
    trace.write_text(json.dumps({"tensors": []}))
    assert main(["plan", "--trace", str(trace), "--out", str(tmp_path / "p")]) == 0
    assert json.loads((tmp_path / "p" / "memory_map.json").read_text()) == {"peak_bytes": 0, "offsets": {}}


def test_eval(synth_files, capsys):
    assert main(["eval", *args_for(synth_files, "--rep", "posit", "--bits", "16")]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["metric_kind"] == "agreement with float reference"
    assert 0 <= doc["metric"] <= 1


def test_demo_tables(capsys):
    assert main(["demo"]) == 0
    out = capsys.readouterr().out
    for line in ("W1      0.00513", "B1      0.00543", "t1      0.30469", "t2      0.45117"):
        assert line in out
    assert "promotion order: t2, t1, X1, B1, W1" in out
    assert "0.45047" in out and "0.19601" in out and "0.04953" in out
    assert '"t2": 8' in out


def test_demo_variants(capsys):
    assert main(["demo", "--mem-limit", "4"]) == 0
    assert '"t1": 16, "t2": 16' in capsys.readouterr().out
    assert main(["demo", "--rep", "fixed"]) == 0
    assert "promotion order" in capsys.readouterr().out


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "tinyquant", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.startswith("tinyquant")
