import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from dioph.cli import main

GOLDEN = Path(__file__).parent / "golden"


def run(*argv) -> int:
    return main([str(a) for a in argv])


@pytest.fixture
def wd(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def test_minpoints_first_indices(wd):
    assert run("minpoints", "--xi", "sqrt(2)", "--eta", "sqrt(3)", "--max-x0", 1000, "--out", "p.jsonl") == 0
    lines = (wd / "p.jsonl").read_text().splitlines()
    assert [json.loads(l)["x"][0] for l in lines[1:4]] == [1, 3, 7]
    man = json.loads((wd / "p.jsonl.manifest.json").read_text())
    assert man["command"] == "minpoints" and "timestamp" in man and man["seed"] == 0


def test_minpoints_empty(wd):
    assert run("minpoints", "--xi", "sqrt(2)", "--eta", "sqrt(3)", "--max-x0", 0, "--out", "e.jsonl") == 0
    assert len((wd / "e.jsonl").read_text().splitlines()) == 1


def test_minpoints_exit_codes(wd):
    assert run("minpoints", "--xi", "1/2", "--eta", "sqrt(3)", "--max-x0", 10, "--out", "d.jsonl") == 4
    assert run("minpoints", "--xi", "bogus", "--eta", "sqrt(3)", "--max-x0", 10, "--out", "d.jsonl") == 2
    assert run("minpoints", "--xi", "sqrt(2)", "--eta", "sqrt(3)", "--max-x0", -1, "--out", "d.jsonl") == 2
    assert run("minpoints", "--xi", "sqrt(2)") == 2


def test_exponents_report(wd, capsys):
    run("minpoints", "--xi", "sqrt(2)", "--eta", "sqrt(3)", "--max-x0", 10**6, "--out", "p.jsonl")
    capsys.readouterr()
    assert run("exponents", "--points", "p.jsonl", "--report", "r.txt") == 0
    out = capsys.readouterr().out
    rows = [l.split("\t")[0] for l in out.splitlines()]
    assert rows[1:5] == ["lambda", "lambda_hat", "lambda_under", "grid_depth"]
    assert (wd / "r.txt").read_text() == out


def test_exponents_single_eps(wd, capsys):
    run("minpoints", "--xi", "sqrt(2)", "--eta", "sqrt(3)", "--max-x0", 10**6, "--out", "p.jsonl")
    capsys.readouterr()
    assert run("exponents", "--points", "p.jsonl", "--eps-grid", 1) == 0
    lines = capsys.readouterr().out.splitlines()
    under = lines[3].split("\t")
    eps_row = lines[-1].split("\t")
    assert lines[4] == "grid_depth\t1" and under[1] == eps_row[1]


def test_exponents_guards(wd):
    run("minpoints", "--xi", "sqrt(2)", "--eta", "sqrt(3)", "--max-x0", 10, "--out", "p.jsonl")
    lines = (wd / "p.jsonl").read_text().splitlines()
    (wd / "three.jsonl").write_text("\n".join(lines[:4]) + "\n")
    assert run("exponents", "--points", "three.jsonl") == 5
    (wd / "bad.jsonl").write_text("not json\n")
    assert run("exponents", "--points", "bad.jsonl") == 2
    assert run("exponents", "--points", "missing.jsonl") == 2


def test_construct_case1_manifest(wd, capsys):
    assert run("construct", "--lambda", "1", "--lambda-under", "1/2", "--peaks", 20, "--out", "s.json") == 0
    out = capsys.readouterr().out
    assert "case 1" in out and "nu = 2/3" in out
    doc = json.loads((wd / "s.json").read_text())
    assert doc["manifest"]["nu"] == "2/3" and doc["manifest"]["case"] == 1


def test_construct_spectrum_violation(wd, capsys):
    assert run("construct", "--lambda", "1", "--lambda-under", "9/10", "--out", "x.json") == 2
    assert "lambda_under^2/(1 - lambda_under) <= lambda" in capsys.readouterr().err
    assert not (wd / "x.json").exists()


def test_construct_balanced(wd, capsys):
    assert run("construct", "--lambda", "1/2", "--lambda-under", "1/2", "--out", "b.json") == 0
    assert "case balanced" in capsys.readouterr().out
    assert run("kappa", "--system", "b.json") == 0
    assert "kappa = 1/3 (exact" in capsys.readouterr().out


def test_kappa_alpha(wd, capsys):
    run("construct", "--lambda", "1", "--lambda-under", "1/2", "--peaks", 20, "--out", "s.json")
    capsys.readouterr()
    assert run("kappa", "--system", "s.json", "--alpha", "9/20") == 0
    assert "kappa_alpha(9/20) = 1/3" in capsys.readouterr().out
    assert run("kappa", "--system", "s.json", "--alpha", "3/5") == 5
    assert "AlphaTooLarge" in capsys.readouterr().err


def test_kappa_invalid_system(wd):
    (wd / "bad.json").write_text('{"format": "dioph-3system/1", "q0": "0", "horizon": "1", "components": []}')
    assert run("kappa", "--system", "bad.json") == 2


def test_kappa_too_few_changes(wd):
    doc = {
        "format": "dioph-3system/1", "q0": "0", "horizon": "1",
        "components": [{"vertices": [["0", "0"], ["1", "0"]], "final_slope": 0},
                       {"vertices": [["0", "0"], ["1", "0"]], "final_slope": 0},
                       {"vertices": [["0", "0"], ["1", "1"]], "final_slope": 1}],
    }
    (wd / "ray.json").write_text(json.dumps(doc))
    assert run("kappa", "--system", "ray.json") == 5


@pytest.mark.parametrize("args, golden", [
    (("--lambda", "1", "--lambda-under", "1/2"), "case1_1_half.svg"),
    (("--lambda", "1", "--lambda-under", "1/3", "--case", "2"), "case2_1_third.svg"),
])
def test_render_golden(wd, args, golden):
    run("construct", *args, "--peaks", 20, "--out", "s.json")
    assert run("render", "--system", "s.json", "--svg", "s.svg") == 0
    assert (wd / "s.svg").read_bytes() == (GOLDEN / golden).read_bytes()


def test_render_guards(wd):
    run("construct", "--lambda", "1", "--lambda-under", "1/2", "--peaks", 5, "--out", "s.json")
    assert run("render", "--system", "s.json", "--svg", "s.svg", "--width", 0) == 2
    assert run("render", "--system", "nope.json", "--svg", "s.svg") == 2
    assert run("render", "--system", "s.json", "--svg", "s.svg", "--q-range", "8-32") == 2
    assert run("render", "--system", "s.json", "--svg", "w.svg", "--q-range", "8:32") == 0


def test_parametric(wd, capsys):
    assert run("parametric", "--xi", "sqrt(2)", "--eta", "sqrt(3)", "--q-max", 20, "--step", 0.5,
               "--max-x0", 100000, "--out", "q.csv") == 0
    assert len((wd / "q.csv").read_text().splitlines()) == 38
    assert "duality gap non-trending" in capsys.readouterr().out


def test_parametric_cap(wd):
    assert run("parametric", "--xi", "sqrt(2)", "--eta", "sqrt(3)", "--q-max", 50, "--out", "q.csv") == 6


def test_parametric_needs_norm_points(wd):
    run("minpoints", "--xi", "sqrt(2)", "--eta", "sqrt(3)", "--max-x0", 100, "--out", "p.jsonl")
    assert run("parametric", "--xi", "sqrt(2)", "--eta", "sqrt(3)", "--q-max", 4,
               "--points", "p.jsonl", "--out", "q.csv") == 2


def test_config_defaults_and_override(wd):
    (wd / "cfg.json").write_text(json.dumps({"xi": "sqrt(2)", "eta": "sqrt(3)", "max_x0": 10, "out": "a.jsonl"}))
    assert run("minpoints", "--config", "cfg.json") == 0
    assert (wd / "a.jsonl").exists()
    assert run("minpoints", "--config", "cfg.json", "--out", "b.jsonl") == 0
    assert (wd / "b.jsonl").read_text() == (wd / "a.jsonl").read_text()
    (wd / "bad.json").write_text("[1, 2]")
    assert run("minpoints", "--config", "bad.json") == 2


def test_console_script(wd):
    exe = shutil.which("dioph")
    cmd = [exe] if exe else [sys.executable, "-m", "dioph.cli"]
    r = subprocess.run(cmd + ["construct", "--lambda", "1", "--lambda-under", "9/10", "--out", "x.json"],
                       capture_output=True, text=True)
    assert r.returncode == 2
