import json
import os
import subprocess
import sys

import numpy as np
import pytest

from detwalk import analysis, cli
from detwalk.chain import TransitionMatrix


def run_cli(*argv):
    return cli.main([str(a) for a in argv])


def test_run_srt_knapsack_psi_below_two(tmp_path):
    assert run_cli("run", "--gen", "knapsack:a=1,1;b=1", "--router", "srt", "--M", 100,
                   "--T", 1000, "--out", tmp_path) == 0
    s = json.loads((tmp_path / "summary.json").read_text())
    assert s["psi_measured"] < 2 and s["T"] == 1000 and s["M"] == 100
    assert (tmp_path / "trace.csv").read_text().count("\n") == 1 + 1001 * 3


def test_run_single_token_rotor(tmp_path):
    TransitionMatrix([[0.75, 0.25], [0.25, 0.75]]).save(tmp_path / "two_state.json")
    out = tmp_path / "o"
    assert run_cli("run", "--chain", tmp_path / "two_state.json", "--router", "rotor",
                   "--M", 1, "--T", 10, "--out", out) == 0
    rows = [r.split(",") for r in (out / "trace.csv").read_text().splitlines()[1:]]
    chi = np.array([int(r[2]) for r in rows]).reshape(11, 2)
    assert np.all(chi.sum(axis=1) == 1)


def test_run_telescoping_residual_in_summary(tmp_path):
    assert run_cli("run", "--gen", "random:n=5;degree=2;seed=4", "--router", "vdc", "--M", 80,
                   "--T", 40, "--verify-lemma1", "--verify-bounds", "--out", tmp_path) == 0
    s = json.loads((tmp_path / "summary.json").read_text())
    assert s["lemma1_residual"] <= 1e-8 and s["bound_satisfied"]


def test_run_invalid_chain_exit_1(tmp_path, capsys):
    TransitionMatrix([[0, 1], [1, 0]]).save(tmp_path / "flip.json")
    assert run_cli("run", "--chain", tmp_path / "flip.json", "--router", "srt",
                   "--out", tmp_path / "o") == 1
    assert "aperiodic" in capsys.readouterr().err


def test_run_bad_row_sum_exit_1(tmp_path, capsys):
    (tmp_path / "bad.json").write_text(json.dumps({"n": 2, "rows": [[[0, 0.5], [1, 0.6]], [[0, 1.0]]]}))
    assert run_cli("run", "--chain", tmp_path / "bad.json", "--router", "srt",
                   "--out", tmp_path / "o") == 1
    assert "row 0" in capsys.readouterr().err


def test_run_nonreversible_exit_1_only_when_verifying(tmp_path, capsys):
    skew = TransitionMatrix([[0.5, 0.4, 0.1], [0.1, 0.5, 0.4], [0.4, 0.1, 0.5]])
    skew.save(tmp_path / "skew.json")
    args = ["run", "--chain", tmp_path / "skew.json", "--router", "billiard", "--M", 30,
            "--T", 5, "--out", tmp_path / "o"]
    assert run_cli(*args) == 0
    assert "not reversible" in capsys.readouterr().err
    assert run_cli(*args, "--verify-bounds") == 1


def test_run_bound_violation_exit_2(tmp_path, monkeypatch):
    real = analysis._formulas
    monkeypatch.setattr(analysis, "_formulas",
                        lambda *a: {k: v * 1e-6 for k, v in real(*a).items()})
    assert run_cli("run", "--gen", "linext:n=3", "--router", "rotor", "--M", 1000,
                   "--verify-bounds", "--out", tmp_path) == 2
    assert json.loads((tmp_path / "summary.json").read_text())["bound_satisfied"] is False


def test_run_rejects_bad_arguments(tmp_path):
    assert run_cli("run", "--gen", "linext:n=3", "--router", "srt", "--M", 0, "--out", tmp_path) == 1
    assert run_cli("run", "--gen", "linext:n=3", "--router", "srt", "--gamma", 0.5,
                   "--out", tmp_path) == 1
    assert run_cli("run", "--gen", "knapsack:a=1,1;b=1", "--router", "srt",
                   "--init", "point:7", "--out", tmp_path) == 1


def test_summary_round_trip(tmp_path):
    assert run_cli("run", "--gen", "matching:path=3", "--router", "rotor", "--M", 500,
                   "--gamma", 0.1, "--out", tmp_path) == 0
    s = json.loads((tmp_path / "summary.json").read_text())
    again = cli.bounds_from_summary(s)
    assert again.keys() == s["bounds"].keys()
    assert all(again[k] == s["bounds"][k]["value"] for k in again)


def test_mixing_outputs(tmp_path):
    out = tmp_path / "m.json"
    assert run_cli("mixing", "--gen", "linext:n=3", "--eps", "0.25,0.1", "--out", out) == 0
    prof = json.loads(out.read_text())
    assert prof["t_star"] >= 1 and prof["not_reached"] == []
    assert set(prof["tau"]) == {"0.1", "0.25"}
    assert len(prof["h"]) == len(prof["h_bar"])


def test_mixing_uniform_rows_and_truncation(tmp_path, capsys):
    TransitionMatrix(np.full((3, 3), 1 / 3)).save(tmp_path / "u.json")
    assert run_cli("mixing", "--chain", tmp_path / "u.json", "--eps", "0.01,0.25") == 0
    prof = json.loads(capsys.readouterr().out)
    assert set(prof["tau"].values()) == {1}
    assert run_cli("mixing", "--gen", "linext:n=5", "--t-max", 2) == 0
    assert "not reached" in capsys.readouterr().err


@pytest.mark.parametrize("kind,row", [("srt", "2/3,1/3"), ("vdc", "0.3,0.3,0.4"),
                                      ("rotor", "1/2,1/4,1/4"), ("billiard", "0.1,0.2,0.3,0.4"),
                                      ("srt", "1/sqrt(2),1-1/sqrt(2)")])
def test_verify_router_passes(kind, row, capsys):
    assert run_cli("verify-router", "--router", kind, "--row", row, "--z-max", 10_000,
                   "--seed", 1) == 0
    assert "PASS" in capsys.readouterr().out


def test_verify_router_reports_first_violation(monkeypatch, capsys):
    monkeypatch.setattr(cli, "_prefix_bound",
                        lambda kind, p, d, per, z: np.full(np.shape(z), 0.5))
    assert run_cli("verify-router", "--router", "srt", "--row", "2/3,1/3", "--z-max", 50,
                   "--seed", 0) == 2
    out = capsys.readouterr().out
    assert "FAIL" in out and "[0,2) neighbor 0" in out


def test_verify_router_rejects_bad_row():
    assert run_cli("verify-router", "--router", "srt", "--row", "0.5,0.6", "--seed", 0) == 1
    assert run_cli("verify-router", "--router", "rotor", "--row", "1/sqrt(2),1-1/sqrt(2)",
                   "--seed", 0) == 1
    assert cli.parse_row("1,3", normalize=True) == [0.25, 0.75]
    with pytest.raises(ValueError):
        cli.parse_row("__import__('os')")


@pytest.mark.parametrize("family,args,n", [
    ("knapsack", ["--a", "1,2,3", "--b", "4"], 6),
    ("linext", ["--n", "4", "--rel", "1<3,2<4"], 6),
    ("matching", ["--edges", "0-1,1-2"], 3),
    ("random", ["--n", "9", "--degree", "3", "--seed", "2"], 9),
])
def test_gen_writes_chain_and_labels(tmp_path, family, args, n):
    out = tmp_path / "c.json"
    assert run_cli("gen", family, *args, "--out", out) == 0
    assert TransitionMatrix.load(out).n == n
    assert len(json.loads((tmp_path / "c.json.labels.json").read_text())) == n


def test_outputs_identical_across_thread_counts(tmp_path):
    blobs = []
    for threads in ("1", "2", "8"):
        out = tmp_path / threads
        env = dict(os.environ, DETWALK_THREADS=threads)
        subprocess.run([sys.executable, "-m", "detwalk", "run", "--gen", "knapsack:a=1,1,1,1,1,1;b=3",
                        "--router", "billiard", "--M", "100000", "--T", "30", "--init", "uniform",
                        "--out", str(out)], env=env, check=True, capture_output=True)
        blobs.append(((out / "trace.csv").read_bytes(), (out / "summary.json").read_bytes()))
    assert blobs[0] == blobs[1] == blobs[2]
