from __future__ import annotations

import json

import pytest

from stitlab import cli


def run(argv):
    try:
        return cli.main(argv)
    except SystemExit as exc:
        return exc.code


def test_simulate_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    base = ["simulate", "--d", "3", "--window", "box:1", "--t", "1.5", "--seed", "42"]
    assert run(base + ["--out", str(a)]) == 0
    assert run(base + ["--out", str(b), "--threads", "3"]) == 0
    assert (a / "summary.json").read_bytes() == (b / "summary.json").read_bytes()
    assert (a / "facets.csv").read_bytes() == (b / "facets.csv").read_bytes()
    s = json.loads((a / "summary.json").read_text())
    assert s["n_cells"] == s["n_facets"] + 1
    assert max(s["identity_residuals"].values()) <= 1e-9
    assert (a / "cells.off").exists() and (a / "facets.off").exists()


def test_simulate_tiny_time(tmp_path):
    counts = []
    for seed in range(10):
        assert run(["simulate", "--t", "0.001", "--seed", str(seed), "--out", str(tmp_path / str(seed))]) == 0
        counts.append(json.loads((tmp_path / str(seed) / "summary.json").read_text())["n_facets"])
    assert sum(counts) <= 1


def test_simulate_planar(tmp_path):
    assert run(["simulate", "--d", "2", "--window", "box:2", "--t", "2", "--out", str(tmp_path)]) == 0


def test_report_empty(capsys):
    assert run(["report"]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0].split()[:2] == ["suite", "name"]
    assert len(out.strip().splitlines()) == 2


@pytest.mark.parametrize(
    "argv",
    [
        ["simulate", "--window", "sphere"],
        ["simulate", "--d", "4"],
        ["simulate", "--window", "box:1,2"],
        ["simulate", "--mc-pairs", "10"],
        ["verify", "--suites", "mean,bogus"],
        ["frobnicate"],
        ["simulate", "--t", "abc"],
    ],
)
def test_usage_errors(argv, tmp_path):
    assert run(argv + ["--out", str(tmp_path)]) == 2


def test_config_roundtrip(tmp_path, capsys):
    cfg_file = tmp_path / "c.json"
    cfg_file.write_text(json.dumps({"command": "simulate", "seed": 9, "t": [2.0], "window": "simplex"}))
    assert run(["simulate", "--config", str(cfg_file), "--seed", "10", "--threads", "1", "--dump-config"]) == 0
    canon = json.loads(capsys.readouterr().out)
    assert canon["seed"] == 10  # flags win
    assert canon["window"] == "simplex"
    again = cli.Config.from_dict(canon)
    assert again.canonical() == json.dumps(canon, sort_keys=True)
    with pytest.raises(cli.UsageError):
        cli.Config.from_dict({"bogus": 1})


def test_verify_small(tmp_path):
    code = run(["verify", "--suites", "mean,chord", "--reps", "200", "--mc-pairs", "400000",
                "--seed", "3", "--out", str(tmp_path), "--threads", "1"])
    data = json.loads((tmp_path / "verify.json").read_text())
    assert code == (0 if data["passed"] else 1)
    assert len([r for r in data["rows"] if "[mean]" in r["note"]]) == 3
    assert data["schema_version"] == 1
    assert run(["report", str(tmp_path)]) == 0


def test_verify_gate_failure(tmp_path):
    # an absurdly tight sigma gate makes the stochastic mean checks fail
    code = run(["verify", "--suites", "mean", "--reps", "50", "--tolerance-sigma", "1e-9",
                "--out", str(tmp_path), "--threads", "1"])
    assert code == 1


def test_facecov_support_violation(tmp_path):
    code = run(["facecov", "--g", "box:0.5,0.5,0.5,1.5,1.5,1.5", "--reps", "10", "--out", str(tmp_path)])
    assert code == 2


def test_facecov_small(tmp_path):
    code = run(["facecov", "--g", "box:0.3,0.3,0.3,0.7,0.7,0.7", "--reps", "200", "--quad-points", "8",
                "--out", str(tmp_path), "--threads", "1", "--format", "csv"])
    assert code in (0, 1)
    text = (tmp_path / "facecov.csv").read_text()
    assert "STIT vs PHT mixture" in text


def test_clt_small(tmp_path):
    code = run(["clt", "--R", "1,2", "--reps", "30", "--mc-pairs", "20000", "--out", str(tmp_path), "--threads", "1"])
    assert code in (0, 1)
    data = json.loads((tmp_path / "clt.json").read_text())
    assert set(data["tables"]["correlation"]) == {"1.0", "2.0"}
