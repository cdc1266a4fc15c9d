import csv
import io
import json
import subprocess
import sys

import pytest

from polarcicc.cli import main


def test_help_runs():
    out = subprocess.run([sys.executable, "-m", "polarcicc.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for cmd in ("construct", "simulate", "region", "leakage-oracle"):
        assert cmd in out.stdout


def test_region(tmp_path, capsys):
    assert main(["region", "--instance", "case-1", "same-output", "--out", str(tmp_path)]) == 0
    rows = list(csv.reader((tmp_path / "region.csv").open()))
    assert [r[1] for r in rows[1:]] == ["case-1", "same-output"]
    assert float(rows[2][6]) == 0.0  # b4 of the equal-output instance
    assert "R2s <=" in capsys.readouterr().out


def test_construct_uses_cache(tmp_path, capsys):
    args = ["construct", "--instance", "case-2", "--n", "32", "--samples", "300", "--m", "2",
            "--out", str(tmp_path)]
    assert main(args) == 0
    assert "computed" in capsys.readouterr().out
    assert main(args) == 0
    assert "cache hit" in capsys.readouterr().out
    plan = json.loads((tmp_path / "plan-case-2-N32-m2.json").read_text())
    assert plan["case"] == "2" and plan["m"] == 2


def test_simulate_sweep(tmp_path):
    rc = main(["simulate", "--instance", "identity-q2", "--n", "16", "32", "--frames", "10",
               "--samples", "300", "--out", str(tmp_path), "--assert-max-pe", "0"])
    assert rc == 0
    rows = list(csv.DictReader((tmp_path / "metrics.csv").open()))
    assert [r["N"] for r in rows] == ["16", "32"]
    assert all(r["Pe"] == "0.0" for r in rows)
    assert (tmp_path / "summary.txt").read_text().count("joint frame error") == 2


def test_simulate_assertion_fails(tmp_path, capsys):
    rc = main(["simulate", "--instance", "case-2", "--n", "32", "--frames", "20", "--delta", "0.3",
               "--samples", "300", "--out", str(tmp_path), "--assert-max-pe", "0"])
    err = capsys.readouterr().err
    assert rc == 1 and "assertion failed" in err


def test_environment_overrides(tmp_path, monkeypatch):
    monkeypatch.setenv("POLARCICC_N", "16")
    monkeypatch.setenv("POLARCICC_FRAMES", "5")
    monkeypatch.setenv("POLARCICC_SAMPLES", "200")
    monkeypatch.setenv("POLARCICC_OUT", str(tmp_path))
    assert main(["simulate", "--instance", "identity-q3"]) == 0
    rows = list(csv.DictReader((tmp_path / "metrics.csv").open()))
    assert rows[0]["N"] == "16" and rows[0]["frames"] == "5"


def test_flag_beats_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("POLARCICC_N", "16")
    assert main(["construct", "--instance", "case-1", "--n", "32", "--samples", "200",
                 "--out", str(tmp_path)]) == 0
    assert (tmp_path / "plan-case-1-N32-m1.json").exists()


def test_leakage_oracle(tmp_path, capsys):
    assert main(["leakage-oracle", "--instance", "near-degraded", "--delta", "0.1",
                 "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    proper, adv = (float(r["leak_bits"]) for r in rows)
    assert proper < adv
    assert (tmp_path / "leakage.csv").exists()


@pytest.mark.parametrize("argv,fragment", [
    (["region", "--instance", "no-such"], "neither a file"),
    (["simulate", "--instance", "case-1", "--n", "48"], "power of two"),
    (["leakage-oracle", "--instance", "case-1"], ""),
    (["construct"], "no instance"),
])
def test_errors_exit_2(argv, fragment, capsys, tmp_path):
    assert main(argv + (["--out", str(tmp_path)] if argv[0] != "region" else [])) == 2
    err = capsys.readouterr().err
    assert "error:" in err and fragment in err


def test_bad_env_value(monkeypatch, capsys):
    monkeypatch.setenv("POLARCICC_M", "two")
    assert main(["construct", "--instance", "case-1"]) == 2
    assert "POLARCICC_M" in capsys.readouterr().err


def test_malformed_instance_file(tmp_path, capsys):
    p = tmp_path / "bad.cicc"
    p.write_text("name x\nalphabet U 2\n")
    assert main(["region", "--instance", str(p)]) == 2
    assert "bad.cicc" in capsys.readouterr().err
