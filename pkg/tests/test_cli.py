import csv
import json
import subprocess
import sys
from fractions import Fraction

import pytest

from cornerlayer.cli import main, parse_window
from cornerlayer.config import ConfigError

from conftest import TOML, make_config


def _data(path):
    return [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]


def test_match_coeffs_contains_identity_cells(config_file, tmp_path):
    out = tmp_path / "su.csv"
    assert main(["match-coeffs", "--config", str(config_file), "--kind", "Su", "--window", "4",
                 "--out", str(out)]) == 0
    rows = list(csv.DictReader(_data(out)))
    # pi/Theta = 2: the identity cells sit at d = d' = p
    diag = [r for r in rows if r["d_a"] == r["dp_a"] == r["p_a"] and r["l"] == "0"]
    assert {"2", "4"} <= {r["d_a"] for r in diag}
    assert all(float(r["re"]) == 1.0 and float(r["im"]) == 0.0 for r in diag)
    header = out.read_text().splitlines()[:3]
    assert header[0].startswith("# cornerlayer match-coeffs")
    assert header[1] == f"# config {make_config().fingerprint()}"
    manifest = json.loads((tmp_path / "su.manifest.json").read_text())
    assert header[2] == f"# manifest {manifest['manifest_hash']}"
    assert json.loads(out.with_suffix(".json").read_text())["manifest"] == manifest["manifest_hash"]


def test_empty_window_writes_header_only(config_file, tmp_path):
    out = tmp_path / "empty.csv"
    assert main(["match-coeffs", "--config", str(config_file), "--kind", "uS", "--window", "0",
                 "--out", str(out)]) == 0
    assert _data(out) == ["d_a,d_b,dp_a,dp_b,p_a,p_b,l,re,im"]


def test_reruns_are_byte_identical(config_file, tmp_path):
    texts = []
    for i, workers in enumerate(("1", "1", "3")):
        out = tmp_path / f"run{i}.csv"
        assert main(["match-coeffs", "--config", str(config_file), "--kind", "uS", "--window", "4",
                     "--out", str(out), "--workers", workers]) == 0
        texts.append(_data(out))
    assert texts[0] == texts[1] == texts[2]


def test_corner_table_needs_a_profile_choice(config_file, tmp_path):
    out = tmp_path / "uu.csv"
    args = ["match-coeffs", "--config", str(config_file), "--kind", "uu", "--window", "5", "--out", str(out)]
    assert main(args) == 2
    assert main(args + ["--zero-ledger"]) == 0
    prof = tmp_path / "profile.csv"
    prof.write_text("d1_a,d1_b,d2_a,d2_b,n,re,im\n")
    assert main(args + ["--ledger", str(prof)]) == 3


def test_layer_correctors(tmp_path):
    cfg = tmp_path / "same.toml"
    cfg.write_text(TOML.replace("mu1 = 2.0", "mu1 = 1.0"))
    out = tmp_path / "u.csv"
    assert main(["layer-correctors", "--config", str(cfg), "--n-max", "0", "--out", str(out)]) == 0
    rows = list(csv.DictReader(_data(out)))
    assert len(rows) == 1
    assert rows[0]["value_at_0"] == "1" and rows[0]["coefficients_in_Y"] == "1 1"


def test_layer_corrector_column_matches_tangents(config_file, tmp_path):
    out = tmp_path / "u.csv"
    assert main(["layer-correctors", "--config", str(config_file), "--n-max", "2", "--out", str(out)]) == 0
    rows = list(csv.DictReader(_data(out)))
    for r in rows:
        assert Fraction(r["value_at_0"]) == Fraction(1, 2) * Fraction(r["tangent"])
    assert [r["tangent"] for r in rows] == ["1", "1/3", "2/15"]
    assert main(["layer-correctors", "--config", str(config_file), "--n-max", "-1", "--out", str(out)]) == 2


def test_expand_with_zero_ledger(config_file, tmp_path):
    out = tmp_path / "series.json"
    assert main(["expand", "--config", str(config_file), "--zero-ledger", "--window", "3",
                 "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["far"] == [] and doc["corner"] == []


def test_expand_impulse_ledger(config_file, tmp_path):
    led = tmp_path / "sigma.csv"
    led.write_text("field,p_a,p_b,d_a,d_b,l,re,im\nfar,0,0,2,0,0,1,0\n")
    out = tmp_path / "series.json"
    assert main(["expand", "--config", str(config_file), "--ledger", str(led), "--window", "2,-4,6",
                 "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["far"]
    assert all(-4 <= c["d"][0] <= 6 for c in doc["far"])
    res = doc["residual"]["far"]
    assert max(res["omega"], res["lambda"], res["gamma"]) < 1e-10


def test_expand_complete_reports_gaps(config_file, tmp_path):
    led = tmp_path / "sigma.csv"
    led.write_text("field,p_a,p_b,d_a,d_b,l,re,im\n")
    out = tmp_path / "series.json"
    code = main(["expand", "--config", str(config_file), "--ledger", str(led), "--window", "2",
                 "--complete", "--out", str(out)])
    assert code == 3


def test_expand_resource_cap(config_file, tmp_path):
    led = tmp_path / "sigma.csv"
    led.write_text("field,p_a,p_b,d_a,d_b,l,re,im\nfar,0,0,2,0,0,1,0\n")
    code = main(["expand", "--config", str(config_file), "--ledger", str(led), "--window", "4",
                 "--max-cells", "2", "--out", str(tmp_path / "s.json")])
    assert code == 5


def test_check_suite_selector(config_file, tmp_path, capsys):
    out = tmp_path / "report.json"
    assert main(["check", "--config", str(config_file), "--suite", "matching", "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert [r["criterion"] for r in report["results"]] == [6, 7]
    assert "[PASS]" in capsys.readouterr().out
    assert main(["check", "--config", str(config_file), "--suite", "nonsense"]) == 2


def test_failed_check_exit_code(tmp_path):
    cfg = tmp_path / "strict.toml"
    cfg.write_text(TOML + "\n[tolerances]\nfd = 1e-300\n")
    assert main(["check", "--config", str(cfg), "--suite", "derivatives"]) == 4


def test_zero_tolerance_fails_fast(tmp_path, capsys):
    cfg = tmp_path / "zero.toml"
    cfg.write_text(TOML + "\n[tolerances]\nmatrix = 0\n")
    assert main(["check", "--config", str(cfg), "--suite", "matching"]) == 2
    assert "tolerances.matrix" in capsys.readouterr().err


def test_configuration_errors(tmp_path, config_file):
    out = str(tmp_path / "x.csv")
    assert main(["match-coeffs", "--config", str(tmp_path / "none.toml"), "--kind", "Su",
                 "--window", "2", "--out", out]) == 2
    assert main(["match-coeffs", "--config", str(config_file), "--kind", "Su", "--out", out]) == 2
    assert main(["match-coeffs", "--config", str(config_file), "--kind", "Su", "--window", "x",
                 "--out", out]) == 2
    assert main(["match-coeffs", "--config", str(config_file), "--kind", "Su", "--window", "2",
                 "--workers", "0", "--out", out]) == 2


def test_window_parsing():
    cfg = make_config(2.0)
    lat = cfg.lattice
    assert parse_window("3", cfg) == (lat.integer(3), None, None)
    assert parse_window("1:1,0:-2,4", cfg) == (lat.deg(1, 1), lat.pi_multiple(-2), lat.integer(4))
    with pytest.raises(ConfigError):
        parse_window("1,2", cfg)
    with pytest.raises(ConfigError):
        parse_window(None, cfg)
    assert parse_window(None, make_config(2.0, window={"p_max": 2}))[0] == lat.integer(2)


def test_console_entry_point(config_file, tmp_path):
    out = tmp_path / "u.csv"
    proc = subprocess.run([sys.executable, "-m", "cornerlayer", "layer-correctors", "--config",
                           str(config_file), "--n-max", "1", "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert out.exists()
