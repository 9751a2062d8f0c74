import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from nanoloc import cli
from nanoloc.array import UlaConfig
from nanoloc.classifier import EstimatedPsd, spectral_centroid
from nanoloc.config import default_alphabet
from nanoloc.pulse import half_power_band

THZ = 1e12


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def minimal_config(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"experiment": {"n_runs": 1, "distances_m": [1.0]}}))
    return p


def test_simulate_minimal(minimal_config, tmp_path, capsys):
    assert cli.main(["simulate", "--config", str(minimal_config), "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "metrics_dual.csv").exists()
    assert "overall TPR" in capsys.readouterr().out


def test_missing_medium_file(tmp_path, capsys):
    missing = tmp_path / "nowhere" / "k.csv"
    assert cli.main(["simulate", "--medium", str(missing), "--out", str(tmp_path)]) == 1
    assert str(missing) in capsys.readouterr().err


def test_missing_medium_in_config(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"medium": {"source": "csv", "path": "gone.csv"}}))
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == 1
    assert "gone.csv" in capsys.readouterr().err


def test_seed_repeatable(tmp_path):
    args = ["simulate", "--runs", "2", "--distances", "0.05", "1", "--seed", "42", "--trials-jsonl"]
    assert cli.main(args + ["--out", str(tmp_path / "a")]) == 0
    assert cli.main(args + ["--out", str(tmp_path / "b")]) == 0
    for name in ("metrics_dual.csv", "confusion_dual.csv", "trials_dual.jsonl"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_noiseless_spectrum(tmp_path, capsys):
    out = tmp_path / "s"
    assert cli.main(["spectrum", "--medium", "flat", "--event", "2", "--distance", "0.1", "--out", str(out)]) == 0
    rows = read_rows(out / "spectrum_dual_e2.csv")
    peak = max(rows, key=lambda r: float(r["p_imusic"]))
    assert abs(float(peak["theta_deg"]) + 18.525) <= 0.05


def test_spectrum_psd_and_centroid(tmp_path, capsys):
    out = tmp_path / "s"
    assert cli.main(["spectrum", "--event", "5", "--distance", "0.5", "--seed", "3", "--out", str(out),
                     "--dump-snapshots"]) == 0
    printed = dict(line.split("=") for line in capsys.readouterr().out.split())
    rows = read_rows(out / "psd_dual_e5.csv")
    assert len(rows) == UlaConfig(8, 2 * THZ, 10 * THZ, 9e-12).L
    psd = EstimatedPsd(np.array([float(r["bin_hz"]) for r in rows]), np.array([float(r["s_hat"]) for r in rows]))
    assert float(printed["f_cen_hz"]) == pytest.approx(spectral_centroid(psd), rel=1e-12)
    assert (out / "snapshots_dual_e5.csv").exists()


def test_medium_info_flat(tmp_path):
    assert cli.main(["medium-info", "--medium", "flat", "--out", str(tmp_path)]) == 0
    ks = {r["k_per_m"] for r in read_rows(tmp_path / "medium_bands.csv")}
    assert ks == {"0.0"}


def test_medium_info_default(tmp_path, capsys):
    assert cli.main(["medium-info", "--out", str(tmp_path)]) == 0
    summary = read_rows(tmp_path / "medium_summary.csv")
    assert len(summary) == 6
    assert all(float(r["k_max_per_m"]) >= float(r["k_min_per_m"]) for r in summary)
    assert "k_max" in capsys.readouterr().out
    # the fourth band holds the strongest absorption
    assert max(summary, key=lambda r: float(r["k_max_per_m"]))["event_id"] == "4"
    for row, (_, spec) in zip(summary, default_alphabet().symbols):
        lo, hi = half_power_band(spec.n, spec.sigma)
        assert float(row["band_lo_hz"]) == lo and float(row["band_hi_hz"]) == hi


def test_inconsistent_config_is_config_error(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"ulas": {"delta_T_ps": 4}}))
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == 1
    assert "does not fit" in capsys.readouterr().err


def test_usage_error(capsys):
    assert cli.main(["simulate", "--runs", "many"]) == 1


def test_output_dir_not_writable(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli.main(["medium-info", "--out", str(blocker / "sub")]) == 1


def test_runtime_error_exit_code(tmp_path, monkeypatch, capsys):
    def boom(*args, **kwargs):
        raise RuntimeError("worker crashed")

    monkeypatch.setattr(cli, "run_experiment", boom)
    assert cli.main(["simulate", "--out", str(tmp_path)]) == 2
    assert "worker crashed" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "nanoloc", "medium-info", "--medium", "flat", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert (tmp_path / "medium_summary.csv").read_text().startswith("event_id,")
