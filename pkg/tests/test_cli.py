from __future__ import annotations

import json

import numpy as np
import pytest

from scsense.cli import main
from scsense.panel import write_csv
from scsense.sensitivity import report_from_json, report_to_json
from tests.conftest import random_panel


@pytest.fixture(scope="module")
def small_csv(tmp_path_factory):
    """A 6-unit panel on disk; u0 treated from period 2007 (t0_index 7)."""
    rng = np.random.default_rng(99)
    panel = random_panel(rng, n_units=6, n_pre=8, n_post=3)
    path = tmp_path_factory.mktemp("data") / "panel.csv"
    write_csv(panel, path)
    return str(path), panel


def _small_args(small_csv):
    path, _ = small_csv
    return ["--input", path, "--treated", "u0", "--first-treated-period", "2008"]


def test_fit_writes_three_files(tmp_path):
    assert main(["fit", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "fit.json").read_text())
    assert doc["treated_unit"] == "California"
    assert doc["target_period"] == 2000
    assert doc["tau_hat"] < -15
    assert abs(sum(doc["weights"].values()) - 1.0) < 1e-6
    trend = (tmp_path / "trend.csv").read_text().splitlines()
    assert trend[0] == "period,observed,synthetic"
    assert len(trend) == 32
    assert (tmp_path / "trend.svg").read_text().startswith("<svg")


def test_fit_target_period_flag(tmp_path):
    assert main(["fit", "--target-period", "1995", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "fit.json").read_text())
    assert doc["target_period"] == 1995


def test_analyze_single_metric_unsuffixed(small_csv, tmp_path):
    rc = main(["analyze", *_small_args(small_csv), "--metric", "uw", "--out", str(tmp_path)])
    assert rc == 0
    assert (tmp_path / "report.json").exists()
    assert (tmp_path / "bounds.csv").exists()
    assert (tmp_path / "bounds.svg").exists()
    assert not (tmp_path / "report_uw.json").exists()
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["metric"] == "uw"
    assert doc["treated_unit"] == "u0"


def test_analyze_multi_metric_suffixed(small_csv, tmp_path):
    rc = main(
        ["analyze", *_small_args(small_csv), "--metric", "uw,cw", "--out", str(tmp_path)]
    )
    assert rc == 0
    for name in ("report_uw.json", "report_cw.json", "bounds_uw.csv", "bounds_cw.csv"):
        assert (tmp_path / name).exists(), name
    assert (tmp_path / "bounds.svg").exists()
    assert not (tmp_path / "report.json").exists()


def test_report_json_reserializes_identically(small_csv, tmp_path):
    main(["analyze", *_small_args(small_csv), "--metric", "cw", "--out", str(tmp_path)])
    text = (tmp_path / "report.json").read_text()
    report = report_from_json(text)
    assert report_to_json(report) + "\n" == text


def test_bounds_csv_shape(small_csv, tmp_path):
    _, panel = small_csv
    main(["analyze", *_small_args(small_csv), "--metric", "uw", "--out", str(tmp_path)])
    lines = (tmp_path / "bounds.csv").read_text().splitlines()
    assert lines[0] == "percentile_rank,unit,B_j,lo,hi,plottable"
    assert len(lines) == 1 + len(panel.control_units)


def test_coverage_outputs(small_csv, tmp_path):
    _, panel = small_csv
    rc = main(["coverage", *_small_args(small_csv), "--metric", "uw", "--out", str(tmp_path)])
    assert rc == 0
    lines = (tmp_path / "coverage.csv").read_text().splitlines()
    assert lines[0] == "p,coverage"
    assert len(lines) == 1 + (len(panel.control_units) - 1)
    assert (tmp_path / "coverage.svg").read_text().startswith("<svg")


def test_leave_unit_out_outputs(small_csv, tmp_path):
    _, panel = small_csv
    rc = main(["leave-unit-out", *_small_args(small_csv), "--out", str(tmp_path)])
    assert rc == 0
    lines = (tmp_path / "envelope.csv").read_text().splitlines()
    assert lines[0] == "period,observed,base,lo,hi"
    assert len(lines) == 1 + len(panel.periods)
    doc = json.loads((tmp_path / "leave_unit_out.json").read_text())
    assert doc["as_treated"] == "u0"
    assert set(doc["dropped_units"]) <= set(panel.control_units)
    assert (tmp_path / "leave_unit_out.svg").read_text().startswith("<svg")


def test_leave_unit_out_as_treated_flag(small_csv, tmp_path):
    rc = main(
        ["leave-unit-out", *_small_args(small_csv), "--as-treated", "u2", "--out", str(tmp_path)]
    )
    assert rc == 0
    doc = json.loads((tmp_path / "leave_unit_out.json").read_text())
    assert doc["as_treated"] == "u2"
    assert "u2" not in doc["dropped_units"]


def test_backdate_outputs(small_csv, tmp_path):
    rc = main(["backdate", *_small_args(small_csv), "--k", "3", "--out", str(tmp_path)])
    assert rc == 0
    lines = (tmp_path / "validation.csv").read_text().splitlines()
    assert lines[0] == "period,observed,predicted,residual"
    assert len(lines) == 4
    doc = json.loads((tmp_path / "backdate.json").read_text())
    assert doc["backdate_periods"] == 3
    assert len(doc["post_predictions"]) == 3
    assert (tmp_path / "backdate.svg").read_text().startswith("<svg")


def test_unknown_metric_exits_2(small_csv, tmp_path, capsys):
    rc = main(["analyze", *_small_args(small_csv), "--metric", "nope", "--out", str(tmp_path)])
    assert rc == 2
    err = capsys.readouterr().err
    assert "nope" in err and "uw" in err


def test_missing_input_exits_2(tmp_path, capsys):
    rc = main(
        [
            "fit",
            "--input", str(tmp_path / "absent.csv"),
            "--treated", "x",
            "--first-treated-period", "5",
            "--out", str(tmp_path),
        ]
    )
    assert rc == 2
    assert "absent.csv" in capsys.readouterr().err


def test_input_without_treated_exits_2(small_csv, tmp_path, capsys):
    path, _ = small_csv
    rc = main(["fit", "--input", path, "--out", str(tmp_path)])
    assert rc == 2
    assert "--treated" in capsys.readouterr().err


def test_backdate_excessive_k_exits_2(small_csv, tmp_path, capsys):
    rc = main(["backdate", *_small_args(small_csv), "--k", "8", "--out", str(tmp_path)])
    assert rc == 2
    assert "fitting periods" in capsys.readouterr().err


def test_unknown_subcommand_raises_usage_error():
    with pytest.raises(SystemExit):
        main(["frobnicate"])


def test_outputs_byte_deterministic(small_csv, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        main(["analyze", *_small_args(small_csv), "--metric", "uw,cw", "--out", str(out)])
    for name in ("report_uw.json", "bounds_cw.csv", "bounds.svg"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
