import io
import json

import numpy as np
import pandas as pd
import pytest

from frame_core import FrameFamily, frame_bounds, identity_frame
from perturbation import bessel_perturb_certify, cc_perturb_certify
from reports import BOUNDS_COLUMNS, CERTIFY_COLUMNS, NORMING_COLUMNS, render_csv, render_text, report_emit
from scenarios import Report, ScenarioResult, run


def read_csv(text):
    return pd.read_csv(io.StringIO(text), dtype=str, keep_default_na=False)


def single_result(certificates, frame=None):
    frame = frame or identity_frame(2)
    bounds = frame_bounds(frame)
    return Report([ScenarioResult(0, 0, {"tolerance": 1e-9}, bounds, bounds, certificates=certificates)])


def test_empty_report_gives_header_only():
    text = render_csv(Report())
    assert text == ",".join(CERTIFY_COLUMNS) + "\n"
    assert render_csv(Report(), "bounds") == ",".join(BOUNDS_COLUMNS) + "\n"
    assert render_csv(Report(), "norming") == ",".join(NORMING_COLUMNS) + "\n"


def test_sound_bessel_row():
    frame = identity_frame(2)
    report = single_result([bessel_perturb_certify(frame, frame.G)], frame)
    df = read_csv(render_csv(report))
    assert list(df.columns) == CERTIFY_COLUMNS
    bessel = df[df.theorem == "bessel"]
    assert len(bessel) == 1
    row = bessel.iloc[0]
    assert row.sound == "true"
    assert row.hypothesis_ok == "true"
    assert row.mode == "exact"
    assert row.constant_names == "mu_tilde"
    assert float(row.constant_values) == 0.0
    assert set(df.theorem) == {"bessel", "bessel_converse"}


def test_cc_row_flags_hilbert_convention():
    cert = cc_perturb_certify(np.eye(2), np.diag([1.1, 1.0]))
    df = read_csv(render_csv(single_result([cert])))
    row = df[df.theorem == "cc"].iloc[0]
    assert float(row.predicted_lower) == pytest.approx(0.81, rel=1e-9)
    assert float(row.predicted_upper) == pytest.approx(1.21, rel=1e-9)
    assert float(row.measured_A) == pytest.approx(1.0, rel=1e-12)
    assert float(row.measured_B) == pytest.approx(1.21, rel=1e-12)
    assert row.constant_names.startswith("hilbert:")
    assert row.sound == "true"


def test_csv_keeps_full_precision():
    cert = cc_perturb_certify(np.eye(2), np.diag([1.1, 1.0]))
    df = read_csv(render_csv(single_result([cert])))
    mu = df.iloc[0].constant_values.split(";")[-1]
    assert float(mu) == cert.constants["mu"][0]


def test_failed_hypothesis_leaves_sound_empty():
    cert = cc_perturb_certify(np.eye(2), 3 * np.eye(2))
    df = read_csv(render_csv(single_result([cert])))
    assert df.iloc[0].hypothesis_ok == "false"
    assert df.iloc[0].sound == ""


def test_bounds_table():
    frame = FrameFamily.unit([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    df = read_csv(render_csv(single_result([], frame), "bounds"))
    assert list(df.columns) == BOUNDS_COLUMNS
    assert list(df.family) == ["original", "perturbed"]
    assert float(df.iloc[0].A) == pytest.approx(1.0)
    assert float(df.iloc[0].B) == pytest.approx(2.0 ** 0.5)
    assert df.iloc[0].tight == "false"


def test_text_report_groups_by_scenario():
    frame = identity_frame(2)
    report = single_result([bessel_perturb_certify(frame, frame.G)], frame)
    text = render_text(report)
    assert text.startswith("scenario 0 (seed 0)")
    assert "frame bounds" in text
    assert "bessel (exact, linear)" in text
    assert "sound" in text
    assert text.rstrip().endswith("0 violations")
    assert render_text(report) == text


def test_report_emit_writes_file(tmp_path):
    frame = identity_frame(2)
    report = single_result([bessel_perturb_certify(frame, frame.G)], frame)
    out = tmp_path / "report.csv"
    rendered = report_emit(report, "csv", out)
    assert out.read_text(encoding="utf-8") == rendered
    with pytest.raises(ValueError):
        report_emit(report, "xml")


def test_report_emit_unwritable_path(tmp_path):
    with pytest.raises(OSError):
        report_emit(Report(), "csv", tmp_path / "missing" / "report.csv")


def test_end_to_end_reports_are_reproducible(tmp_path):
    config = {
        "seed": 3, "dim": 3, "num_functionals": 4, "grades": 1,
        "x_weights": {"kind": "polynomial", "exponent_step": 1},
        "frame": {"kind": "random_gaussian"},
        "perturbation": {"kind": "additive_gaussian", "scale": 0.02},
        "theorems": ["bessel", "functional", "kato"],
    }
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(config), encoding="utf-8")
    first, _ = run(path)
    second, _ = run(path)
    assert render_csv(first) == render_csv(second)
    assert render_text(first) == render_text(second)
