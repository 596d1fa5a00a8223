"""Run directory artifacts and the report table"""

import json
import math

import numpy as np
import pytest

from src.core.errors import MissingArtifactsError
from src.modules.run_store import REQUIRED_ARTIFACTS, RunStore, load_report, report_frame, to_jsonable


def test_to_jsonable():
    payload = {"slope": np.float64(-0.55), "band": float("nan"), "series": np.array([1.0, math.inf]),
               "count": np.int64(3), 2: (1, 2)}
    assert to_jsonable(payload) == {"slope": -0.55, "band": None, "series": [1.0, None], "count": 3, "2": [1, 2]}
    json.dumps(to_jsonable(payload))


SUMMARY = {
    "checks": [
        {"check": "s0_decay", "module": "asymptotics", "status": "pass", "gating": True,
         "reports": [{"name": "s0_decay", "equation": "||s0|| <= C t^(lambda_0 - 1)",
                      "predicted_exponent": -0.55, "fitted_slope": -0.56, "band_ratio": 1.2,
                      "verdict": "pass", "gating": True}]},
        {"check": "oracles", "module": "oracles", "status": "skipped", "gating": False, "reports": []},
    ]
}


def test_report_frame():
    frame = report_frame(SUMMARY)
    assert list(frame["quantity"]) == ["s0_decay", "oracles"]
    assert frame.loc[0, "fitted_slope"] == pytest.approx(-0.56)
    assert frame.loc[1, "status"] == "skipped"
    assert report_frame({}).empty


def test_empty_directory_is_refused(tmp_path):
    with pytest.raises(MissingArtifactsError) as info:
        load_report(tmp_path)
    assert info.value.missing == list(REQUIRED_ARTIFACTS)
    with pytest.raises(MissingArtifactsError):
        load_report(tmp_path / "absent")


def test_partial_run_is_flagged(tmp_path):
    store = RunStore.create(tmp_path, "partial")
    store.write_summary(SUMMARY)
    store.write_calibration({"gronwall": 1.5}, {"gronwall": "reference run"})
    report = load_report(store.run_dir)
    assert "profile.npz" in report["missing"]
    assert len(report["table"]) == 2
    assert store.load_calibration()["constants"]["gronwall"] == 1.5
    with pytest.raises(MissingArtifactsError):
        store.load_series("s0_decay")
    with pytest.raises(MissingArtifactsError):
        store.load_trajectory()


def test_corrupt_summary(tmp_path):
    store = RunStore.create(tmp_path)
    store.path("summary.json").write_text("{not json", encoding="utf-8")
    with pytest.raises(MissingArtifactsError):
        store.load_summary()
