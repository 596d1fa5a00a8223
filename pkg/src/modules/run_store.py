"""
Run Store Module
================

Filesystem persistence of a run: config copy, profile and trajectory
snapshots, one CSV per bound series, the summary document and the
calibrated constants.
"""

import json
import math
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from ..core.errors import MissingArtifactsError
from ..core.logger import logger

CONFIG_FILE = "config.yaml"
PROFILE_FILE = "profile.npz"
TRAJECTORY_FILE = "trajectory.npz"
SUMMARY_FILE = "summary.json"
CALIBRATION_FILE = "calibration.json"
CSV_DIR = "csv"
REQUIRED_ARTIFACTS = (CONFIG_FILE, SUMMARY_FILE, CALIBRATION_FILE, PROFILE_FILE, TRAJECTORY_FILE)
REPORT_COLUMNS = ["module", "quantity", "equation", "predicted_exponent", "fitted_slope",
                  "band_ratio", "verdict", "gating", "status"]


def to_jsonable(value: Any) -> Any:
    """numpy values to builtins, non-finite floats to None"""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, complex):
        return [value.real, value.imag]
    return value


class RunStore:
    """Artifacts of one run directory"""

    def __init__(self, run_dir):
        self.run_dir = Path(run_dir)
        self.csv_dir = self.run_dir / CSV_DIR

    @classmethod
    def create(cls, output_dir, label: str = "run") -> "RunStore":
        stamp = datetime.now().strftime("%Y%m%d_%H%M%S_%f")
        store = cls(Path(output_dir) / f"{label}_{stamp}")
        store.csv_dir.mkdir(parents=True, exist_ok=True)
        logger.info(f"Run directory: {store.run_dir}")
        return store

    def path(self, name: str) -> Path:
        return self.run_dir / name

    # -------------------------------------------------------------- writing

    def write_config(self, config):
        config.save_to_file(str(self.path(CONFIG_FILE)))

    def write_profile(self, profile):
        np.savez_compressed(
            self.path(PROFILE_FILE),
            times=profile.times, v0=profile.v0.values, va=profile.va.states,
            phi_0=profile.phi_0, phi_b=profile.phi_b, phi_c=profile.phi_c,
            level=profile.level,
        )

    def write_trajectory(self, result):
        np.savez_compressed(
            self.path(TRAJECTORY_FILE),
            times=result.trajectory.times, states=result.trajectory.states,
            previous=result.previous.states, T=result.T,
        )

    def write_check_csvs(self, executions) -> List[str]:
        """csv/<quantity>.csv for every report carrying a series"""
        self.csv_dir.mkdir(parents=True, exist_ok=True)
        written = []
        for execution in executions:
            for report in execution.reports:
                if report.times is None:
                    continue
                target = self.csv_dir / f"{report.name}.csv"
                report.to_frame().to_csv(target, index=False)
                written.append(str(target.relative_to(self.run_dir)))
        logger.debug(f"Wrote {len(written)} series CSVs")
        return written

    def write_json(self, name: str, payload: Dict[str, Any]):
        with open(self.path(name), "w", encoding="utf-8") as f:
            json.dump(to_jsonable(payload), f, indent=2)

    def write_summary(self, summary: Dict[str, Any]):
        self.write_json(SUMMARY_FILE, summary)

    def write_calibration(self, constants: Dict[str, float], provenance: Dict[str, str]):
        self.write_json(CALIBRATION_FILE, {"constants": constants, "provenance": provenance})

    # -------------------------------------------------------------- reading

    def missing_artifacts(self) -> List[str]:
        return [name for name in REQUIRED_ARTIFACTS if not self.path(name).exists()]

    def _read_json(self, name: str) -> Dict[str, Any]:
        target = self.path(name)
        if not target.exists():
            raise MissingArtifactsError([name])
        try:
            with open(target, "r", encoding="utf-8") as f:
                return json.load(f)
        except json.JSONDecodeError as e:
            logger.error(f"Corrupt artifact {target}", exception=e)
            raise MissingArtifactsError([f"{name} (unreadable)"]) from e

    def load_summary(self) -> Dict[str, Any]:
        return self._read_json(SUMMARY_FILE)

    def load_calibration(self) -> Dict[str, Any]:
        return self._read_json(CALIBRATION_FILE)

    def load_series(self, name: str) -> pd.DataFrame:
        target = self.csv_dir / f"{name}.csv"
        if not target.exists():
            raise MissingArtifactsError([f"{CSV_DIR}/{name}.csv"])
        return pd.read_csv(target)

    def list_csvs(self) -> List[str]:
        if not self.csv_dir.exists():
            return []
        return sorted(str(p.relative_to(self.run_dir)) for p in self.csv_dir.glob("*.csv"))

    def load_trajectory(self) -> Dict[str, np.ndarray]:
        target = self.path(TRAJECTORY_FILE)
        if not target.exists():
            raise MissingArtifactsError([TRAJECTORY_FILE])
        with np.load(target) as data:
            return {key: data[key] for key in data.files}


def report_frame(summary: Dict[str, Any]) -> pd.DataFrame:
    """One row per report: module, quantity, equation, predicted, slope, band, verdict"""
    rows = []
    for check in summary.get("checks", []):
        if not check.get("reports"):
            rows.append({
                "module": check.get("module"), "quantity": check.get("check"), "equation": "",
                "predicted_exponent": None, "fitted_slope": None, "band_ratio": None,
                "verdict": check.get("status"), "gating": check.get("gating"), "status": check.get("status"),
            })
            continue
        for report in check["reports"]:
            rows.append({
                "module": check.get("module"),
                "quantity": report.get("name"),
                "equation": report.get("equation"),
                "predicted_exponent": report.get("predicted_exponent"),
                "fitted_slope": report.get("fitted_slope"),
                "band_ratio": report.get("band_ratio"),
                "verdict": report.get("verdict"),
                "gating": report.get("gating"),
                "status": check.get("status"),
            })
    return pd.DataFrame(rows, columns=REPORT_COLUMNS)


def load_report(run_dir) -> Dict[str, Any]:
    """Summary, report table and CSV listing of a run; gaps are flagged, an empty run is refused"""
    store = RunStore(run_dir)
    missing = store.missing_artifacts()
    if not store.run_dir.exists() or len(missing) == len(REQUIRED_ARTIFACTS):
        raise MissingArtifactsError(list(REQUIRED_ARTIFACTS))
    summary: Optional[Dict[str, Any]] = None
    if SUMMARY_FILE not in missing:
        summary = store.load_summary()
    table = report_frame(summary) if summary else pd.DataFrame(columns=REPORT_COLUMNS)
    return {"summary": summary, "table": table, "csvs": store.list_csvs(), "missing": missing}


__all__ = ['RunStore', 'report_frame', 'load_report', 'to_jsonable', 'REQUIRED_ARTIFACTS']
