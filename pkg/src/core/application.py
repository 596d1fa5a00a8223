"""
Lab Application
===============

The orchestrator that runs one experiment through the pipeline
(initial data, asymptotic profile, final time, fixed point, checks)
and persists every artifact, plus the concurrent sweep mode.
"""

import itertools
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from tqdm import tqdm

from .config import ExperimentConfig, build_config
from .errors import LabError, StageError
from .logger import logger
from ..modules.asymptotics import iterate_approximation
from ..modules.cauchy_solver import (
    SolverConfig, calibrate_smallness_constant, select_final_time, solve_nonlinear_fixed_point,
)
from ..modules.check_runner import CheckRunner, CheckStatus, RunContext, any_blocking, required_constants
from ..modules.grid_spectral import hs_norm, set_fft_workers
from ..modules.initial_data import build_initial_data
from ..modules.run_store import RunStore, to_jsonable

SMALLNESS = "smallness_constant"


@dataclass
class RunOutcome:
    """Where a run was written and whether it passed"""
    run_dir: Path
    summary: Dict[str, Any]
    constants: Dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.summary.get("passed", False))


@dataclass
class SweepOutcome:
    sweep_dir: Path
    members: List[Dict[str, Any]]
    stability: Dict[str, Dict[str, Any]]

    @property
    def passed(self) -> bool:
        return all(m.get("passed", False) for m in self.members)


class LabApplication:
    """Experiment pipeline"""

    def __init__(self, config: ExperimentConfig, show_progress: bool = False, label: str = "run"):
        self.config = config
        self.params = config.to_model_params()
        self.show_progress = show_progress
        self.label = label
        self.stage_times: Dict[str, float] = {}

        set_fft_workers(config.threads)
        if config.debug:
            logger.set_level("DEBUG")

        logger.info("Lab application initialized")

    def _stage(self, name: str, func: Callable, *args, **kwargs):
        """Run one pipeline stage; failures surface as StageError naming it"""
        started = time.perf_counter()
        logger.info(f"Stage '{name}' started")
        try:
            value = func(*args, **kwargs)
        except (LabError, ValueError, ArithmeticError) as e:
            logger.error(f"Stage '{name}' failed", exception=e)
            raise StageError(name, e) from e
        self.stage_times[name] = time.perf_counter() - started
        logger.info(f"Stage '{name}' finished in {self.stage_times[name]:.2f}s")
        return value

    def _final_time(self, v0, profile) -> Tuple[float, Optional[float], str]:
        """T from the config, or solved from the (stored or pilot) smallness constant"""
        section = self.config.solver
        if section.T is not None:
            return section.T, None, "config"

        constant = section.smallness_constant
        source = "config"
        if constant is None:
            constant = self.config.calibration.constants.get(SMALLNESS)
            source = "stored"
        if constant is None:
            pilot = SolverConfig.from_section(section, self.config.rho_prime, 1.0)
            constant = calibrate_smallness_constant(v0, profile, self.params, pilot,
                                                    target_ratio=section.contraction_target)
            source = "pilot"

        R = 2.0 * hs_norm(v0, self.params.rho)
        T = select_final_time(constant, R, self.params)
        logger.log_run_record("final_time", T=T, constant=constant, source=source, R=R)
        return T, constant, source

    def run(self) -> RunOutcome:
        """Run the full pipeline into a fresh run directory"""
        config = self.config
        params = self.params
        store = RunStore.create(config.output_dir, self.label)
        logger.attach_run_sinks(store.run_dir)
        started = datetime.now()
        wall = time.perf_counter()

        try:
            store.write_config(config)
            grid = config.to_grid()
            mesh = config.to_mesh()

            v0 = self._stage("initial_data", build_initial_data, config.initial_data, grid, params.rho)
            a0 = hs_norm(v0, params.rho)
            profile = self._stage("asymptotics", iterate_approximation, config.model.level, v0, mesh,
                                  params, self.show_progress)
            store.write_profile(profile)
            logger.log_run_record("asymptotics", **profile.diagnostics)

            T, smallness, smallness_source = self._stage("final_time", self._final_time, v0, profile)
            solver_config = SolverConfig.from_section(config.solver, config.rho_prime, T)
            result = self._stage("cauchy_solver", solve_nonlinear_fixed_point, v0, solver_config,
                                 profile, params, self.show_progress)
            store.write_trajectory(result)

            context = RunContext(config, params, profile, result, a0, profile.diagnostics["a_a"])
            runner = CheckRunner(context, config.threads)
            executions = self._stage("estimates_lab", runner.run_all)
            csvs = store.write_check_csvs(executions)
        finally:
            logger.detach_run_sinks()

        constants = required_constants(executions)
        if smallness is not None:
            constants[SMALLNESS] = smallness
        provenance = {name: str(store.run_dir) for name in constants}
        for name, value in config.calibration.constants.items():
            if name != SMALLNESS or smallness_source == "stored":
                provenance[name] = config.calibration.provenance.get(name, "stored")
        store.write_calibration(constants, provenance)

        counts = {status.value: sum(e.status is status for e in executions) for status in CheckStatus}
        blocking = [e.info.name for e in executions if e.blocking]
        summary = {
            "label": self.label,
            "started": started.isoformat(timespec="seconds"),
            "wall_clock": time.perf_counter() - wall,
            "stage_times": self.stage_times,
            "resolution": {
                "grid": list(grid.shape), "box_length": grid.box_length, "K": mesh.K, "p": mesh.p,
                "T": result.T, "t_1": mesh.first, "solver_nodes": len(result.trajectory),
                "threads": config.threads,
            },
            "model": {"gamma": params.gamma, "rho": params.rho, "kappa": params.kappa, "n": params.n,
                      "kernel": params.kernel, "level": config.model.level,
                      "validated": params.validated},
            "a0": a0,
            "final_time": {"T": T, "smallness_constant": smallness, "source": smallness_source},
            "profile": profile.diagnostics,
            "fixed_point": result.summary(),
            "checks": [e.summary() for e in executions],
            "counts": counts,
            "blocking": blocking,
            "csvs": csvs,
            "passed": not any_blocking(executions),
        }
        store.write_summary(summary)

        verdict = "PASSED" if summary["passed"] else f"FAILED ({', '.join(blocking)})"
        logger.info(f"Run finished in {summary['wall_clock']:.1f}s: {verdict}")
        return RunOutcome(store.run_dir, to_jsonable(summary), constants)

    def sweep(self, vary: Dict[str, Sequence[Any]]) -> SweepOutcome:
        """Runs over the product of the varied keys; the first member calibrates for the rest"""
        keys = list(vary)
        members = [dict(zip(keys, values)) for values in itertools.product(*(vary[k] for k in keys))]
        if not members:
            raise LabError("sweep needs at least one value per varied key")
        sweep_dir = Path(self.config.output_dir) / f"sweep_{datetime.now().strftime('%Y%m%d_%H%M%S_%f')}"
        sweep_dir.mkdir(parents=True, exist_ok=True)
        logger.info(f"Sweep over {len(members)} members into {sweep_dir}")

        base = self.config.with_overrides({"output_dir": str(sweep_dir)})
        first = base.with_overrides(members[0])
        reference = LabApplication(first, self.show_progress, label=_member_label(members[0])).run()

        stored = {**base.calibration.constants, **reference.constants}
        provenance = {name: str(reference.run_dir) for name in reference.constants}
        rest = [
            base.with_overrides({**overrides, "calibration.constants": stored,
                                 "calibration.provenance": provenance}).model_dump(mode="json")
            for overrides in members[1:]
        ]
        labels = [_member_label(overrides) for overrides in members[1:]]

        results: List[Dict[str, Any]] = [_member_record(members[0], reference)]
        if rest:
            with ProcessPoolExecutor(max_workers=self.config.threads) as pool:
                futures = pool.map(_run_member, rest, labels)
                for overrides, (run_dir, summary, constants) in tqdm(
                        zip(members[1:], futures), total=len(rest), desc="sweep",
                        disable=not self.show_progress):
                    results.append(_member_record(overrides, RunOutcome(Path(run_dir), summary, constants)))

        stability = constant_stability([r["constants"] for r in results])
        payload = {"vary": {k: list(v) for k, v in vary.items()}, "members": results, "stability": stability}
        RunStore(sweep_dir).write_json("sweep_summary.json", payload)
        return SweepOutcome(sweep_dir, results, stability)


def _member_label(overrides: Dict[str, Any]) -> str:
    return "_".join(f"{key.split('.')[-1]}-{value}" for key, value in overrides.items()) or "run"


def _member_record(overrides: Dict[str, Any], outcome: RunOutcome) -> Dict[str, Any]:
    return {
        "overrides": overrides,
        "run_dir": str(outcome.run_dir),
        "passed": outcome.passed,
        "blocking": outcome.summary.get("blocking", []),
        "constants": outcome.constants,
    }


def _run_member(data: Dict[str, Any], label: str):
    """Sweep member in a worker process"""
    outcome = LabApplication(build_config(data), label=label).run()
    return str(outcome.run_dir), outcome.summary, outcome.constants


def constant_stability(constants: List[Dict[str, float]]) -> Dict[str, Dict[str, Any]]:
    """max/min of each required constant across sweep members"""
    table: Dict[str, Dict[str, Any]] = {}
    names = sorted({name for member in constants for name in member})
    for name in names:
        values = [member[name] for member in constants if name in member]
        positive = [v for v in values if v > 0]
        ratio = max(positive) / min(positive) if positive else 1.0
        table[name] = {"values": values, "max_over_min": ratio}
    return table


def parse_vary(spec: str) -> Dict[str, List[Any]]:
    """'initial_data.a0=0.25,0.5,1.0' -> {'initial_data.a0': [0.25, 0.5, 1.0]}"""
    if "=" not in spec:
        raise LabError(f"--vary expects key=v1,v2,... (got {spec!r})")
    key, raw = spec.split("=", 1)
    values: List[Any] = []
    for item in raw.split(","):
        item = item.strip()
        for cast in (int, float):
            try:
                values.append(cast(item))
                break
            except ValueError:
                continue
        else:
            values.append(item)
    return {key.strip(): values}


__all__ = ['LabApplication', 'RunOutcome', 'SweepOutcome', 'constant_stability', 'parse_vary']
