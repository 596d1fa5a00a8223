"""
Check Runner Module
===================

Registry of the bound checks evaluated at the end of a run, and their
concurrent execution over the immutable products of the pipeline.
"""

import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from ..core.errors import LabError
from ..core.logger import logger
from .asymptotics import AsymptoticProfile
from .cauchy_solver import (
    CONTRACTION_LIMIT, FixedPointResult, calibrate_gronwall_constant, calibrate_holder_constant,
    difference_monitor,
)
from .estimates_lab import (
    FAIL, HOLDER_BOUND, PASS, ExponentReport, VDecomposition, bump_family, calibration_check,
    compute_v_decomposition, exponent_ordering_sweep, holder_continuity_check, inequality_spot_check,
    lemma_low_exponents, lemma_low_series, remainder_series, s_norm_series, v4_pairing_series, verify_bound,
)
from .grid_spectral import NormSpec, hs_norm
from .hartree_core import ModelParams
from .inequalities import LEMMAS
from .time_mesh import Trajectory
from .transforms import (
    DressedState, assemble_uc, fh_growth_check, norm_identity_defect, phase_bound_check, phase_growth_check,
)

CONSERVATION_TOL = 1e-6
RESIDUAL_TOL = 1e-4
SUBDECOMPOSITION_TOL = 1e-6
NORM_IDENTITY_TOL = 1e-10
PAIRING_SCALES = (0.5, 1.0, 2.0)


class CheckStatus(Enum):
    """Check execution status"""
    PENDING = "pending"
    RUNNING = "running"
    PASSED = "passed"
    FAILED = "failed"
    ERROR = "error"
    SKIPPED = "skipped"


@dataclass(eq=False)
class RunContext:
    """Everything a check may read; built once per run and never mutated by checks"""
    config: Any
    params: ModelParams
    profile: AsymptoticProfile
    result: FixedPointResult
    a0: float
    a1: float
    _cache: Dict[str, Any] = field(default_factory=dict, repr=False)
    _lock: threading.RLock = field(default_factory=threading.RLock, repr=False)

    @property
    def checks(self):
        return self.config.checks

    @property
    def rho_prime(self) -> float:
        return self.config.rho_prime

    @property
    def trajectory(self) -> Trajectory:
        return self.result.trajectory

    @property
    def interacting(self) -> bool:
        return self.params.kappa != 0

    def stored(self, name: str) -> Optional[float]:
        return self.config.calibration.constants.get(name)

    def _cached(self, key: str, factory: Callable[[], Any]) -> Any:
        with self._lock:
            if key not in self._cache:
                self._cache[key] = factory()
            return self._cache[key]

    @property
    def va(self) -> Trajectory:
        return self._cached("va", lambda: self.profile.va.restricted(self.trajectory.mesh))

    @property
    def decomposition(self) -> VDecomposition:
        return self._cached("decomposition", lambda: compute_v_decomposition(
            self.trajectory, self.va, self.profile, self.params))

    @property
    def difference_decomposition(self) -> VDecomposition:
        return self._cached("difference_decomposition", lambda: compute_v_decomposition(
            self.trajectory, self.va, self.profile, self.params,
            pair=(self.result.previous, self.trajectory)))

    @property
    def dressed(self) -> List[DressedState]:
        return self._cached("dressed", lambda: assemble_uc(self.trajectory, self.profile))

    @property
    def driver_norm(self) -> float:
        """a = sup_t ||v; H^rho|| of the trajectory driving the final linearized run"""
        return self._cached("driver_norm", lambda: float(
            max(hs_norm(u, self.params.rho) for u in self.result.previous.fields())))


CheckFunction = Callable[[RunContext], List[ExponentReport]]


@dataclass
class CheckInfo:
    """Check information"""
    name: str
    module: str
    func: CheckFunction
    description: str = ""
    gating: bool = True
    applies: Optional[Callable[[RunContext], bool]] = None


@dataclass
class CheckExecution:
    """Check execution instance"""
    info: CheckInfo
    status: CheckStatus = CheckStatus.PENDING
    reports: List[ExponentReport] = None
    error: Optional[str] = None
    start_time: Optional[datetime] = None
    duration: float = 0.0

    def __post_init__(self):
        if self.reports is None:
            self.reports = []

    @property
    def blocking(self) -> bool:
        """A failed verdict on any check, or an error in a gating one"""
        return self.status is CheckStatus.FAILED or (self.info.gating and self.status is CheckStatus.ERROR)

    def summary(self) -> Dict[str, Any]:
        return {
            "check": self.info.name,
            "module": self.info.module,
            "status": self.status.value,
            "gating": self.info.gating,
            "error": self.error,
            "duration": self.duration,
            "reports": [r.summary() for r in self.reports],
        }


# ---------------------------------------------------------------- asymptotics

def _s_bound(name: str, part: str, alpha: float, predicted_of, anchored: bool, equation: str) -> CheckFunction:
    def run(ctx: RunContext) -> List[ExponentReport]:
        checks = ctx.checks
        values = s_norm_series(ctx.profile, part, alpha, ctx.params.plus_epsilon)
        window = checks.anchored_fit_window if anchored else checks.fit_window
        norm = f"omega^({alpha:g}+n/2±0)"
        return [verify_bound(name, ctx.profile.times, values, predicted_of(ctx.params.exponents),
                             checks.band_limit, checks.slope_tol, window, norm, equation,
                             module="asymptotics")]
    return run


def _remainder(ctx: RunContext) -> List[ExponentReport]:
    checks = ctx.checks
    table = ctx.params.exponents
    values = remainder_series(ctx.profile, 0.0, ctx.params.plus_epsilon)
    return [verify_bound("s_minus_s0", ctx.profile.times, values, table.lambda_(0) + table.lambda_(1) - 1.0,
                         checks.band_limit, checks.slope_tol, checks.fit_window, "omega^(n/2±0)",
                         "||omega^(n/2±0)(s - s_0)|| <= C t^(lambda_0 + lambda_1 - 1)", module="asymptotics")]


def _phase_growth(ctx: RunContext) -> List[ExponentReport]:
    checks = ctx.checks
    return [phase_growth_check(ctx.profile, ctx.a0, ctx.a1, ctx.stored("phase_growth"),
                               checks.calibration_slack, checks.slope_tol, checks.anchored_fit_window)]


# ---------------------------------------------------------------- cauchy_solver

def _fixed_point(ctx: RunContext) -> List[ExponentReport]:
    result = ctx.result
    sup_norm = ctx._cached("sup_norm", lambda: float(
        max(hs_norm(u, ctx.params.rho) for u in result.trajectory.fields())))
    contracting = all(r < CONTRACTION_LIMIT for r in result.ratios)
    report = ExponentReport("fixed_point", "H^rho", "sup_t ||v; H^rho|| <= 2 a0", float("nan"),
                            kind="arithmetic", module="cauchy_solver")
    report.detail.update(result.summary())
    report.detail.update({"sup_norm": sup_norm, "a0": ctx.a0})
    passed = result.converged and contracting and sup_norm <= 2.0 * ctx.a0 * (1 + 1e-12)
    report.verdict = PASS if passed else FAIL
    return [report]


def _conservation(ctx: RunContext) -> List[ExponentReport]:
    solver = ExponentReport("l2_conservation", "L2", "||v'(t)|| = ||v'_0||", float("nan"),
                            kind="arithmetic", module="cauchy_solver")
    drift = max(ctx.result.l2_drifts) if ctx.result.l2_drifts else 0.0
    solver.detail["l2_drift"] = drift
    solver.verdict = PASS if drift < CONSERVATION_TOL else FAIL

    transport = ExponentReport("va_mass", "L2", "||v_a(t)|| = ||v_0||", float("nan"),
                               kind="arithmetic", module="asymptotics")
    mass = ctx.profile.diagnostics.get("va_mass_drift", 0.0)
    transport.detail["va_mass_drift"] = mass
    transport.verdict = PASS if mass < CONSERVATION_TOL else FAIL
    return [solver, transport]


def _holder_modulus(ctx: RunContext) -> List[ExponentReport]:
    checks = ctx.checks
    return [holder_continuity_check(ctx.trajectory, ctx.params, ctx.rho_prime, checks.slope_tol, checks.band_limit)]


def _gronwall(ctx: RunContext) -> List[ExponentReport]:
    required = calibrate_gronwall_constant(ctx.trajectory, ctx.driver_norm, ctx.a1, ctx.params, ctx.rho_prime)
    return [calibration_check("gronwall_constant", required, ctx.stored("gronwall_constant"),
                              ctx.checks.calibration_slack,
                              "||omega^rho' v'(t)|| <= ||omega^rho' v'(t_1)|| exp{C a^2 (1+a^2)(1+a_1^2)^2 |t-t_1|^e}")]


def _holder_constant(ctx: RunContext) -> List[ExponentReport]:
    required = calibrate_holder_constant(ctx.trajectory, ctx.driver_norm, ctx.a1, ctx.params, ctx.rho_prime)
    return [calibration_check("holder_constant", required, ctx.stored("holder_constant"),
                              ctx.checks.calibration_slack, HOLDER_BOUND)]


def _difference(ctx: RunContext) -> List[ExponentReport]:
    result = ctx.result
    monitor = difference_monitor(result.previous, result.trajectory, result.driver_of_previous,
                                 result.previous, ctx.params, ctx.rho_prime)
    report = calibration_check("difference_constant", monitor.supremum, ctx.stored("difference_constant"),
                               ctx.checks.calibration_slack,
                               "sup ||v'_-; H^rho'|| <= C t^(2 gamma + lambda_1 - 1) sup ||v_-; H^rho||")
    report.times, report.raw = monitor.times, monitor.ratios
    return [report]


# ---------------------------------------------------------------- estimates_lab

def _v_bound(name: str, order: float, predicted_of, equation: str) -> CheckFunction:
    """order is the offset c in omega^(2 sigma - c - n/2), sigma = rho"""
    def run(ctx: RunContext) -> List[ExponentReport]:
        checks = ctx.checks
        params = ctx.params
        spec = NormSpec(2.0 * params.rho - order - params.n / 2.0)
        decomposition = ctx.decomposition
        values = decomposition.norm_series(name, spec)
        return [verify_bound(name, decomposition.times, values, predicted_of(params.exponents),
                             checks.band_limit, checks.slope_tol, checks.fit_window, spec.label, equation)]
    return run


def _v4_pairing(ctx: RunContext) -> List[ExponentReport]:
    checks = ctx.checks
    table = ctx.params.exponents
    sigma = ctx.params.rho
    predicted = table.lambda_(0) + 1.0
    if sigma <= 1.0:
        predicted = min(predicted, table.lambda_star(sigma) + 1.0)
    decomposition = ctx.decomposition
    reports = []
    for scale, psi in zip(PAIRING_SCALES, bump_family(decomposition.grid, PAIRING_SCALES)):
        values = v4_pairing_series(decomposition, psi)
        report = verify_bound(f"V4_pairing_r{scale:g}", decomposition.times, values, predicted,
                              checks.band_limit, checks.slope_tol, checks.fit_window, "<psi, .>",
                              "|<psi, V4(t)>| <= C a^4 {t^(lambda_0+1) + chi(sigma<=1) t^(lambda_star+1)}")
        report.detail["psi_scale"] = scale
        reports.append(report)
    return reports


def _lemma_low(sigma_prime_of) -> CheckFunction:
    def run(ctx: RunContext) -> List[ExponentReport]:
        checks = ctx.checks
        sigma_prime = sigma_prime_of(ctx)
        predicted = lemma_low_exponents(ctx.params.exponents, sigma_prime)
        names = predicted if ctx.interacting else {"V1": predicted["V1"]}
        decomposition = ctx.decomposition
        reports = []
        for name in names:
            values = lemma_low_series(decomposition, name, ctx.params, sigma_prime)
            reports.append(verify_bound(
                f"low_{name}_sp{sigma_prime:g}", decomposition.times, values, predicted[name],
                checks.band_limit, checks.slope_tol, checks.fit_window,
                f"omega^(gamma-{sigma_prime:g}-n/2) chi_L",
                f"t^(gamma-2) ||omega^(gamma-sigma'-n/2) chi_L {name}|| <= C t^mu"))
        return reports
    return run


def _identity_report(name: str, equation: str, series: np.ndarray, tol: float) -> ExponentReport:
    report = ExponentReport(name, "L2", equation, float("nan"), kind="arithmetic")
    worst = float(np.max(series)) if series.size else 0.0
    report.detail.update({"max": worst, "tolerance": tol})
    report.verdict = PASS if worst < tol else FAIL
    return report


def _decomposition_identity(ctx: RunContext) -> List[ExponentReport]:
    decomposition = ctx.decomposition
    return [
        _identity_report("decomposition_residual", "|v|^2 - |v_a|^2 = V1 + V2",
                         decomposition.residual_norms(), RESIDUAL_TOL),
        _identity_report("subdecomposition_defect", "V2 = V3 + V4 + V5",
                         decomposition.subdecomposition_defect(), SUBDECOMPOSITION_TOL),
    ]


def _difference_identity(ctx: RunContext) -> List[ExponentReport]:
    decomposition = ctx.difference_decomposition
    report = _identity_report("difference_residual", "|v|^2_- = V1_- + V2_-",
                              decomposition.residual_norms(), RESIDUAL_TOL)
    return [report]


def _ordering(ctx: RunContext) -> List[ExponentReport]:
    return [exponent_ordering_sweep(ctx.params.n, seed=ctx.config.initial_data.seed)]


def _inequality(lemma: str) -> CheckFunction:
    def run(ctx: RunContext) -> List[ExponentReport]:
        checks = ctx.checks
        spot = inequality_spot_check(lemma, checks.inequality_trials, ctx.config.initial_data.seed,
                                     tuple(checks.inequality_points))
        report = ExponentReport(f"inequality_{lemma}", "worst ratio", spot.lemma, float("nan"),
                                kind="inequality", module="estimates_lab")
        report.detail.update(spot.summary())
        report.verdict = PASS if spot.stable else FAIL
        return [report]
    return run


# ---------------------------------------------------------------- transforms

def _uc_growth(ctx: RunContext) -> List[ExponentReport]:
    checks = ctx.checks
    return [fh_growth_check(ctx.dressed, ctx.a0, ctx.params, ctx.stored("uc_growth"),
                            checks.calibration_slack, checks.slope_tol, checks.fit_window)]


def _phase_dressing(ctx: RunContext) -> List[ExponentReport]:
    return [phase_bound_check(ctx.dressed, ctx.params, ctx.stored("phase_dressing"), ctx.checks.calibration_slack)]


def _norm_identity(ctx: RunContext) -> List[ExponentReport]:
    dressed = ctx.dressed
    picks = sorted({0, len(dressed) // 2, len(dressed) - 1})
    defects = np.array([norm_identity_defect(dressed[k].u_c, dressed[k].t, ctx.params.rho) for k in picks])
    report = _identity_report("norm_identity", "||w~(1/t); FH^rho|| = ||u_c(t); H^rho||",
                              defects, NORM_IDENTITY_TOL)
    report.detail["times"] = [dressed[k].t for k in picks]
    return [report]


def _interacting(ctx: RunContext) -> bool:
    return ctx.interacting


def _corrected(ctx: RunContext) -> bool:
    return ctx.interacting and ctx.profile.level >= 1


def _iterated(ctx: RunContext) -> bool:
    return ctx.result.iterations >= 2


def default_checks() -> List[CheckInfo]:
    """The full registry, in report order"""
    lam = lambda a: (lambda table: table.lambda_(a) - 1.0)
    both = lambda table: table.lambda_(0) + table.lambda_(1) - 1.0
    registry = [
        CheckInfo("s0_alpha0", "asymptotics", _s_bound("s0_alpha0", "s0", 0.0, lam(0), True,
                  "||omega^(n/2±0) s_0|| <= C a0^2 t^(lambda_0 - 1)"), "s_0 decay", applies=_interacting),
        CheckInfo("s0_alpha1", "asymptotics", _s_bound("s0_alpha1", "s0", 1.0, lam(1), True,
                  "||omega^(1+n/2±0) s_0|| <= C a0^2 t^(lambda_1 - 1)"), "s_0 decay, one derivative",
                  applies=_interacting),
        CheckInfo("sb", "asymptotics", _s_bound("sb", "sb", 0.0, both, True,
                  "||omega^(n/2±0) s_b|| <= C a0^4 t^(lambda_0 + lambda_1 - 1)"), "s_b decay", applies=_corrected),
        CheckInfo("sc", "asymptotics", _s_bound("sc", "sc", 0.0, both, False,
                  "||omega^(n/2±0) s_c|| <= C a0^2 a_a^2 t^(lambda_0 + lambda_1 - 1)"), "s_c decay",
                  applies=_corrected),
        CheckInfo("s_minus_s0", "asymptotics", _remainder, "remainder s - s_0", applies=_corrected),
        CheckInfo("phase_growth", "asymptotics", _phase_growth, "phase growth and constant", applies=_interacting),
        CheckInfo("fixed_point", "cauchy_solver", _fixed_point, "convergence, contraction, 2 a0 ball"),
        CheckInfo("conservation", "cauchy_solver", _conservation, "L2 conservation of v' and v_a"),
        CheckInfo("holder_modulus", "cauchy_solver", _holder_modulus, "modulus of continuity at t -> 0"),
        CheckInfo("gronwall_constant", "cauchy_solver", _gronwall, "Gronwall envelope constant"),
        CheckInfo("holder_constant", "cauchy_solver", _holder_constant, "Hoelder bound constant"),
        CheckInfo("difference_constant", "cauchy_solver", _difference, "difference estimate constant",
                  applies=_iterated),
        CheckInfo("V1", "estimates_lab", _v_bound("V1", 2.0, lambda table: 1.0,
                  "||omega^(2 sigma - 2 - n/2) V1|| <= C a^2 t"), "V1 bound"),
        CheckInfo("V2", "estimates_lab", _v_bound("V2", 1.0, lambda table: table.lambda_(0),
                  "||omega^(2 sigma - 1 - n/2) V2|| <= C a^2 a_1^2 t^lambda_0 (1 + a^2 t^lambda_1)"),
                  "V2 rough bound", gating=False, applies=_interacting),
        CheckInfo("V3", "estimates_lab", _v_bound("V3", 1.0, lambda table: table.lambda_(0) + table.lambda_(1),
                  "||omega^(2 sigma - 1 - n/2) V3|| <= C a^4 a_1^2 t^(lambda_0 + lambda_1)"), "V3 bound",
                  applies=_corrected),
        CheckInfo("V4", "estimates_lab", _v_bound("V4", 3.0, lambda table: table.lambda_(0) + 1.0,
                  "||omega^(2 sigma - 3 - n/2) V4|| <= C a^4 t^(lambda_0 + 1)"), "V4 bound (sigma > 1)",
                  applies=lambda ctx: ctx.interacting and ctx.params.rho > 1.0),
        CheckInfo("V4_pairing", "estimates_lab", _v4_pairing, "V4 against Gaussian test functions",
                  gating=False, applies=_interacting),
        CheckInfo("V5", "estimates_lab", _v_bound("V5", 2.0, lambda table: 2.0 * table.lambda_(0),
                  "||omega^(2 sigma - 2 - n/2) V5|| <= C a^4 a_1^2 t^(2 lambda_0) (1 + a^2 t^lambda_1)"),
                  "V5 bound", applies=_interacting),
        CheckInfo("low_frequency", "estimates_lab", _lemma_low(lambda ctx: ctx.checks.sigma_prime),
                  "chi_L V_j at sigma'", gating=False),
        CheckInfo("low_frequency_zero", "estimates_lab", _lemma_low(lambda ctx: 0.0),
                  "chi_L V_j at sigma' = 0", gating=False),
        CheckInfo("decomposition_identity", "estimates_lab", _decomposition_identity, "V1 + V2 identity"),
        CheckInfo("difference_identity", "estimates_lab", _difference_identity,
                  "difference variant of the identity", gating=False, applies=_iterated),
        CheckInfo("exponent_ordering", "hartree_core", _ordering, "exponent arithmetic"),
    ]
    registry.extend(
        CheckInfo(f"inequality_{lemma}", "estimates_lab", _inequality(lemma), f"{lemma} inequality spot check")
        for lemma in LEMMAS
    )
    registry.extend([
        CheckInfo("uc_growth", "transforms", _uc_growth, "growth of the dressed amplitude"),
        CheckInfo("phase_dressing", "transforms", _phase_dressing, "phase dressing constant"),
        CheckInfo("norm_identity", "transforms", _norm_identity, "pseudoconformal norm identity"),
    ])
    return registry


class CheckRunner:
    """Concurrent bound check execution"""

    def __init__(self, context: RunContext, threads: int = 1):
        self.context = context
        self.threads = max(1, int(threads))

        # Check registry
        self.checks: Dict[str, CheckInfo] = {}
        enabled = set(context.checks.enabled)
        for info in default_checks():
            if not enabled or info.name in enabled:
                self.register_check(info)

        unknown = enabled - set(self.checks)
        if unknown:
            logger.warning(f"Unknown checks ignored: {', '.join(sorted(unknown))}")

        logger.info("Check runner initialized")

    def register_check(self, info: CheckInfo):
        self.checks[info.name] = info
        logger.debug(f"Registered check: {info.name}")

    def list_checks(self) -> List[CheckInfo]:
        return list(self.checks.values())

    def get_checks_by_module(self, module: str) -> List[CheckInfo]:
        return [info for info in self.checks.values() if info.module == module]

    def execute(self, info: CheckInfo) -> CheckExecution:
        """Run one check; failures are recorded, never raised"""
        execution = CheckExecution(info, start_time=datetime.now())
        if info.applies is not None and not info.applies(self.context):
            execution.status = CheckStatus.SKIPPED
            logger.debug(f"Check {info.name} skipped")
            return execution

        execution.status = CheckStatus.RUNNING
        started = time.perf_counter()
        try:
            reports = info.func(self.context)
            for report in reports:
                report.module = info.module
                report.gating = info.gating
            execution.reports = reports
            passed = all(r.passed for r in reports)
            execution.status = CheckStatus.PASSED if passed else CheckStatus.FAILED
        except (LabError, ArithmeticError, ValueError) as e:
            logger.error(f"Check {info.name} failed", exception=e)
            execution.status = CheckStatus.ERROR
            execution.error = f"{type(e).__name__}: {e}"
        execution.duration = time.perf_counter() - started

        logger.log_run_record("check", name=info.name, status=execution.status.value,
                              verdicts=[r.verdict for r in execution.reports],
                              slopes=[r.slope for r in execution.reports], duration=execution.duration)
        return execution

    def run_all(self) -> List[CheckExecution]:
        """Evaluate every registered check, results in registry order"""
        infos = self.list_checks()
        logger.info(f"Running {len(infos)} checks on {self.threads} thread(s)")
        if self.threads == 1:
            return [self.execute(info) for info in infos]
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            return list(pool.map(self.execute, infos))


def required_constants(executions: List[CheckExecution]) -> Dict[str, float]:
    """Constants required on this run, keyed like calibration.constants"""
    constants: Dict[str, float] = {}
    for execution in executions:
        for report in execution.reports:
            required = report.detail.get("required")
            if required is not None and math.isfinite(required):
                constants[report.name] = float(required)
    return constants


def any_blocking(executions: List[CheckExecution]) -> bool:
    return any(e.blocking for e in executions)


__all__ = [
    'CheckStatus', 'CheckInfo', 'CheckExecution', 'RunContext', 'CheckRunner', 'default_checks',
    'required_constants', 'any_blocking',
]
