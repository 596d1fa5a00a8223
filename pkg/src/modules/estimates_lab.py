"""
Estimates Lab
=============

Verification harness for the decay and growth bounds: the V1..V5
decomposition of |v|^2 - |v_a|^2, log-log exponent fits, normalized-band
verdicts, Hoelder moduli and calibrate-once constants.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from ..core.errors import FitError, ShapeError
from ..core.logger import logger
from .asymptotics import AsymptoticProfile, remainder_norm_series
from .grid_spectral import (
    GridSpec, NormSpec, SpectralField, VectorField, divergence, inner_product, laplacian,
    low_multiplier, sobolev_norm,
)
from .hartree_core import ExponentTable, ModelParams
from .time_mesh import Trajectory, cumulative_integral

MIN_FIT_POINTS = 8
PASS = "pass"
FAIL = "fail"
HOLDER_BOUND = "||v(t) - v(t_1)|| <= C (t - t_1)^(rho' gamma ^ (3 gamma - 1))"


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    ci: float
    points: int


@dataclass
class ExponentReport:
    """Verdict on one bound of the form ||quantity(t)|| <= C t^mu"""
    name: str
    norm: str
    equation: str
    predicted: float
    slope: float = float("nan")
    ci: float = float("nan")
    band_ratio: float = float("nan")
    verdict: str = FAIL
    window: Tuple[float, float] = (float("nan"), float("nan"))
    gating: bool = True
    kind: str = "decay"
    module: str = "estimates_lab"
    detail: Dict[str, Any] = field(default_factory=dict)
    times: Optional[np.ndarray] = None
    raw: Optional[np.ndarray] = None
    normalized: Optional[np.ndarray] = None

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    def to_frame(self) -> pd.DataFrame:
        """Series columns t, raw_norm, normalized, predicted_exponent"""
        if self.times is None:
            return pd.DataFrame(columns=["t", "raw_norm", "normalized", "predicted_exponent"])
        normalized = self.normalized if self.normalized is not None else np.full_like(self.times, np.nan)
        return pd.DataFrame({
            "t": self.times,
            "raw_norm": self.raw,
            "normalized": normalized,
            "predicted_exponent": np.full_like(self.times, self.predicted, dtype=float),
        })

    def summary(self) -> Dict[str, Any]:
        def clean(value):
            if isinstance(value, float) and not math.isfinite(value):
                return None
            return value
        return {
            "name": self.name,
            "module": self.module,
            "norm": self.norm,
            "equation": self.equation,
            "predicted_exponent": clean(self.predicted),
            "fitted_slope": clean(self.slope),
            "slope_ci": clean(self.ci),
            "band_ratio": clean(self.band_ratio),
            "window": [clean(w) for w in self.window],
            "verdict": self.verdict,
            "gating": self.gating,
            "kind": self.kind,
            "detail": self.detail,
        }


def effective_window(window: Tuple[float, float], t_first: float, t_last: float) -> Tuple[float, float]:
    """Clip a fit window to the stored range, keeping its decade width when shifted"""
    lo, hi = window
    if hi > t_last:
        lo, hi = t_last * lo / hi, t_last
    return max(lo, t_first), hi


def _in_window(times: np.ndarray, window: Tuple[float, float]) -> np.ndarray:
    lo, hi = window
    return (times >= lo * (1 - 1e-12)) & (times <= hi * (1 + 1e-12))


def fit_decay_exponent(times: Sequence[float], values: Sequence[float],
                       window: Optional[Tuple[float, float]] = None) -> FitResult:
    """Least squares slope of log value against log t with a 95% interval"""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if window is not None:
        mask = _in_window(times, window)
        times, values = times[mask], values[mask]
    if times.size < MIN_FIT_POINTS:
        raise FitError(f"fit needs at least {MIN_FIT_POINTS} points (got {times.size})")
    if np.any(values <= 0) or np.any(times <= 0):
        raise FitError("fit needs strictly positive times and values")

    x, y = np.log(times), np.log(values)
    fit = stats.linregress(x, y)
    ci = float(stats.t.ppf(0.975, times.size - 2) * fit.stderr)
    return FitResult(float(fit.slope), float(fit.intercept), ci, int(times.size))


def verify_bound(name: str, times: np.ndarray, values: np.ndarray, predicted: float,
                 band_limit: float = 10.0, slope_tol: float = 0.05,
                 window: Tuple[float, float] = (1e-3, 1e-1), norm: str = "", equation: str = "",
                 gating: bool = True, module: str = "estimates_lab") -> ExponentReport:
    """Normalize by t^predicted; pass iff band <= band_limit and slope >= predicted - slope_tol"""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    window = effective_window(window, float(times[0]), float(times[-1]))
    mask = _in_window(times, window)
    if not np.any(mask):
        raise FitError(f"empty fit window {window} for '{name}'")

    normalized = values / times ** predicted
    report = ExponentReport(name=name, norm=norm, equation=equation, predicted=predicted,
                            window=window, gating=gating, module=module,
                            times=times, raw=values, normalized=normalized)
    inside = normalized[mask]
    if np.all(inside > 0):
        report.band_ratio = float(np.max(inside) / np.min(inside))
    else:
        report.band_ratio = float("inf")
    fit = fit_decay_exponent(times, values, window)
    report.slope, report.ci = fit.slope, fit.ci
    report.detail["fit_points"] = fit.points
    passed = report.band_ratio <= band_limit and fit.slope >= predicted - slope_tol
    report.verdict = PASS if passed else FAIL
    return report


@dataclass
class VDecomposition:
    """Terms of |v|^2 - |v_a|^2 = V1 + V2 and V2 = V3 + V4 + V5 on the solver nodes"""
    times: np.ndarray
    grid: GridSpec
    density_difference: np.ndarray
    V1: np.ndarray
    V2: np.ndarray
    V3: np.ndarray
    V4: np.ndarray
    V5: np.ndarray
    difference: bool = False

    TERMS = ("V1", "V2", "V3", "V4", "V5")

    def field(self, name: str, k: int) -> SpectralField:
        return SpectralField(self.grid, getattr(self, name)[k])

    def _l2(self, array: np.ndarray) -> np.ndarray:
        axes = tuple(range(1, array.ndim))
        return np.sqrt(self.grid.cell_volume * np.sum(array ** 2, axis=axes))

    @property
    def residual(self) -> np.ndarray:
        return self.density_difference - self.V1 - self.V2

    def residual_norms(self) -> np.ndarray:
        return self._l2(self.residual)

    def subdecomposition_defect(self) -> np.ndarray:
        return self._l2(self.V2 - self.V3 - self.V4 - self.V5)

    def norm_series(self, name: str, spec: NormSpec) -> np.ndarray:
        array = getattr(self, name)
        return np.array([sobolev_norm(SpectralField(self.grid, array[k]), spec) for k in range(len(self.times))])

    def half_difference(self, other: "VDecomposition") -> "VDecomposition":
        """(other - self)/2 term by term"""
        return VDecomposition(
            self.times, self.grid,
            0.5 * (other.density_difference - self.density_difference),
            *[0.5 * (getattr(other, name) - getattr(self, name)) for name in self.TERMS],
            difference=True,
        )


def _divergence_of(s: VectorField, density: SpectralField) -> np.ndarray:
    return divergence(s * density).values.real


def compute_v_decomposition(v_traj: Trajectory, va_traj: Trajectory, profile: AsymptoticProfile,
                            params: ModelParams,
                            pair: Optional[Tuple[Trajectory, Trajectory]] = None) -> VDecomposition:
    """Cumulative graded-quadrature terms V1..V5; pair=(v1, v2) gives the difference variants"""
    mesh = v_traj.mesh
    if va_traj.mesh != mesh:
        raise ShapeError("v and v_a trajectories use different meshes")
    if not mesh.is_prefix_of(profile.mesh):
        raise ShapeError("trajectory mesh is not a prefix of the profile mesh")
    if pair is not None:
        pair[0]._check(pair[1])
        if pair[0].mesh != mesh:
            raise ShapeError("difference pair uses a different mesh")

    grid = v_traj.grid
    shape = (mesh.K,) + grid.shape
    density_difference = np.empty(shape)
    w1 = np.empty(shape)
    f2 = np.empty(shape)
    f3 = np.empty(shape)
    s0_nodes: List[VectorField] = []

    for k in range(mesh.K):
        s, s0 = profile.s(k), profile.s0(k)
        s0_nodes.append(s0)
        if pair is None:
            v, va = v_traj.state(k), va_traj.state(k)
            density = v.abs2().real_part()
            density_a = va.abs2().real_part()
            density_difference[k] = density.values.real - density_a.values.real
            w1[k] = -np.imag(np.conj(v.values) * laplacian(v).values)
            f2[k] = _divergence_of(s, density) - _divergence_of(s0, density_a)
            f3[k] = _divergence_of(s - s0, density)
        else:
            v1, v2 = pair[0].state(k), pair[1].state(k)
            plus, minus = (v2 + v1) * 0.5, (v2 - v1) * 0.5
            density = SpectralField(grid, 2.0 * np.real(np.conj(plus.values) * minus.values))
            density_difference[k] = density.values.real
            w1[k] = -np.imag(np.conj(plus.values) * laplacian(minus).values
                             + np.conj(minus.values) * laplacian(plus).values)
            f2[k] = _divergence_of(s, density)
            f3[k] = _divergence_of(s - s0, density)

    nodes = mesh.nodes
    V1 = cumulative_integral(w1, nodes, include_origin=False)
    V2 = cumulative_integral(f2, nodes, include_origin=False)
    V3 = cumulative_integral(f3, nodes, include_origin=False)
    f4 = np.stack([_divergence_of(s0_nodes[k], SpectralField(grid, V1[k])) for k in range(mesh.K)])
    f5 = np.stack([_divergence_of(s0_nodes[k], SpectralField(grid, V2[k])) for k in range(mesh.K)])
    V4 = cumulative_integral(f4, nodes, include_origin=False)
    V5 = cumulative_integral(f5, nodes, include_origin=False)
    return VDecomposition(nodes.copy(), grid, density_difference, V1, V2, V3, V4, V5,
                          difference=pair is not None)


def bump_family(grid: GridSpec, scales: Sequence[float] = (0.5, 1.0, 2.0)) -> List[SpectralField]:
    """Gaussian test functions at several scales"""
    return [SpectralField(grid, np.exp(-grid.radius_squared / (2.0 * r ** 2))) for r in scales]


def v4_pairing_series(decomposition: VDecomposition, psi: SpectralField) -> np.ndarray:
    return np.array([abs(inner_product(psi, decomposition.field("V4", k)))
                     for k in range(len(decomposition.times))])


def lemma_low_series(decomposition: VDecomposition, name: str, params: ModelParams,
                     sigma_prime: float) -> np.ndarray:
    """t^(gamma-2) ||omega^(gamma - sigma' - n/2) chi_L V_j(t)||"""
    grid = decomposition.grid
    spec = NormSpec(params.gamma - sigma_prime - grid.n / 2.0)
    values = []
    for k, t in enumerate(decomposition.times):
        term = decomposition.field(name, k)
        low = SpectralField.from_coefficients(grid, low_multiplier(grid, t) * term.coefficients)
        values.append(t ** (params.gamma - 2.0) * sobolev_norm(low, spec))
    return np.array(values)


def lemma_low_exponents(table: ExponentTable, sigma_prime: float) -> Dict[str, float]:
    """Predicted exponents of the chi_L V_j bounds; sigma' = 0 uses lambda_j"""
    if sigma_prime == 0:
        first, second = table.lambda_(1), table.lambda_(2)
    else:
        first, second = table.mu(1, sigma_prime), table.mu(2, sigma_prime)
    lambda_0 = table.lambda_(0)
    return {
        "V1": first - 1.0,
        "V3": 2.0 * lambda_0 + first - 2.0,
        "V4": lambda_0 + second - 1.0,
        "V5": 2.0 * lambda_0 + first - 2.0,
    }


def s_norm_series(profile: AsymptoticProfile, part: str, alpha: float = 0.0,
                  pm_epsilon: float = 0.05) -> np.ndarray:
    """||omega^(alpha + n/2 ±0) s_part(t)|| over the profile nodes"""
    spec = NormSpec(alpha + profile.grid.n / 2.0, pm=True, pm_epsilon=pm_epsilon)
    getter = {"s0": profile.s0, "sb": profile.sb, "sc": profile.sc, "s": profile.s}[part]
    return np.array([sobolev_norm(getter(k), spec) for k in range(profile.mesh.K)])


def remainder_series(profile: AsymptoticProfile, alpha: float = 0.0, pm_epsilon: float = 0.05) -> np.ndarray:
    return remainder_norm_series(profile, alpha, pm_epsilon)


def phase_norm_series(profile: AsymptoticProfile) -> np.ndarray:
    """||omega^(n/2) phi(t)||"""
    spec = NormSpec(profile.grid.n / 2.0)
    return np.array([sobolev_norm(profile.phi(k), spec) for k in range(profile.mesh.K)])


def holder_continuity_check(v_traj: Trajectory, params: ModelParams, rho_prime: Optional[float] = None,
                            slope_tol: float = 0.05, band_limit: float = 10.0,
                            window: Optional[Tuple[float, float]] = None) -> ExponentReport:
    """Fit the modulus ||v(t) - v(t_1)|| against t - t_1"""
    rho_prime = params.rho if rho_prime is None else rho_prime
    predicted = params.exponents.holder_exponent(rho_prime)
    base = v_traj.state(0)
    gaps = v_traj.times[1:] - v_traj.times[0]
    moduli = np.array([(v_traj.state(k) - base).l2_norm() for k in range(1, len(v_traj))])

    positive = gaps > 0
    gaps, moduli = gaps[positive], moduli[positive]
    if window is None:
        window = (gaps[0], gaps[-1])
    if np.all(moduli == 0):
        report = ExponentReport("holder_modulus", "L2", HOLDER_BOUND, predicted, window=window,
                                module="cauchy_solver", times=gaps, raw=moduli)
        report.verdict = PASS
        report.detail["note"] = "trajectory is constant"
        return report
    return verify_bound("holder_modulus", gaps, moduli, predicted, band_limit=float("inf"),
                        slope_tol=slope_tol, window=window, norm="L2", equation=HOLDER_BOUND,
                        module="cauchy_solver")


def calibration_check(name: str, required: float, stored: Optional[float], slack: float = 2.0,
                      equation: str = "", module: str = "cauchy_solver", gating: bool = True) -> ExponentReport:
    """Pass iff the constant required on this run is within slack of the stored one"""
    report = ExponentReport(name=name, norm="constant", equation=equation, predicted=float("nan"),
                            kind="calibration", module=module, gating=gating)
    report.detail.update({"required": required, "stored": stored, "slack": slack})
    if stored is None:
        report.verdict = PASS
        report.detail["reference"] = True
        return report
    report.verdict = PASS if required <= stored * slack + 1e-300 else FAIL
    report.detail["reference"] = False
    return report


def exponent_ordering_sweep(n: int = 2, samples: int = 200, seed: int = 0) -> ExponentReport:
    """lambda ordering and lambda_star domination over sampled admissible (gamma, rho)"""
    rng = np.random.default_rng(seed)
    checked = ordering_failures = domination_failures = 0
    for _ in range(samples):
        gamma = rng.uniform(1.0 / 3.0, 0.5)
        lower, upper = 2.0 - 2.5 * gamma, n / 2.0
        if lower >= upper:
            continue
        rho = rng.uniform(lower, upper)
        table = ExponentTable(gamma, rho)
        checked += 1
        if not table.ordering_holds():
            ordering_failures += 1
        sigma = rng.uniform(0.5, rho)
        if not table.v4_second_term_dominated(sigma):
            domination_failures += 1

    report = ExponentReport("exponent_ordering", "arithmetic",
                            "lambda_0 + lambda_2 >= 2 lambda_0 + lambda_1 - 1", float("nan"),
                            kind="arithmetic", module="hartree_core")
    report.detail.update({"samples": checked, "ordering_failures": ordering_failures,
                          "domination_failures": domination_failures})
    report.verdict = PASS if checked > 0 and ordering_failures == 0 and domination_failures == 0 else FAIL
    logger.debug(f"Exponent ordering sweep over {checked} samples")
    return report


def inequality_spot_check(lemma: str, trials: int = 100, seed: int = 0, points=(32, 64, 128), **kwargs):
    """Worst-constant report for one inequality of the toolbox"""
    from .inequalities import spot_check
    return spot_check(lemma, trials=trials, seed=seed, points=points, **kwargs)


__all__ = [
    'PASS', 'FAIL', 'FitResult', 'ExponentReport', 'VDecomposition', 'effective_window',
    'fit_decay_exponent', 'verify_bound', 'compute_v_decomposition', 'bump_family',
    'v4_pairing_series', 'lemma_low_series', 'lemma_low_exponents', 's_norm_series',
    'remainder_series', 'phase_norm_series', 'holder_continuity_check', 'calibration_check',
    'exponent_ordering_sweep', 'inequality_spot_check',
]
