"""
Inequality Toolbox Spot Checks
==============================

Random band-limited samples of the interpolation, Leibniz, product and
commutator inequalities. Each check reports the worst observed ratio
lhs / rhs on every grid; a bounded, refinement-stable worst ratio is the
observable content of "lhs <= C rhs".
"""

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from ..core.errors import HypothesisError
from ..core.logger import logger
from .grid_spectral import GridSpec, SpectralField, apply_omega_power, gradient, inner_product, lebesgue_norm
from .initial_data import random_band_limited

BOX_LENGTH = 20.0
BAND = 2.0
ENVELOPE = 3.0
STABILITY_FACTOR = 2.0


def _lebesgue_index(delta: float, n: int) -> float:
    """r with delta(r) = delta"""
    gap = n / 2.0 - delta
    if gap <= 1e-12:
        return math.inf
    return n / gap


def _require(condition: bool, description: str):
    if not condition:
        raise HypothesisError(description)


def _omega_lr(u: SpectralField, sigma: float, r: float) -> float:
    return lebesgue_norm(apply_omega_power(u, sigma), r)


@dataclass(frozen=True)
class InterpolationInequality:
    """||omega^sigma u||_p <= C ||u||_q^(1-theta) ||omega^rho u||_r^theta"""
    sigma: float = 0.5
    rho: float = 1.0
    q: float = 4.0
    r: float = 2.0
    theta: float = 0.5
    n: int = 2

    @property
    def p(self) -> float:
        inverse = (self.sigma + (1 - self.theta) * self.n / self.q
                   + self.theta * (self.n / self.r - self.rho)) / self.n
        return math.inf if abs(inverse) < 1e-12 else 1.0 / inverse

    def validate(self):
        _require(1 < self.q < math.inf and 1 < self.r < math.inf, "1 < q, r < infinity")
        _require(0 <= self.sigma <= self.rho and self.rho > 0, "0 <= sigma <= rho with rho > 0")
        _require(self.sigma < self.rho or self.theta == 1.0, "sigma = rho only at theta = 1")
        _require(self.sigma / self.rho <= self.theta <= 1.0, "sigma / rho <= theta <= 1")
        p = self.p
        _require(p > 1, f"1 < p (got p = {p:g})")
        if math.isinf(p):
            _require(self.rho - self.sigma > self.n / self.r, "rho - sigma > n / r when p = infinity")

    def sides(self, u: SpectralField, v: SpectralField) -> Tuple[float, float]:
        lhs = _omega_lr(u, self.sigma, self.p)
        rhs = lebesgue_norm(u, self.q) ** (1 - self.theta) * _omega_lr(u, self.rho, self.r) ** self.theta
        return lhs, rhs


@dataclass(frozen=True)
class LeibnizInequality:
    """||omega^sigma (uv)||_r <= C (||omega^sigma u||_r1 ||v||_r2 + ||omega^sigma v||_r3 ||u||_r4)"""
    sigma: float = 0.5
    r: float = 2.0
    r1: float = 4.0
    r2: float = 4.0
    r3: float = 4.0
    r4: float = 4.0
    n: int = 2

    def validate(self):
        for name in ("r", "r1", "r3"):
            value = getattr(self, name)
            _require(1 < value < math.inf, f"1 < {name} < infinity")
        _require(self.sigma >= 0, "sigma >= 0")
        _require(math.isclose(1 / self.r, 1 / self.r1 + 1 / self.r2, abs_tol=1e-12), "1/r = 1/r1 + 1/r2")
        _require(math.isclose(1 / self.r, 1 / self.r3 + 1 / self.r4, abs_tol=1e-12), "1/r = 1/r3 + 1/r4")

    def sides(self, u: SpectralField, v: SpectralField) -> Tuple[float, float]:
        lhs = _omega_lr(u * v, self.sigma, self.r)
        rhs = (_omega_lr(u, self.sigma, self.r1) * lebesgue_norm(v, self.r2)
               + _omega_lr(v, self.sigma, self.r3) * lebesgue_norm(u, self.r4))
        return lhs, rhs


@dataclass(frozen=True)
class ProductInequality:
    """||omega^(sigma - n/2) (uv)|| <= C ||omega^sigma1 u|| ||omega^sigma2 v||"""
    sigma1: float = 0.4
    sigma2: float = 0.6
    n: int = 2

    def validate(self):
        _require(self.sigma1 + self.sigma2 > 0, "0 < sigma = sigma1 + sigma2")
        _require(max(self.sigma1, self.sigma2) < self.n / 2.0, "sigma1 v sigma2 < n/2")

    def sides(self, u: SpectralField, v: SpectralField) -> Tuple[float, float]:
        sigma = self.sigma1 + self.sigma2
        lhs = _omega_lr(u * v, sigma - self.n / 2.0, 2.0)
        rhs = _omega_lr(u, self.sigma1, 2.0) * _omega_lr(v, self.sigma2, 2.0)
        return lhs, rhs


@dataclass(frozen=True)
class CommutatorInequality:
    """|<P1 u, [omega^lambda, m] P2 v>| <= C ||m; H^sigma0 n grad^-1 omega^(1-nu) L^q0|| ||u; H^sigma1|| ||v; H^sigma2||

    P_i = omega^alpha_i; all Besov indices are (2, 2). The default is the
    instance that controls the transport term of the linearized flow.
    """
    lam: float = 1.0
    alpha1: float = 0.0
    alpha2: float = 1.0
    sigma0: float = 2.0
    sigma1: float = 0.5
    sigma2: float = 0.5
    nu: float = 1.0
    n: int = 2

    @property
    def q0(self) -> float:
        return _lebesgue_index(self.sigma0 - self.nu, self.n)

    def validate(self):
        _require(self.lam > 0, "lambda > 0")
        _require(self.alpha1 >= 0 and self.alpha2 >= 0, "alpha_i >= 0")
        _require(0 <= self.nu <= 1, "0 <= nu <= 1")
        order = self.lam + self.alpha1 + self.alpha2
        _require(math.isclose(self.sigma0 + self.sigma1 + self.sigma2, order + self.n / 2.0, abs_tol=1e-12),
                 "sigma0 + sigma1 + sigma2 = lambda + alpha1 + alpha2 + n/2")
        _require(self.sigma0 + min(self.sigma1, self.sigma2) >= order - 1e-12,
                 "sigma0 + (sigma1 ^ sigma2) >= lambda + alpha1 + alpha2")
        _require(self.sigma1 + self.sigma2 >= order - self.nu - 1e-12,
                 "sigma1 + sigma2 >= lambda + alpha1 + alpha2 - nu")
        delta_q0 = self.sigma0 - self.nu
        _require(-self.n / 2.0 <= delta_q0 <= self.n / 2.0, "delta(q0) = sigma0 - nu within [-n/2, n/2]")
        for sigma in (self.sigma1, self.sigma2):
            _require(sigma < self.n / 2.0, "sigma_i < n/2 for the Lebesgue parts of u and v")

    def _m_norm(self, m: SpectralField) -> float:
        flux = gradient(apply_omega_power(m, self.nu - 1.0))
        pointwise = np.sqrt(sum(np.abs(c.values) ** 2 for c in flux.components))
        grid = m.grid
        if math.isinf(self.q0):
            lebesgue = float(np.max(pointwise))
        else:
            lebesgue = float((grid.cell_volume * np.sum(pointwise ** self.q0)) ** (1.0 / self.q0))
        return _omega_lr(m, self.sigma0, 2.0) + lebesgue

    def sides(self, u: SpectralField, v: SpectralField, m: SpectralField) -> Tuple[float, float]:
        p2v = apply_omega_power(v, self.alpha2)
        commutator = apply_omega_power(m * p2v, self.lam) - m * apply_omega_power(p2v, self.lam)
        lhs = abs(inner_product(apply_omega_power(u, self.alpha1), commutator))
        u_norm = _omega_lr(u, self.sigma1, 2.0) + lebesgue_norm(u, _lebesgue_index(self.sigma1, self.n))
        v_norm = _omega_lr(v, self.sigma2, 2.0) + lebesgue_norm(v, _lebesgue_index(self.sigma2, self.n))
        return lhs, self._m_norm(m) * u_norm * v_norm


LEMMAS: Dict[str, Callable[..., object]] = {
    "interpolation": InterpolationInequality,
    "leibniz": LeibnizInequality,
    "product": ProductInequality,
    "commutator": CommutatorInequality,
}


@dataclass
class InequalityReport:
    """Worst observed constant per grid size"""
    lemma: str
    parameters: Dict[str, float]
    trials: int
    worst: Dict[int, float] = field(default_factory=dict)

    @property
    def spread(self) -> float:
        values = [w for w in self.worst.values() if w > 0]
        if not values:
            return 1.0
        return max(values) / min(values)

    @property
    def stable(self) -> bool:
        finite = all(math.isfinite(w) for w in self.worst.values())
        return finite and self.spread <= STABILITY_FACTOR

    def summary(self) -> Dict[str, object]:
        return {
            "lemma": self.lemma,
            "parameters": self.parameters,
            "trials": self.trials,
            "worst_ratio": {str(k): v for k, v in self.worst.items()},
            "spread": self.spread,
            "stable": self.stable,
        }


def _sample(grid: GridSpec, seed: int, trial: int, count: int) -> List[SpectralField]:
    rng = np.random.default_rng([seed, trial])
    return [random_band_limited(grid, BAND, rng, ENVELOPE) for _ in range(count)]


def spot_check(lemma: str, trials: int = 100, seed: int = 0, points: Sequence[int] = (32, 64, 128),
               box_length: float = BOX_LENGTH, **parameters) -> InequalityReport:
    """Worst lhs / rhs over random band-limited samples on each grid size"""
    if lemma not in LEMMAS:
        raise HypothesisError(f"unknown inequality '{lemma}' (choose from {', '.join(LEMMAS)})")
    inequality = LEMMAS[lemma](**parameters)
    inequality.validate()

    report = InequalityReport(lemma, asdict(inequality), trials)
    needs = 3 if lemma == "commutator" else 2
    for N in points:
        grid = GridSpec(inequality.n, N, box_length)
        worst = 0.0
        for trial in range(trials):
            fields = _sample(grid, seed, trial, needs)
            lhs, rhs = inequality.sides(*fields)
            if rhs > 0:
                worst = max(worst, lhs / rhs)
            elif lhs > 0:
                worst = math.inf
        report.worst[N] = worst
    logger.debug(f"Inequality '{lemma}': worst ratios {report.worst}")
    return report


__all__ = [
    'InterpolationInequality', 'LeibnizInequality', 'ProductInequality', 'CommutatorInequality',
    'InequalityReport', 'LEMMAS', 'spot_check',
]
