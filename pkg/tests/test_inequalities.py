"""Inequality toolbox spot checks"""

import math

import pytest

from src.core.errors import HypothesisError
from src.modules.estimates_lab import inequality_spot_check
from src.modules.inequalities import (
    CommutatorInequality, InequalityReport, InterpolationInequality, spot_check,
)


@pytest.mark.parametrize("lemma, parameters", [
    ("product", {"sigma1": 1.2}),
    ("product", {"sigma1": -0.5, "sigma2": 0.2}),
    ("leibniz", {"r1": 3.0}),
    ("interpolation", {"theta": 0.3}),
    ("interpolation", {"q": 1.0}),
    ("commutator", {"sigma0": 3.0}),
])
def test_hypothesis_violations(lemma, parameters):
    with pytest.raises(HypothesisError):
        spot_check(lemma, trials=1, points=(16,), **parameters)


def test_unknown_lemma():
    with pytest.raises(HypothesisError, match="unknown inequality"):
        spot_check("young", trials=1)


def test_interpolation_exponent():
    assert InterpolationInequality().p == pytest.approx(8.0 / 3.0)
    assert InterpolationInequality(sigma=1.0, rho=1.0, q=4.0, r=2.0, theta=1.0).p == pytest.approx(2.0)


def test_interpolation_identity_case():
    # sigma = rho and theta = 1 makes both sides the same norm
    report = spot_check("interpolation", trials=3, points=(32,), sigma=1.0, rho=1.0, theta=1.0)
    assert report.worst[32] == pytest.approx(1.0, rel=1e-10)


def test_product_is_refinement_stable():
    report = inequality_spot_check("product", trials=4, points=(32, 64))
    assert set(report.worst) == {32, 64}
    assert all(0 < w < math.inf for w in report.worst.values())
    assert report.stable
    assert report.spread < 1.05
    summary = report.summary()
    assert summary["lemma"] == "product"
    assert summary["parameters"]["sigma1"] == 0.4


def test_commutator_default_is_admissible():
    CommutatorInequality().validate()
    report = spot_check("commutator", trials=2, points=(32,))
    assert 0 <= report.worst[32] < math.inf


def test_report_stability():
    report = InequalityReport("product", {}, 1, worst={32: 1.0, 64: 3.0})
    assert report.spread == pytest.approx(3.0)
    assert not report.stable
    assert InequalityReport("product", {}, 1, worst={32: 0.0}).spread == 1.0
    assert not InequalityReport("product", {}, 1, worst={32: math.inf}).stable
