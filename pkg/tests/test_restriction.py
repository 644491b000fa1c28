import numpy as np
import pytest

from hypdec.classes.reports import RestrictionReport
from hypdec.field import FreqDensity
from hypdec.restriction import (
    CRITICAL_P,
    bilinear_bound,
    broad_restriction_ratio,
    fit_restriction,
    restriction_ratio,
)


@pytest.fixture
def small_density(rng) -> FreqDensity:
    return FreqDensity(np.exp(2j * np.pi * rng.random((8, 8))))


@pytest.mark.parametrize("p", [2.0, 6.5])
def test_restriction_rejects_p(small_density, p):
    with pytest.raises(ValueError):
        restriction_ratio(small_density, 4, p)


def test_restriction_ratio(small_density):
    report = restriction_ratio(small_density, 4, ensemble="random-phase")
    assert report.p == CRITICAL_P
    assert report.ensemble == "random-phase"
    assert report.rhs == pytest.approx(small_density.lp_norm(CRITICAL_P) ** CRITICAL_P)
    assert report.ratio > 0
    assert restriction_ratio(FreqDensity.zeros(8), 4).ratio == 0.0


def test_broad_restriction_ratio(small_density):
    report = broad_restriction_ratio(small_density, 4, A=2, K=2)
    assert report.lhs > 0
    assert report.parameters["A"] == 2 and report.parameters["K"] == 2
    assert report.as_row()["K_coupling"] == "R^(eps^10)"
    with pytest.raises(ValueError):
        broad_restriction_ratio(small_density, 4, A=1, K=2)
    with pytest.raises(ValueError):
        broad_restriction_ratio(small_density, 4, A=2, K=3)


def test_bilinear_bound_holds(small_density):
    report = bilinear_bound(small_density, 4, K=2)
    assert 0 < report.lhs <= report.rhs * (1 + 1e-12)
    assert bilinear_bound(FreqDensity.zeros(8), 4, K=2).degenerate


def test_fit_restriction():
    reports = [
        RestrictionReport(4, 3.0, 4.0, 1.0),
        RestrictionReport(4, 3.0, 1.0, 1.0),
        RestrictionReport(16, 3.0, 16.0, 1.0),
    ]
    assert fit_restriction(reports) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        fit_restriction(reports[:2])


def test_report_validation():
    with pytest.raises(ValueError):
        RestrictionReport(4, 2.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        RestrictionReport(4, 3.0, -1.0, 1.0)
