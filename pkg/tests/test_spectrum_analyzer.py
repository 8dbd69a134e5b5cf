import math

import numpy as np
import pytest

from models.reaction_models import kpp, nagumo, wake_threshold_weighted
from models.spectrum_analyzer import (Mechanism, SchrodingerOperator, SpectrumAnalyzer, Verdict, critical_beta,
                                      critical_beta_curve, marginal_stability_report, point_spectrum_selfadjoint,
                                      weighted_linearization)
from utils.config import Config
from utils.errors import ContractViolation


def _poschl_teller(h):
    x = np.arange(-20.0, 20.0 + 1e-9, h)[1:-1]
    return SchrodingerOperator(x=x, potential=2.0 / np.cosh(x) ** 2)


def test_poschl_teller_ground_state():
    """w'' + 2 sech^2(x) w has the single bound state sech(x) at eigenvalue 1"""
    eigs = point_spectrum_selfadjoint(_poschl_teller(0.002), count=3)
    assert eigs[0] == pytest.approx(1.0, abs=1e-6)
    assert np.all(np.diff(eigs) <= 0.0)
    # second-order error: extrapolating from h = 0.004 removes the h^2 term
    coarse = point_spectrum_selfadjoint(_poschl_teller(0.004), count=1)[0]
    assert (4.0 * eigs[0] - coarse) / 3.0 == pytest.approx(1.0, abs=1e-8)


def test_shift_moves_spectrum_and_edge():
    x = np.linspace(-10, 10, 2001)[1:-1]
    base = SchrodingerOperator(x=x, potential=2.0 / np.cosh(x) ** 2)
    shifted = SchrodingerOperator(x=x, potential=base.potential, shift=-0.5)
    assert shifted.essential_edge == pytest.approx(base.essential_edge - 0.5)
    top = point_spectrum_selfadjoint(base, count=1, genuine_only=False)[0]
    top_shifted = point_spectrum_selfadjoint(shifted, count=1, genuine_only=False)[0]
    assert top_shifted == pytest.approx(top - 0.5, abs=1e-8)


def test_pulled_weight_gives_schrodinger_block(kpp_front):
    op = weighted_linearization(kpp(), kpp_front, 1.0)
    assert op.schrodinger is not None
    # potential f'(u) - 1: -2 in the wake, 0 ahead
    assert op.schrodinger.potential[0] == pytest.approx(-2.0, abs=1e-6)
    assert op.schrodinger.potential[-1] == pytest.approx(0.0, abs=1e-6)
    eigs = point_spectrum_selfadjoint(op.schrodinger, count=5, genuine_only=False)
    assert eigs[0] <= 1e-8


def test_off_weight_has_no_schrodinger_block(kpp_front):
    op = weighted_linearization(kpp(), kpp_front, 0.5)
    assert op.schrodinger is None
    assert op.matrix.shape == (kpp_front.xi.size - 2,) * 2


def test_negative_weight_rejected(kpp_front):
    with pytest.raises(ContractViolation):
        weighted_linearization(kpp(), kpp_front, -1.0)


def test_pulled_kpp_front_is_marginally_stable(kpp_front):
    report = marginal_stability_report(kpp(), kpp_front)
    assert report.checklist.as_dict() == {
        "wake_attracting": True,
        "pinched_dr_at_zero": True,
        "weighted_spectrum_stable": True,
        "no_weighted_kernel_but_generic_tail": True,
    }
    assert report.verdict == Verdict.MARGINALLY_STABLE_PULLED
    assert report.eta == pytest.approx(1.0, abs=1e-12)
    assert report.weights == {"minus": 0.0, "plus": 1.0}


def test_pushed_front_is_not_classified_as_pulled(pushed_front):
    report = marginal_stability_report(nagumo(-0.2), pushed_front)
    assert not report.checklist.pinched_dr_at_zero
    assert report.verdict != Verdict.MARGINALLY_STABLE_PULLED


def test_critical_beta_essential_onset():
    beta_c, mechanism = critical_beta(0.25)
    assert mechanism == Mechanism.ESSENTIAL
    assert beta_c == pytest.approx(1.75 / math.sqrt(6.0), abs=1e-12)
    assert beta_c == wake_threshold_weighted(0.25)


@pytest.mark.parametrize("alpha", [0.0, 1.0 / 3.0, 0.5])
def test_critical_beta_alpha_contract(alpha):
    with pytest.raises(ContractViolation):
        critical_beta(alpha)


def test_poschl_teller_grid_doubling_is_second_order():
    errors = [abs(point_spectrum_selfadjoint(_poschl_teller(h), count=1)[0] - 1.0) for h in (0.04, 0.02)]
    assert math.log2(errors[0] / errors[1]) >= 1.8


@pytest.mark.parametrize("front_name, model", [("kpp_front", kpp()), ("pushed_front", nagumo(-0.2))])
def test_eigenvalue_filter_uses_applied_weight_on_both_sides(request, front_name, model):
    report = marginal_stability_report(model, request.getfixturevalue(front_name))
    assert {curve.weight for curve in report.filter_curves} == {report.eta}
    assert {curve.label.split(":")[0] for curve in report.filter_curves} == {"minus", "plus"}
    assert [c.weight for c in report.essential if c.label.startswith("minus")] == [0.0]
    minus = [c for c in report.filter_curves if c.label.startswith("minus")]
    for lam in report.point_eigs:
        assert min(np.min(np.abs(c.lam - lam)) for c in minus) >= Config.ESSENTIAL_FILTER


@pytest.mark.slow
def test_critical_beta_is_non_decreasing_in_alpha():
    alphas = np.round(np.linspace(0.02, 0.3, 15), 4)
    curve = critical_beta_curve(alphas)
    betas = np.array([beta for _, beta, _ in curve])
    assert np.all(np.diff(betas) >= -1e-6)
    assert curve[-1][2] == Mechanism.ESSENTIAL


def test_spectrum_analyzer_matches_report(kpp_front):
    report = SpectrumAnalyzer(kpp(), n_dense=400).analyze(kpp_front)
    assert report.verdict == marginal_stability_report(kpp(), kpp_front, n_dense=400).verdict
    assert report.eta == pytest.approx(1.0, abs=1e-12)
