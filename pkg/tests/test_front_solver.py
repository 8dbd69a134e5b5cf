import math

import numpy as np
import pytest

from models.front_solver import (Steepness, fit_decay, shoot_scalar_front, solve_front_bvp, sub_super_envelopes,
                                 tanh_ansatz, traveling_wave_residual, verify_sub_super)
from models.reaction_models import balanced, kpp, nagumo, skew
from utils.errors import ContractViolation


def test_tanh_ansatz_limits():
    xi = np.linspace(-20, 20, 401)
    U = tanh_ansatz(xi, (1.0, -1.0), (0.0, 1.0), shifts=(0.0, 5.0))
    assert U.shape == (401, 2)
    assert U[0] == pytest.approx([1.0, -1.0], abs=1e-12)
    assert U[-1] == pytest.approx([0.0, 1.0], abs=1e-12)
    assert U[200, 0] == pytest.approx(0.5)
    assert U[250, 1] == pytest.approx(0.0)


def test_fit_decay_generic_tail():
    xi = np.linspace(-40, 40, 8001)
    mag = np.where(xi > 0, xi * np.exp(-0.5 * xi), 1.0)
    fit = fit_decay(xi, mag)
    assert fit.eta == pytest.approx(0.5, abs=1e-8)
    assert fit.power == pytest.approx(1.0, abs=1e-8)
    assert fit.a_plus == pytest.approx(1.0, rel=1e-6)
    assert fit.steepness == Steepness.GENERIC


def test_fit_decay_pure_exponential_is_strong_stable():
    xi = np.linspace(-40, 40, 8001)
    fit = fit_decay(xi, np.exp(-0.7 * xi))
    assert fit.eta == pytest.approx(0.7, abs=1e-8)
    assert fit.steepness == Steepness.STRONG_STABLE


def test_fit_decay_without_tail_is_indeterminate():
    xi = np.linspace(-10, 10, 201)
    fit = fit_decay(xi, np.zeros_like(xi))
    assert fit.steepness == Steepness.INDETERMINATE
    assert math.isnan(fit.eta)


def test_balanced_kink_matches_tanh():
    profile = shoot_scalar_front(balanced(), 0.0, 1.0, 20.0, to_state=-1.0)
    exact = -np.tanh(profile.xi / math.sqrt(2.0))
    assert np.max(np.abs(profile.component(0) - exact)) < 1e-6


def test_pulled_kpp_front_has_generic_tail(kpp_front):
    assert kpp_front.speed == 2.0
    u = kpp_front.component(0)
    assert np.all(np.diff(u) <= 1e-12)
    assert kpp_front.steepness == Steepness.GENERIC
    assert kpp_front.eta == pytest.approx(1.0, abs=0.05)
    assert traveling_wave_residual(kpp(), kpp_front) < 1e-3


def test_shooting_contracts():
    with pytest.raises(ContractViolation):
        shoot_scalar_front(skew(0.1), 2.0, 1.0, 20.0)
    with pytest.raises(ContractViolation):
        shoot_scalar_front(kpp(), 2.0, 0.0, 20.0)


def test_pushed_nagumo_front_speed(pushed_front):
    assert pushed_front.speed == pytest.approx(1.4 / math.sqrt(2.0), abs=1e-3)
    assert pushed_front.at(0.0)[0] == pytest.approx(0.5, abs=1e-8)
    assert np.all(np.diff(pushed_front.component(0)) <= 1e-10)


def test_bvp_recovers_stationary_kink():
    profile = solve_front_bvp(balanced(), 0.0, (1.0,), (-1.0,), 20.0, 801)
    assert abs(profile.speed) < 1e-6
    exact = -np.tanh(profile.xi / math.sqrt(2.0))
    assert np.max(np.abs(profile.component(0) - exact)) < 5e-3


def test_bvp_grid_contract():
    with pytest.raises(ContractViolation):
        solve_front_bvp(nagumo(), 0.5, (1.0,), (0.0,), 20.0, 100)


def test_bvp_rejects_non_equilibrium_limits():
    with pytest.raises(ContractViolation):
        solve_front_bvp(nagumo(), 0.5, (0.7,), (0.0,), 20.0, 401)


def test_sub_super_report_holds_super_solution():
    front = shoot_scalar_front(balanced(), 2.0, 1.0, 30.0)
    report = verify_sub_super(0.1, 0.05, 10.0, front, t_grid=np.linspace(0.0, 20.0, 21))
    assert report.super_ok
    lower, upper = sub_super_envelopes(report, front.xi, np.array([0.0, 5.0]))
    assert lower.shape == upper.shape == (2, front.xi.size)
    assert np.all(upper <= 1.0)


@pytest.mark.parametrize("mu,epsilon", [(0.0, 0.05), (1.2, 0.05), (0.1, 0.1), (0.1, 0.0)])
def test_sub_super_parameter_contract(mu, epsilon, kpp_front):
    with pytest.raises(ContractViolation):
        verify_sub_super(mu, epsilon, 10.0, kpp_front)


def test_bvp_grid_doubling_is_second_order():
    errors = []
    for n_grid in (401, 801):
        profile = solve_front_bvp(balanced(), 0.0, (1.0,), (-1.0,), 20.0, n_grid)
        exact = -np.tanh(profile.xi / math.sqrt(2.0))
        errors.append(np.max(np.abs(profile.component(0) - exact)))
    assert math.log2(errors[0] / errors[1]) >= 1.8
