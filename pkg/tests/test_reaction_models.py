import math

import numpy as np
import pytest

from models.reaction_models import (ReactionModel, Stability, TerraceSpec, build_terrace, eval_reaction,
                                    find_equilibria, forced_cgl, get_preset, nagumo, perturb_model,
                                    pushed_threshold, real_states, skew, terrace_levels,
                                    wake_threshold_unweighted, wake_threshold_weighted)
from utils.errors import CatalogMissError, ContractViolation, InvalidSpecError


def _labels(equilibria):
    return {eq.label: eq for eq in equilibria}


def test_nagumo_equilibria_and_stability():
    eqs = find_equilibria(nagumo(-0.2), [(-1.0, 2.0)])
    states = [eq.state[0] for eq in eqs]
    assert states == pytest.approx([-0.2, 0.0, 1.0], abs=1e-10)
    assert [eq.stability for eq in eqs] == [Stability.STABLE, Stability.UNSTABLE, Stability.STABLE]


def test_skew_has_nine_sign_labelled_equilibria():
    eqs = _labels(find_equilibria(skew(0.1), [(-1.5, 1.5), (-1.5, 1.5)]))
    assert len(eqs) == 9
    for label in ("(+1,+1)", "(+1,-1)", "(-1,+1)", "(-1,-1)", "(0,0)"):
        assert label in eqs
    assert eqs["(+1,-1)"].stability == Stability.STABLE
    assert eqs["(0,0)"].stability == Stability.UNSTABLE


def test_forced_cgl_real_states_are_labelled_a0_and_a3():
    alpha, beta = 0.02, 0.5
    eqs = _labels(find_equilibria(forced_cgl(alpha, beta), [(-2.0, 2.0), (-2.0, 2.0)]))
    u_plus, u_minus = real_states(alpha, beta)
    assert "O" in eqs
    assert eqs["A0"].state == pytest.approx((u_plus, 0.0), abs=1e-9)
    assert eqs["A3"].state == pytest.approx((u_minus, 0.0), abs=1e-9)


def test_real_states_are_zeros_of_the_axis_kinetics():
    model = forced_cgl(0.1, 0.3)
    for u in real_states(0.1, 0.3):
        assert np.max(np.abs(model.reaction(np.array([u, 0.0])))) < 1e-12


def test_closed_form_thresholds():
    assert pushed_threshold(0.02) == pytest.approx(math.sqrt(0.51), rel=1e-14)
    assert wake_threshold_weighted(0.25) == pytest.approx(1.75 / math.sqrt(6.0), rel=1e-14)
    assert wake_threshold_unweighted(0.0) == 0.0


@pytest.mark.parametrize("model", [forced_cgl(0.05, 0.4), skew(0.2), nagumo(-0.3)])
def test_jacobian_matches_finite_differences(model):
    rng = np.random.default_rng(0)
    n = model.n_components
    for _ in range(5):
        u = rng.uniform(-1.2, 1.2, n)
        J = model.jacobian(u)
        eps = 1e-6
        fd = np.column_stack([
            (model.reaction(u + eps * e) - model.reaction(u - eps * e)) / (2 * eps) for e in np.eye(n)
        ])
        assert np.max(np.abs(J - fd)) < 1e-6


def test_eval_reaction_rejects_wrong_dimension():
    with pytest.raises(ContractViolation):
        eval_reaction(skew(0.1), [0.5])


def test_model_rejects_nonpositive_diffusion():
    base = nagumo()
    with pytest.raises(InvalidSpecError):
        ReactionModel("bad", (0.0,), base.reaction, base.jacobian)


def test_unknown_preset():
    with pytest.raises(CatalogMissError):
        get_preset("nagumoo")


def test_perturbation_is_local_bump():
    model = nagumo(-0.2)
    pert = perturb_model(model, amplitude=0.01, center=0.5, width=0.2)
    for u in (0.0, 0.1, 0.9, 1.0):
        assert pert.reaction(np.array([u]))[0] == pytest.approx(model.reaction(np.array([u]))[0], abs=1e-15)
    # bump peaks at the center with value 1
    diff = pert.reaction(np.array([0.5]))[0] - model.reaction(np.array([0.5]))[0]
    assert diff == pytest.approx(0.01, rel=1e-12)


def test_terrace_levels_are_zeros_with_unit_slope_at_origin():
    model = build_terrace(TerraceSpec(n_levels=2, detune=(0.0, 0.05)))
    levels = terrace_levels(model)
    assert levels == (0.0, 1.0, 2.0)
    for u in levels:
        assert abs(model.reaction(np.array([u]))[0]) < 1e-12
    assert model.jacobian(np.array([0.0]))[0, 0] == pytest.approx(1.0, rel=1e-8)
    labels = {eq.label for eq in find_equilibria(model, [(-0.5, 2.5)], grid=25)}
    assert {"u0", "u1", "u2"} <= labels


@pytest.mark.parametrize("spec", [
    TerraceSpec(n_levels=0),
    TerraceSpec(n_levels=2, levels=(0.0, 2.0, 1.0)),
    TerraceSpec(n_levels=2, detune=(0.0, -0.1)),
])
def test_invalid_terrace_specs(spec):
    with pytest.raises(InvalidSpecError):
        build_terrace(spec)


@pytest.mark.parametrize("model", [nagumo(-0.2), forced_cgl(0.02, 0.5)])
def test_finite_difference_jacobian_error_is_second_order(model):
    u = np.array([0.3, -0.7][:model.n_components])
    J = model.jacobian(u)

    def fd_error(eps):
        fd = np.column_stack([
            (model.reaction(u + eps * e) - model.reaction(u - eps * e)) / (2 * eps)
            for e in np.eye(model.n_components)
        ])
        return np.max(np.abs(J - fd))

    assert math.log2(fd_error(1e-2) / fd_error(5e-3)) >= 1.9
