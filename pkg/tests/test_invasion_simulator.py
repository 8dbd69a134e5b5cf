import math

import numpy as np
import pytest
from joblib import Parallel, delayed

from models.front_solver import shoot_scalar_front, sub_super_envelopes, verify_sub_super
from models.invasion_simulator import (BoundaryCondition, FieldState, InitialData, _banded, build_initial, dt_max,
                                       fit_front_speed, front_separation, robustness_check, run, sign_change_curve,
                                       splice, step, track_front, wake_state)
from models.reaction_models import balanced, find_equilibria, forced_cgl, kpp, linear, nagumo, skew
from utils.errors import BlowUpError, ContractViolation


def _moving_snapshots(speed, side="right", times=np.arange(0.0, 11.0)):
    x = np.linspace(-50.0, 50.0, 1001)
    snaps = []
    for t in times:
        if side == "right":
            q = 0.5 * (1.0 - np.tanh(x - speed * t))
        else:
            q = 0.5 * (1.0 + np.tanh(x + speed * t))
        snaps.append(FieldState(t=float(t), x=x, values=q[None, :]))
    return snaps


def test_build_initial_kinds():
    x = np.linspace(-10.0, 10.0, 201)
    step_vals = build_initial(kpp(), InitialData(kind="step", state=(1.0,)), x)
    assert step_vals.shape == (1, 201)
    assert np.all(step_vals[0, x < 0] == 1.0) and np.all(step_vals[0, x >= 0] == 0.0)

    sign = build_initial(skew(0.1), InitialData(kind="sign_step", state=(1.0, 1.0), state_b=(1.0, -1.0),
                                                width=5.0), x)
    assert sign[:, 50].tolist() == [0.0, 0.0]
    assert sign[:, 80].tolist() == [1.0, 1.0]
    assert sign[:, 120].tolist() == [1.0, -1.0]

    cgl = build_initial(forced_cgl(), InitialData(kind="cgl_step", amplitude=0.5, phase_index=3), x)
    assert cgl[:, 0] == pytest.approx([-0.5, 0.0], abs=1e-15)

    bump = build_initial(kpp(), InitialData(kind="bump", state=(1.0,), width=2.0), x)
    assert bump[0, 100] == pytest.approx(1.0)
    assert np.all(bump[0, np.abs(x) >= 2.0] == 0.0)


def test_build_initial_contracts():
    x = np.linspace(0.0, 1.0, 11)
    with pytest.raises(ContractViolation):
        build_initial(kpp(), InitialData(kind="step", state=(1.0, 0.0)), x)
    with pytest.raises(ContractViolation):
        build_initial(kpp(), InitialData(kind="cgl_step"), x)
    with pytest.raises(ContractViolation):
        build_initial(kpp(), InitialData(kind="spiral"), x)


def test_dt_bound():
    assert dt_max(linear(2.0), np.zeros((1, 5))) == pytest.approx(0.25)
    with pytest.raises(ContractViolation):
        run(linear(1000.0), InitialData(kind="step"), 1.0, x_range=(-5.0, 5.0))


def test_uniform_state_grows_exponentially():
    traj = run(linear(0.5), InitialData(kind="state_step", state=(1.0,), state_b=(1.0,)), 1.0,
               x_range=(-5.0, 5.0))
    assert traj.final.t == pytest.approx(1.0)
    assert np.allclose(traj.final.values, math.exp(0.5), rtol=1e-6)


def test_equilibrium_is_preserved_under_neumann():
    traj = run(kpp(), InitialData(kind="state_step", state=(1.0,), state_b=(1.0,)), 2.0, x_range=(-5.0, 5.0))
    assert np.max(np.abs(traj.final.values - 1.0)) < 1e-12


def test_snapshot_times_are_exact():
    traj = run(kpp(), InitialData(kind="step"), 3.0, x_range=(-10.0, 10.0), snapshot_interval=0.5)
    assert traj.times == pytest.approx([0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0], abs=1e-12)


def test_step_detects_blow_up():
    x = np.linspace(0.0, 1.0, 11)
    values = np.zeros((1, 11))
    values[0, 5] = np.nan
    with pytest.raises(BlowUpError) as info:
        step(FieldState(t=0.0, x=x, values=values), kpp(), 0.005, check_dt=False)
    assert info.value.last_state.t == 0.0


def test_kpp_invasion_approaches_linear_speed():
    traj = run(kpp(), InitialData(kind="step"), 60.0, x_range=(-20.0, 200.0))
    track = track_front(traj.snapshots, 0, 0.5)
    # logarithmic delay keeps the finite-time speed just below 2
    assert 1.9 < track.lab_speed < 2.0
    assert track.status == "ok"


def test_fit_front_speed_on_linear_motion():
    t = np.linspace(0.0, 20.0, 41)
    speed, intercept, drift, sublinear, window = fit_front_speed(t, 2.0 * t + 3.0)
    assert speed == pytest.approx(2.0)
    assert intercept == pytest.approx(3.0)
    assert np.allclose(drift, 0.0, atol=1e-10)
    assert sublinear
    assert window[1] == 20.0


def test_fit_front_speed_needs_three_samples():
    speed, *_ = fit_front_speed([0.0, 1.0], [0.0, 1.0])
    assert math.isnan(speed)


@pytest.mark.parametrize("side", ["right", "left"])
def test_track_front_reports_outward_speed(side):
    track = track_front(_moving_snapshots(1.5, side), 0, 0.5, side=side)
    assert track.fitted_speed == pytest.approx(1.5, abs=1e-3)
    assert track.lab_speed == pytest.approx(1.5, abs=1e-3)


def test_track_front_empty_and_bad_side():
    snaps = _moving_snapshots(1.0)
    assert track_front(snaps, 0, 2.0).status == "empty"
    with pytest.raises(ContractViolation):
        track_front(snaps, 0, 0.5, side="up")


def test_wake_state_identifies_equilibrium():
    snaps = _moving_snapshots(1.0)
    track = track_front(snaps, 0, 0.5)
    catalogue = find_equilibria(kpp(), [(-0.5, 1.5)])
    one = next(eq for eq in catalogue if abs(eq.state[0] - 1.0) < 1e-9)
    assert wake_state(snaps[-1], track, catalogue) == one.label
    # half-way value matches nothing in the catalogue
    assert wake_state(snaps[-1], track, catalogue, offset=1e-3) is None
    with pytest.raises(ContractViolation):
        wake_state(snaps[-1], track, catalogue, offset=0.0)


def test_front_separation_sign():
    x = np.linspace(-50.0, 50.0, 1001)
    values = np.vstack([0.5 * (1.0 - np.tanh(x)), 0.5 * (1.0 - np.tanh(x + 5.0))])
    snap = FieldState(t=0.0, x=x, values=values)
    assert front_separation(snap, 0, 0.5, 1, 0.5) == pytest.approx(-5.0, abs=1e-3)
    assert math.isnan(front_separation(snap, 0, 0.5, 1, 2.0))


def test_splice_replaces_region_and_continues():
    traj = run(kpp(), InitialData(kind="step"), 4.0, x_range=(-10.0, 30.0))
    spliced = splice(traj, 2.0, 5.0, (0.5,))
    assert spliced.times == pytest.approx([0.0, 1.0, 2.0, 3.0, 4.0], abs=1e-12)
    at_splice = spliced.snapshots[2]
    assert np.all(at_splice.values[0, at_splice.x < 5.0] == 0.5)
    assert np.array_equal(spliced.snapshots[1].values, traj.snapshots[1].values)
    with pytest.raises(ContractViolation):
        splice(traj, 2.5, 5.0, (0.5,))
    with pytest.raises(ContractViolation):
        splice(traj, 2.0, 100.0, (0.5,))


def test_sign_change_curve_interpolates():
    x = np.linspace(0.0, 10.0, 8)
    snaps = [FieldState(t=t, x=x, values=(x - 3.3 - t)[None, :]) for t in (0.0, 1.0)]
    curve = sign_change_curve(snaps)
    assert curve.shape == (2, 2)
    assert curve[:, 1] == pytest.approx([3.3, 4.3])


def test_robustness_check_on_logistic_front():
    catalogue = find_equilibria(kpp(), [(-0.5, 1.5)])
    result = robustness_check(kpp(), InitialData(kind="step"), 30.0, 0, 0.5, catalogue,
                              x_range=(-20.0, 100.0))
    assert result["passed"]
    assert result["relative_change"] < 0.03
    assert result["base_wake"] == result["perturbed_wake"]


def test_time_stepping_is_second_order():
    x = np.linspace(-20.0, 20.0, 401)
    start = 0.5 * np.exp(-x ** 2 / 4.0)[None, :]
    finals = {dt: run(kpp(), start, 2.0, x_range=(-20.0, 20.0), h=0.1, dt=dt).final.values
              for dt in (0.02, 0.01, 0.0025)}
    coarse = np.max(np.abs(finals[0.02] - finals[0.0025]))
    fine = np.max(np.abs(finals[0.01] - finals[0.0025]))
    assert math.log2(coarse / fine) >= 1.8


def test_banded_factor_is_cached_and_read_only():
    first = _banded(1.0, 0.5, 0.1, 0.005, 50, BoundaryCondition.NEUMANN)
    assert _banded(1.0, 0.5, 0.1, 0.005, 50, BoundaryCondition.NEUMANN) is first
    assert not first.flags.writeable
    with pytest.raises(ValueError):
        first[1, 0] = 0.0
    assert _banded(1.0, 0.5, 0.1, 0.0025, 50, BoundaryCondition.NEUMANN) is not first


def test_threaded_steps_with_mixed_dt_match_serial():
    x = np.linspace(-20.0, 20.0, 401)
    start = FieldState(t=0.0, x=x, values=build_initial(kpp(), InitialData(kind="step"), x), frame_speed=1.0)
    steps = [0.001 * (1 + i % 7) for i in range(56)]

    def advance(dt):
        state = start
        for _ in range(20):
            state = step(state, kpp(), dt)
        return state.values

    serial = [advance(dt) for dt in steps]
    threaded = Parallel(n_jobs=8, prefer="threads")(delayed(advance)(dt) for dt in steps)
    for a, b in zip(serial, threaded):
        np.testing.assert_array_equal(a, b)


def test_dt_bound_follows_attained_states():
    # u - u^3: |f'| is 1 on the small initial bump and 2 once the state reaches 1
    initial = InitialData(kind="bump", state=(0.05,), width=10.0)
    with pytest.raises(ContractViolation, match="states reached"):
        run(nagumo(-1.0), initial, 30.0, x_range=(-20.0, 20.0), dt=0.4, snapshot_interval=1.0)
    traj = run(nagumo(-1.0), initial, 30.0, x_range=(-20.0, 20.0), dt=0.2, snapshot_interval=1.0)
    assert traj.final.values.max() == pytest.approx(1.0, abs=1e-3)


@pytest.mark.slow
def test_comoving_run_matches_shifted_lab_run():
    # frame speed 0.4 shifts by exactly 400 nodes at T = 50, h = 0.05
    model = nagumo(0.25)
    lab = run(model, InitialData(kind="step"), 50.0, x_range=(-40.0, 60.0), h=0.05, snapshot_interval=50.0)
    moving = run(model, InitialData(kind="step"), 50.0, x_range=(-40.0, 40.0), h=0.05, frame_speed=0.4,
                 snapshot_interval=50.0)
    assert moving.final.t == lab.final.t == pytest.approx(50.0)
    np.testing.assert_allclose(lab.final.x[400:], moving.final.x + 20.0, atol=1e-9)
    assert np.max(np.abs(lab.final.values[0, 400:] - moving.final.values[0])) <= 5e-3


@pytest.mark.slow
def test_skew_step_data_stays_between_sub_and_super_solutions():
    mu = 0.1
    front = shoot_scalar_front(balanced(), 2.0, 1.0, 30.0)
    report = verify_sub_super(mu, 0.05, 10.0, front, margin=5.0)
    x_range = (-40.0, 60.0)
    x = np.linspace(x_range[0], x_range[1], int(round((x_range[1] - x_range[0]) / 0.1)) + 1)
    u0 = np.interp(x, front.xi, front.component(0), left=1.0, right=0.0)
    v0 = np.where(x < report.x0, 1.0, 0.0)
    traj = run(skew(mu), np.vstack([u0, v0]), 20.0, x_range=x_range, frame_speed=2.0, snapshot_interval=1.0)
    window = (x > -30.0) & (x < 30.0)
    times = np.array([s.t for s in traj.snapshots])
    lower, upper = sub_super_envelopes(report, x[window], times)
    v = np.array([s.values[1, window] for s in traj.snapshots])
    assert np.all(v >= lower - 1e-2)
    assert np.all(v <= upper + 1e-2)
    assert np.any(lower > 0.5)
    assert np.any(upper < 0.5)
