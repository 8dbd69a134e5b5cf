"""
Invasion runs
IMEX time stepping in lab or comoving frames, front tracking and wake identification
"""
import logging
from functools import lru_cache
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import solve_banded

from models.reaction_models import Equilibrium, ReactionModel, perturb_model
from utils.config import Config
from utils.errors import BlowUpError, ContractViolation

logger = logging.getLogger(__name__)


class BoundaryCondition(str, Enum):
    NEUMANN = "neumann"
    DIRICHLET = "dirichlet_at_equilibrium"


@dataclass
class FieldState:
    """Solution at time t; values has shape (n, len(x))"""
    t: float
    x: np.ndarray
    values: np.ndarray
    frame_speed: float = 0.0
    bc: BoundaryCondition = BoundaryCondition.NEUMANN

    @property
    def h(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def n_components(self) -> int:
        return self.values.shape[0]

    def sample(self, x: float) -> np.ndarray:
        return np.array([np.interp(x, self.x, row) for row in self.values])


@dataclass(frozen=True)
class InitialData:
    """
    Initial data builders

    step: `state` for x < position, 0 beyond; bump: `state` times a compact cos^2 bump of
    half-width `width`; sign_step: `state` on (position - width, position) and `state_b` on
    (position, position + width); state_step: `state` for x < position, `state_b` beyond;
    cgl_step: amplitude * (cos, sin)(l pi / 3) for x < position.
    """
    kind: str = "step"
    state: Tuple[float, ...] = (1.0,)
    state_b: Tuple[float, ...] = (-1.0,)
    width: float = 10.0
    position: float = 0.0
    amplitude: float = 1.0
    phase_index: int = 0


@dataclass
class Trajectory:
    model: ReactionModel
    snapshots: List[FieldState]
    dt: float
    frame_speed: float = 0.0

    @property
    def final(self) -> FieldState:
        return self.snapshots[-1]

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])


@dataclass
class FrontTrack:
    component: Union[int, str]
    level: float
    side: str = "right"
    times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    positions: np.ndarray = field(default_factory=lambda: np.zeros(0))
    fitted_speed: float = float("nan")
    intercept: float = float("nan")
    fit_window: Tuple[float, float] = (float("nan"), float("nan"))
    drift: np.ndarray = field(default_factory=lambda: np.zeros(0))
    sublinear: bool = False
    wake_state: Optional[str] = None
    separations: List[Tuple[float, float]] = field(default_factory=list)
    status: str = "ok"
    near_boundary: bool = False
    frame_speed: float = 0.0

    @property
    def lab_speed(self) -> float:
        sign = 1.0 if self.side == "right" else -1.0
        return self.fitted_speed + sign * self.frame_speed


def build_initial(model: ReactionModel, initial: InitialData, x: np.ndarray) -> np.ndarray:
    """Evaluate an initial-data spec on the grid x; returns shape (n, len(x))"""
    n = model.n_components
    values = np.zeros((n, x.size))
    kind = initial.kind
    if kind == "cgl_step":
        if n != 2:
            raise ContractViolation("cgl_step needs a two-component model")
        angle = initial.phase_index * np.pi / 3.0
        left = x < initial.position
        values[0, left] = initial.amplitude * np.cos(angle)
        values[1, left] = initial.amplitude * np.sin(angle)
        return values
    state = np.asarray(initial.state, dtype=float)
    if state.size != n:
        raise ContractViolation(f"initial state has {state.size} entries, model has {n} components")
    if kind == "step":
        values[:, x < initial.position] = state[:, None]
    elif kind == "bump":
        s = (x - initial.position) / initial.width
        profile = np.where(np.abs(s) < 1.0, np.cos(0.5 * np.pi * s) ** 2, 0.0)
        values[:] = state[:, None] * profile[None, :]
    elif kind == "state_step":
        state_b = np.asarray(initial.state_b, dtype=float)
        values[:] = state_b[:, None]
        values[:, x < initial.position] = state[:, None]
    elif kind == "sign_step":
        state_b = np.asarray(initial.state_b, dtype=float)
        left = (x > initial.position - initial.width) & (x < initial.position)
        right = (x >= initial.position) & (x < initial.position + initial.width)
        values[:, left] = state[:, None]
        values[:, right] = state_b[:, None]
    else:
        raise ContractViolation(f"unknown initial data kind {kind!r}")
    return values


def dt_max(model: ReactionModel, values) -> float:
    """Explicit-reaction bound DT_SAFETY / max ||F'(U)||_inf over the given states"""
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    J = np.asarray(model.jacobian(arr), dtype=float)
    norm = float(np.max(np.sum(np.abs(J), axis=1)))
    return np.inf if norm == 0.0 else Config.DT_SAFETY / norm


# ---------------------------------------------------------------------------
# stepping

@lru_cache(maxsize=64)
def _banded(d: float, c: float, h: float, dt: float, N: int, bc: BoundaryCondition) -> np.ndarray:
    """(I - dt/2 A) in banded storage, A = d d_xx + c d_x; read-only, shared between threads"""
    lo = d / h ** 2 - c / (2.0 * h)
    up = d / h ** 2 + c / (2.0 * h)
    ab = np.zeros((3, N))
    ab[0, 1:] = -0.5 * dt * up
    ab[1, :] = 1.0 + dt * d / h ** 2
    ab[2, :-1] = -0.5 * dt * lo
    if bc == BoundaryCondition.NEUMANN:
        # ghost nodes U_{-1} = U_1, U_N = U_{N-2}
        ab[0, 1] = -0.5 * dt * (lo + up)
        ab[2, N - 2] = -0.5 * dt * (lo + up)
    else:
        ab[1, 0] = ab[1, -1] = 1.0
        ab[0, 1] = 0.0
        ab[2, N - 2] = 0.0
    ab.flags.writeable = False
    return ab


def _apply_operator(u: np.ndarray, d: float, c: float, h: float, bc: BoundaryCondition) -> np.ndarray:
    lo = d / h ** 2 - c / (2.0 * h)
    up = d / h ** 2 + c / (2.0 * h)
    out = np.empty_like(u)
    out[1:-1] = lo * u[:-2] - 2.0 * d / h ** 2 * u[1:-1] + up * u[2:]
    if bc == BoundaryCondition.NEUMANN:
        out[0] = (lo + up) * u[1] - 2.0 * d / h ** 2 * u[0]
        out[-1] = (lo + up) * u[-2] - 2.0 * d / h ** 2 * u[-1]
    else:
        out[0] = out[-1] = 0.0
    return out


def _reaction_half(model: ReactionModel, U: np.ndarray, tau: float) -> np.ndarray:
    k1 = model.reaction(U)
    return U + tau * model.reaction(U + 0.5 * tau * k1)


def step(state: FieldState, model: ReactionModel, dt: float, check_dt: bool = True) -> FieldState:
    """
    One Strang step: reaction half-step, Crank-Nicolson diffusion/advection, reaction half-step

    Args:
        state: Current field
        model: Reaction model
        dt: Time step (<= dt_max of the current states)
        check_dt: Enforce the dt bound

    Returns:
        New FieldState at t + dt
    """
    if check_dt:
        bound = dt_max(model, state.values)
        if dt > bound * (1.0 + 1e-12):
            raise ContractViolation(f"dt={dt} exceeds dt_max={bound:.4g}")
    h, c, N = state.h, state.frame_speed, state.x.size
    U = _reaction_half(model, state.values, 0.5 * dt)
    out = np.empty_like(U)
    for k, d in enumerate(model.diffusion):
        rhs = U[k] + 0.5 * dt * _apply_operator(U[k], d, c, h, state.bc)
        if state.bc == BoundaryCondition.DIRICHLET:
            rhs[0], rhs[-1] = state.values[k, 0], state.values[k, -1]
        out[k] = solve_banded((1, 1), _banded(d, c, h, dt, N, state.bc), rhs)
    out = _reaction_half(model, out, 0.5 * dt)
    if state.bc == BoundaryCondition.DIRICHLET:
        out[:, 0], out[:, -1] = state.values[:, 0], state.values[:, -1]
    if not np.all(np.isfinite(out)):
        raise BlowUpError(f"non-finite values at t={state.t + dt:.6g}", last_state=state)
    return replace(state, t=state.t + dt, values=out)


def run(model: ReactionModel, initial: Union[InitialData, np.ndarray], T: float,
        x_range: Tuple[float, float] = (-300.0, 300.0), h: float = Config.GRID_SPACING,
        dt: float = Config.TIME_STEP, frame_speed: float = 0.0,
        bc: BoundaryCondition = BoundaryCondition.NEUMANN, snapshot_interval: float = 1.0,
        t0: float = 0.0) -> Trajectory:
    """
    Integrate an invasion with a fixed step and periodic snapshots

    Args:
        model: Reaction model
        initial: InitialData spec or an array of shape (n, len(x))
        T: Final time
        x_range: Domain [x_lo, x_hi]
        h: Grid spacing
        dt: Time step
        frame_speed: Speed of the comoving frame (0 = lab frame)
        bc: Boundary condition
        snapshot_interval: Time between snapshots (rounded to whole steps)
        t0: Initial time

    Returns:
        Trajectory with snapshots at t0, t0 + interval, ..., T
    """
    n_nodes = int(round((x_range[1] - x_range[0]) / h)) + 1
    x = np.linspace(x_range[0], x_range[1], n_nodes)
    values = build_initial(model, initial, x) if isinstance(initial, InitialData) else np.array(initial, float)
    state = FieldState(t=t0, x=x, values=values, frame_speed=float(frame_speed), bc=BoundaryCondition(bc))
    return _integrate(model, state, T, dt, snapshot_interval)


def _integrate(model: ReactionModel, state: FieldState, T: float, dt: float,
               snapshot_interval: float) -> Trajectory:
    n_steps = int(round((T - state.t) / dt))
    every = max(1, int(round(snapshot_interval / dt)))
    bound = dt_max(model, state.values)
    if dt > bound:
        raise ContractViolation(f"dt={dt} exceeds dt_max={bound:.4g}")
    lo, hi = state.values.min(axis=1), state.values.max(axis=1)
    snapshots = [state]
    t_start = state.t
    logger.info("%s: integrating %d steps (dt=%g, h=%g, frame %.6g)", model.name, n_steps, dt, state.h,
                state.frame_speed)
    for i in range(1, n_steps + 1):
        state = step(state, model, dt, check_dt=False)
        # fixed-step times without accumulated rounding
        state.t = t_start + i * dt
        if i % every == 0 or i == n_steps:
            snapshots.append(state)
            if np.any(state.values.min(axis=1) < lo) or np.any(state.values.max(axis=1) > hi):
                lo = np.minimum(lo, state.values.min(axis=1))
                hi = np.maximum(hi, state.values.max(axis=1))
                bound = min(bound, dt_max(model, state.values))
                if dt > bound:
                    raise ContractViolation(
                        f"dt={dt} exceeds dt_max={bound:.4g} of the states reached at t={state.t:.6g}")
    return Trajectory(model=model, snapshots=snapshots, dt=dt, frame_speed=state.frame_speed)


# ---------------------------------------------------------------------------
# tracking

def _profile_of(snapshot: FieldState, component: Union[int, str]) -> np.ndarray:
    if component == "norm":
        return np.linalg.norm(snapshot.values, axis=0)
    return snapshot.values[int(component)]


def _crossing(x: np.ndarray, q: np.ndarray, level: float, side: str = "right") -> Optional[float]:
    above = q - level
    idx = np.nonzero(above[:-1] * above[1:] <= 0.0)[0]
    idx = idx[above[idx] != above[idx + 1]]
    if idx.size == 0:
        return None
    i = idx[-1] if side == "right" else idx[0]
    w = above[i] / (above[i] - above[i + 1])
    return float(x[i] + w * (x[i + 1] - x[i]))


def fit_front_speed(times: Sequence[float], positions: Sequence[float],
                    fit_fraction: float = Config.FIT_FRACTION) -> Tuple[float, float, np.ndarray, bool, Tuple[float, float]]:
    """
    Least-squares speed over the final `fit_fraction` of the samples

    Returns:
        (speed, intercept, drift, sublinear, window) where drift is x - speed t - intercept
        on the window and sublinear means |drift| < SUBLINEAR_TOL * t there
    """
    t = np.asarray(times, dtype=float)
    x = np.asarray(positions, dtype=float)
    m = max(3, int(np.ceil(fit_fraction * t.size)))
    if t.size < 3:
        return float("nan"), float("nan"), np.zeros(0), False, (float("nan"), float("nan"))
    tw, xw = t[-m:], x[-m:]
    speed, intercept = np.polyfit(tw, xw, 1)
    drift = xw - speed * tw - intercept
    positive = tw > 0
    sublinear = bool(np.all(np.abs(drift[positive]) < Config.SUBLINEAR_TOL * tw[positive]))
    return float(speed), float(intercept), drift, sublinear, (float(tw[0]), float(tw[-1]))


def track_front(snapshots: Sequence[FieldState], component: Union[int, str], level: float,
                side: str = "right", fit_fraction: float = Config.FIT_FRACTION) -> FrontTrack:
    """
    Level-crossing positions and fitted speed of an interface

    Args:
        snapshots: Snapshots in time order
        component: Component index or "norm"
        level: Tracked level
        side: "right" for the rightmost crossing, "left" for the leftmost
        fit_fraction: Fraction of samples used for the speed fit

    Returns:
        FrontTrack; fitted_speed is the invasion speed in the snapshot frame
        (positive for outward motion on either side), status "empty" if never crossed
    """
    if side not in ("right", "left"):
        raise ContractViolation(f"side must be 'right' or 'left', got {side!r}")
    times, positions = [], []
    for snap in snapshots:
        pos = _crossing(snap.x, _profile_of(snap, component), level, side)
        if pos is not None:
            times.append(snap.t)
            positions.append(pos)
    track = FrontTrack(component=component, level=float(level), side=side,
                       frame_speed=snapshots[0].frame_speed if snapshots else 0.0)
    if not positions:
        track.status = "empty"
        logger.warning("level %.4g of component %s never crossed", level, component)
        return track
    track.times, track.positions = np.array(times), np.array(positions)
    speed, intercept, drift, sublinear, window = fit_front_speed(times, positions, fit_fraction)
    track.fitted_speed = speed if side == "right" else -speed
    track.intercept, track.drift, track.sublinear, track.fit_window = intercept, drift, sublinear, window

    x = snapshots[0].x
    margin = Config.DOMAIN_MARGIN * (x[-1] - x[0])
    if np.any(track.positions > x[-1] - margin) or np.any(track.positions < x[0] + margin):
        track.near_boundary = True
        logger.warning("front of component %s came within %.0f%% of the domain boundary",
                       component, 100 * Config.DOMAIN_MARGIN)
    return track


def wake_state(snapshot: FieldState, track: FrontTrack, catalogue: Sequence[Equilibrium],
               offset: float = Config.WAKE_OFFSET, tol: float = Config.WAKE_TOL) -> Optional[str]:
    """
    Label of the catalogued equilibrium found `offset` behind the tracked interface

    Returns None (unresolved wake) when no equilibrium lies within `tol`.
    """
    if offset <= 0:
        raise ContractViolation(f"offset must be positive, got {offset}")
    pos = _crossing(snapshot.x, _profile_of(snapshot, track.component), track.level, track.side)
    if pos is None:
        return None
    x_wake = pos - offset if track.side == "right" else pos + offset
    sample = snapshot.sample(x_wake)
    best, best_dist = None, np.inf
    for eq in catalogue:
        dist = float(np.linalg.norm(sample - eq.vector))
        if dist < best_dist:
            best, best_dist = eq, dist
    if best is None or best_dist > tol:
        logger.debug("unresolved wake at x=%.4g: sample %s", x_wake, sample)
        return None
    return best.label or str(best.state)


def front_separation(snapshot: FieldState, comp_a: Union[int, str], level_a: float,
                     comp_b: Union[int, str], level_b: float, side: str = "right") -> float:
    """x_b - x_a of the two level crossings; NaN when either is missing"""
    xa = _crossing(snapshot.x, _profile_of(snapshot, comp_a), level_a, side)
    xb = _crossing(snapshot.x, _profile_of(snapshot, comp_b), level_b, side)
    if xa is None or xb is None:
        return float("nan")
    return float(xb - xa)


def splice(trajectory: Trajectory, t_splice: float, L0: float, replacement: Sequence[float],
           T: Optional[float] = None, snapshot_interval: Optional[float] = None) -> Trajectory:
    """
    Overwrite x < L0 with `replacement` at the snapshot t_splice and continue the run

    Args:
        trajectory: Original run; t_splice must be one of its snapshot times
        t_splice: Splice time
        L0: Replaced region is x < L0
        replacement: Replacement state vector
        T: Final time of the continued run (default: original final time)
        snapshot_interval: Snapshot spacing (default: original spacing)

    Returns:
        Trajectory holding the original snapshots up to t_splice and the continued ones
    """
    times = trajectory.times
    idx = int(np.argmin(np.abs(times - t_splice)))
    if abs(times[idx] - t_splice) > 0.5 * trajectory.dt:
        raise ContractViolation(f"t_splice={t_splice} is not a snapshot time")
    base = trajectory.snapshots[idx]
    if not base.x[0] <= L0 <= base.x[-1]:
        raise ContractViolation(f"L0={L0} outside the domain")
    values = base.values.copy()
    values[:, base.x < L0] = np.asarray(replacement, dtype=float)[:, None]
    T = trajectory.final.t if T is None else T
    if snapshot_interval is None:
        snapshot_interval = float(times[1] - times[0]) if times.size > 1 else 1.0
    cont = _integrate(trajectory.model, replace(base, values=values), T, trajectory.dt, snapshot_interval)
    logger.info("spliced at t=%.6g for x < %.4g", t_splice, L0)
    return Trajectory(model=trajectory.model, snapshots=trajectory.snapshots[:idx] + cont.snapshots,
                      dt=trajectory.dt, frame_speed=trajectory.frame_speed)


def sign_change_curve(snapshots: Sequence[FieldState], component: int = 0) -> np.ndarray:
    """All (t, x) where the component changes sign, interpolated between nodes"""
    points = []
    for snap in snapshots:
        q = snap.values[component]
        idx = np.nonzero(q[:-1] * q[1:] < 0.0)[0]
        for i in idx:
            w = q[i] / (q[i] - q[i + 1])
            points.append((snap.t, float(snap.x[i] + w * (snap.x[i + 1] - snap.x[i]))))
    return np.array(points, dtype=float).reshape(-1, 2)


def robustness_check(model: ReactionModel, initial: InitialData, T: float, component: Union[int, str],
                     level: float, catalogue: Sequence[Equilibrium], amplitude: float = 0.01,
                     center: float = 0.5, width: float = 0.2, side: str = "right",
                     speed_tol: float = 0.03, **run_kwargs) -> Dict[str, object]:
    """
    Rerun an invasion with bump-perturbed kinetics and compare speed and wake

    Returns:
        dict with both speeds, the relative change, both wake ids and `passed`
    """
    results = {}
    for tag, kinetics in (("base", model), ("perturbed", perturb_model(model, amplitude, center, width))):
        traj = run(kinetics, initial, T, **run_kwargs)
        track = track_front(traj.snapshots, component, level, side)
        results[tag] = (track.lab_speed, wake_state(traj.final, track, catalogue))
    base_speed, base_wake = results["base"]
    pert_speed, pert_wake = results["perturbed"]
    change = abs(pert_speed - base_speed) / abs(base_speed) if base_speed else float("inf")
    passed = bool(change <= speed_tol and base_wake is not None and base_wake == pert_wake)
    logger.info("robustness check: speed change %.3g%%, wakes %s / %s", 100 * change, base_wake, pert_wake)
    return {
        "base_speed": base_speed, "perturbed_speed": pert_speed, "relative_change": change,
        "base_wake": base_wake, "perturbed_wake": pert_wake, "passed": passed,
    }
