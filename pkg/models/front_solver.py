"""
Traveling-wave solvers
Phase-plane shooting, projection-BC Newton solves, decay classification and continuation
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import sparse
from scipy.integrate import solve_ivp
from scipy.linalg import eig, orth
from scipy.sparse.linalg import spsolve

from models.dispersion_analyzer import ScalarLinearization, envelope_speed
from models.reaction_models import (
    Equilibrium,
    ReactionModel,
    balanced,
    make_equilibrium,
    refine_equilibrium,
)
from utils.config import Config
from utils.errors import ContractViolation, NoConnectionError, NoConvergenceError

logger = logging.getLogger(__name__)

StateLike = Union[Equilibrium, Sequence[float], np.ndarray, float]


class Steepness(str, Enum):
    GENERIC = "generic"
    STRONG_STABLE = "strong_stable"
    INDETERMINATE = "indeterminate"


@dataclass
class FrontProfile:
    """
    Discretized traveling wave U_*(xi) on a uniform grid

    values has shape (len(xi), n). The tail quantities eta, a_plus and steepness are
    measured on [0.5 L, 0.9 L].
    """
    xi: np.ndarray
    values: np.ndarray
    speed: float
    state_minus: Optional[Equilibrium] = None
    state_plus: Optional[Equilibrium] = None
    eta: float = float("nan")
    a_plus: float = float("nan")
    steepness: Steepness = Steepness.INDETERMINATE
    power: float = float("nan")
    residual: float = float("nan")
    boundary_residual: float = float("nan")

    @property
    def L(self) -> float:
        return float(self.xi[-1])

    @property
    def h(self) -> float:
        return float(self.xi[1] - self.xi[0])

    @property
    def n_components(self) -> int:
        return self.values.shape[1]

    def component(self, k: int) -> np.ndarray:
        return self.values[:, k]

    def at(self, x) -> np.ndarray:
        """Linear interpolation of all components at x"""
        x = np.asarray(x, dtype=float)
        return np.stack([np.interp(x, self.xi, self.values[:, k]) for k in range(self.n_components)], axis=-1)


@dataclass
class ContinuationPoint:
    parameter: float
    speed: float
    measure: float
    profile: FrontProfile


@dataclass
class ContinuationBranch:
    parameter: str
    points: List[ContinuationPoint] = field(default_factory=list)
    fold: Optional[float] = None
    fold_speed: Optional[float] = None
    status: str = "completed"

    @property
    def parameter_values(self) -> np.ndarray:
        return np.array([p.parameter for p in self.points])

    @property
    def measures(self) -> np.ndarray:
        return np.array([p.measure for p in self.points])


class DecayFit(NamedTuple):
    eta: float
    a_plus: float
    steepness: Steepness
    power: float


@dataclass
class SubSuperReport:
    mu: float
    epsilon: float
    M: float
    c_env: float
    x0: float
    glue_point: float
    sub_max: float
    super_min: float
    sub_ok: bool
    super_ok: bool
    phi_xi: np.ndarray
    phi_values: np.ndarray
    phi_zero: float
    x_grid: np.ndarray
    t_grid: np.ndarray


def _vector(state: StateLike) -> np.ndarray:
    if isinstance(state, Equilibrium):
        return state.vector
    return np.atleast_1d(np.asarray(state, dtype=float))


def tanh_ansatz(xi: np.ndarray, state_minus: StateLike, state_plus: StateLike,
                shifts: Optional[Sequence[float]] = None, width: float = 1.0) -> np.ndarray:
    """Per-component tanh interfaces from state_minus (xi -> -inf) to state_plus"""
    lo, hi = _vector(state_minus), _vector(state_plus)
    shifts = np.zeros(lo.size) if shifts is None else np.asarray(shifts, dtype=float)
    s = 0.5 * (1.0 + np.tanh((xi[:, None] - shifts[None, :]) / width))
    return lo[None, :] + (hi - lo)[None, :] * s


def traveling_wave_residual(model: ReactionModel, profile: FrontProfile) -> float:
    """max |D U'' + c U' + F(U)| over interior nodes (central differences)"""
    U, h = profile.values, profile.h
    d = np.asarray(model.diffusion)
    second = (U[2:] - 2.0 * U[1:-1] + U[:-2]) / h ** 2
    first = (U[2:] - U[:-2]) / (2.0 * h)
    res = d[None, :] * second + profile.speed * first + model.reaction(U[1:-1].T).T
    return float(np.max(np.abs(res)))


# ---------------------------------------------------------------------------
# tail classification

def fit_decay(xi: np.ndarray, magnitude: np.ndarray, window: Tuple[float, float] = Config.TAIL_WINDOW,
              floor: float = Config.TAIL_FLOOR) -> DecayFit:
    """
    Least-squares fit of log|U| = -eta xi + p log xi + const on the tail window

    The window is [w0 L, w1 L] with L = xi[-1]; if fewer than 20 samples there exceed
    `floor`, it shrinks to [w0 xi_b, w1 xi_b] with xi_b the last sample above the floor.
    """
    xi = np.asarray(xi, dtype=float)
    magnitude = np.abs(np.asarray(magnitude, dtype=float))
    L = xi[-1]
    w0, w1 = window

    def select(end):
        mask = (xi >= w0 * end) & (xi <= w1 * end) & (magnitude > floor)
        return mask

    mask = select(L)
    if mask.sum() < 20:
        above = np.nonzero((magnitude > floor) & (xi > 0))[0]
        if above.size:
            xi_b = xi[above[-1]]
            mask = select(xi_b)
            logger.debug("decay window shrunk to [%.3g, %.3g]", w0 * xi_b, w1 * xi_b)
    if mask.sum() < 20:
        return DecayFit(float("nan"), float("nan"), Steepness.INDETERMINATE, float("nan"))

    x = xi[mask]
    design = np.column_stack([-x, np.log(x), np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(design, np.log(magnitude[mask]), rcond=None)
    eta, power, const = (float(c) for c in coef)
    if abs(power - 1.0) < Config.STEEPNESS_TOL:
        steepness = Steepness.GENERIC
    elif abs(power) < Config.STEEPNESS_TOL:
        steepness = Steepness.STRONG_STABLE
    else:
        steepness = Steepness.INDETERMINATE
    return DecayFit(eta, float(np.exp(const)), steepness, power)


def measure_decay(profile: FrontProfile, component: Optional[int] = None,
                  window: Tuple[float, float] = Config.TAIL_WINDOW,
                  floor: float = Config.TAIL_FLOOR) -> DecayFit:
    """
    Decay rate, leading coefficient and steepness of the profile at +inf

    Args:
        profile: Front profile
        component: Component to fit (default: Euclidean norm of U - U_+)
        window: Tail window as fractions of L
        floor: Smallest magnitude used in the fit

    Returns:
        DecayFit(eta, a_plus, steepness, power)
    """
    target = np.zeros(profile.n_components) if profile.state_plus is None else profile.state_plus.vector
    deviation = profile.values - target[None, :]
    if component is None:
        magnitude = np.linalg.norm(deviation, axis=1)
    else:
        magnitude = deviation[:, component]
    return fit_decay(profile.xi, magnitude, window, floor)


def _with_decay(profile: FrontProfile) -> FrontProfile:
    fit = measure_decay(profile)
    profile.eta, profile.a_plus, profile.steepness, profile.power = fit.eta, fit.a_plus, fit.steepness, fit.power
    return profile


# ---------------------------------------------------------------------------
# shooting

def _scalar_maps(model: ReactionModel) -> Tuple[Callable[[float], float], Callable[[float], float]]:
    def f(u):
        return float(model.reaction(np.array([u]))[0])

    def fp(u):
        return float(np.asarray(model.jacobian(np.array([u])))[0, 0])

    return f, fp


# arrival distance for saddle targets; the heteroclinic is continued by its stable asymptotics
_SADDLE_STOP = 1e-4
# node targets are continued by their weak-stable asymptotics below this distance
_NODE_STOP = 1e-14


def _integrate_manifold(f, fp, c: float, from_state: float, to_state: float, span: float,
                        escape: float):
    """
    Follow the unstable manifold of (from_state, 0) of u'' + c u' + f(u) = 0

    Returns (solution, stop, mu_plus) where stop is "arrived" (saddle target reached up
    to a relative distance 1e-4), "settled" (node target reached up to roundoff),
    "crossed" (u crossed to_state) or "span".
    """
    mu_plus = 0.5 * (-c + np.sqrt(c * c - 4.0 * fp(from_state)))
    s = np.sign(to_state - from_state)
    delta = Config.SHOOT_OFFSET
    y0 = [from_state + s * delta, s * delta * mu_plus]
    saddle_target = fp(to_state) < 0
    stop_gap = _SADDLE_STOP * abs(to_state - from_state)

    def rhs(_, y):
        return [y[1], -c * y[1] - f(y[0])]

    def reached(_, y):
        gap = s * (to_state - y[0])
        return gap - stop_gap if saddle_target else gap
    reached.terminal, reached.direction = True, -1

    def settled(_, y):
        return abs(to_state - y[0]) + abs(y[1]) - _NODE_STOP
    settled.terminal, settled.direction = True, -1

    def escaped(_, y):
        return abs(y[0]) - escape
    escaped.terminal, escaped.direction = True, 1

    def turned(_, y):
        return s * y[1]
    turned.terminal, turned.direction = True, -1

    events = [reached, escaped, turned] + ([] if saddle_target else [settled])
    sol = solve_ivp(rhs, (0.0, span), y0, method="DOP853", rtol=Config.SHOOT_RTOL, atol=1e-18,
                    dense_output=True, events=events)
    if sol.t_events[1].size:
        raise NoConnectionError(f"trajectory escaped |u| > {escape:g} at c={c:g}")
    if sol.t_events[2].size:
        u_turn = float(sol.y_events[2][0][0])
        raise NoConnectionError(f"trajectory turned back at u={u_turn:.6g} before reaching {to_state:g} (c={c:g})")
    if sol.t_events[0].size:
        return sol, ("arrived" if saddle_target else "crossed"), mu_plus
    if not saddle_target and sol.t_events[3].size:
        return sol, "settled", mu_plus
    return sol, "span", mu_plus


def shoot_scalar_front(model: ReactionModel, c: float, from_state: float, L: float,
                       to_state: float = 0.0, n_grid: Optional[int] = None) -> FrontProfile:
    """
    Front of a scalar model by integrating the unstable manifold of (from_state, 0)

    The profile is re-gridded to uniform xi on [-L, L] with the mid-level
    (from_state + to_state)/2 at xi = 0. Saddle targets are reached up to the start
    offset and continued with their stable eigen-asymptotics.

    Args:
        model: Scalar reaction model
        c: Front speed
        from_state: Equilibrium with f' < 0 (left limit)
        L: Half-width of the output grid
        to_state: Right limit (default 0)
        n_grid: Grid points (default spacing 0.01)

    Returns:
        FrontProfile with measured decay
    """
    if model.n_components != 1:
        raise ContractViolation("shooting is implemented for scalar models only")
    f, fp = _scalar_maps(model)
    if abs(f(from_state)) > Config.EQUILIBRIUM_TOL or fp(from_state) >= 0:
        raise ContractViolation(f"from_state={from_state} is not a stable equilibrium of f")
    if abs(f(to_state)) > Config.EQUILIBRIUM_TOL:
        raise ContractViolation(f"to_state={to_state} is not an equilibrium of f")

    d = model.diffusion[0]
    if d != 1.0:
        raise ContractViolation("shooting assumes unit diffusion")
    escape = 2.0 * max(abs(from_state), abs(to_state), 1.0)
    sol, stop, mu_plus = _integrate_manifold(f, fp, c, from_state, to_state, 4.0 * L + 200.0, escape)
    t_end = sol.t[-1]

    mid = 0.5 * (from_state + to_state)
    t_grid = np.linspace(0.0, t_end, 20001)
    u_grid = sol.sol(t_grid)[0]
    s = np.sign(to_state - from_state)
    idx = int(np.argmax(s * (u_grid - mid) >= 0))
    if s * (u_grid[idx] - mid) < 0:
        raise NoConnectionError("trajectory never reached the mid-level")
    # refine the mid-level crossing with the dense output
    lo, hi = t_grid[max(idx - 1, 0)], t_grid[idx]
    for _ in range(80):
        m = 0.5 * (lo + hi)
        if s * (sol.sol(m)[0] - mid) >= 0:
            hi = m
        else:
            lo = m
    t_mid = 0.5 * (lo + hi)

    n_grid = n_grid or int(round(2.0 * L / 0.01)) + 1
    xi = np.linspace(-L, L, n_grid)
    t = xi + t_mid
    u = np.empty_like(xi)
    inside = (t >= 0.0) & (t <= t_end)
    u[inside] = sol.sol(t[inside])[0]
    before = t < 0.0
    u[before] = from_state + s * Config.SHOOT_OFFSET * np.exp(mu_plus * t[before])
    after = t > t_end
    if after.any():
        u_end = sol.y[0, -1]
        if stop == "arrived":
            mu_minus = 0.5 * (-c - np.sqrt(c * c - 4.0 * fp(to_state)))
            u[after] = to_state + (u_end - to_state) * np.exp(mu_minus * (t[after] - t_end))
        elif stop == "settled":
            disc = c * c - 4.0 * fp(to_state)
            mu_weak = 0.5 * (-c + np.sqrt(disc)) if disc >= 0 else -0.5 * c
            u[after] = to_state + (u_end - to_state) * np.exp(mu_weak * (t[after] - t_end))
        elif stop == "crossed":
            logger.warning("%s: trajectory crossed %.6g at xi=%.4g; padding with the target state",
                           model.name, to_state, t_end - t_mid)
            u[after] = to_state
        else:
            raise ContractViolation(f"integration span too short for L={L}")

    profile = FrontProfile(
        xi=xi, values=u[:, None], speed=float(c),
        state_minus=make_equilibrium(model, [from_state]),
        state_plus=make_equilibrium(model, [to_state]),
    )
    profile.residual = traveling_wave_residual(model, profile)
    profile.boundary_residual = float(max(abs(u[0] - from_state), abs(u[-1] - to_state)))
    return _with_decay(profile)


# ---------------------------------------------------------------------------
# boundary value problem

class _FrontSystem:
    """Discretized 0 = D U'' + c U' + F(U) with projection, Dirichlet and phase rows"""

    def __init__(self, model: ReactionModel, xi: np.ndarray, state_minus: np.ndarray, state_plus: np.ndarray,
                 speed: float, free_speed: Optional[bool], dirichlet_components: Sequence[int],
                 phase_component: int):
        self.model = model
        self.xi = xi
        self.N = xi.size
        self.h = float(xi[1] - xi[0])
        self.n = model.n_components
        self.u_minus = np.asarray(state_minus, dtype=float)
        self.u_plus = np.asarray(state_plus, dtype=float)
        self.speed = float(speed)
        self.dirichlet = tuple(sorted(set(int(k) for k in dirichlet_components)))
        self.projected = [k for k in range(self.n) if k not in self.dirichlet]
        self.phase_component = int(phase_component)
        self.phase_level = 0.5 * (self.u_minus[self.phase_component] + self.u_plus[self.phase_component])
        j = int(np.searchsorted(xi, 0.0))
        j = min(max(j, 1), self.N - 1)
        w = (0.0 - xi[j - 1]) / self.h
        self.phase_nodes = (j - 1, j)
        self.phase_weights = (1.0 - w, w)

        left, right = self._projection_rows(self.speed, fill=False)
        count = len(left) + len(right) + 2 * len(self.dirichlet) + 1
        if free_speed is None:
            free_speed = count == 2 * self.n + 1
        self.free_speed = bool(free_speed)
        self.target = 2 * self.n + (1 if self.free_speed else 0)
        if count > self.target:
            raise ContractViolation(
                f"{model.name}: {count} boundary and phase conditions exceed the {self.target} available"
            )
        self.rows_left, self.rows_right = self._projection_rows(self.speed)

    # boundary rows -------------------------------------------------------

    def _left_eig(self, state: np.ndarray, c: float):
        idx = self.projected
        J = np.asarray(self.model.jacobian(state), dtype=float)[np.ix_(idx, idx)]
        dinv = np.diag(1.0 / np.asarray(self.model.diffusion, dtype=float)[idx])
        m = len(idx)
        A = np.block([[np.zeros((m, m)), np.eye(m)], [-dinv @ J, -c * dinv]])
        w, vl = eig(A, left=True, right=False)
        return w, vl

    def _rows_from(self, vl: np.ndarray, which: Sequence[int]) -> np.ndarray:
        m = len(self.projected)
        if not len(which):
            return np.zeros((0, 2 * self.n))
        raw = np.concatenate([vl[:, which].real.T, vl[:, which].imag.T], axis=0)
        basis = orth(raw.T).T
        full = np.zeros((basis.shape[0], 2 * self.n))
        for a, k in enumerate(self.projected):
            full[:, k] = basis[:, a]
            full[:, self.n + k] = basis[:, m + a]
        return full

    def _projection_rows(self, c: float, fill: bool = True) -> Tuple[np.ndarray, np.ndarray]:
        if not self.projected:
            return np.zeros((0, 2 * self.n)), np.zeros((0, 2 * self.n))
        w, vl = self._left_eig(self.u_minus, c)
        left = self._rows_from(vl, [i for i in range(w.size) if w[i].real <= 1e-12])
        w, vl = self._left_eig(self.u_plus, c)
        chosen = [i for i in range(w.size) if w[i].real >= -1e-12]
        right = self._rows_from(vl, chosen)
        if fill:
            need = self.target - 2 * len(self.dirichlet) - 1 - left.shape[0]
            # strong stable modes at +L are excluded first
            for i in sorted((i for i in range(w.size) if i not in chosen), key=lambda i: w[i].real):
                if right.shape[0] >= need:
                    break
                chosen.append(i)
                right = self._rows_from(vl, chosen)
            if right.shape[0] != need:
                raise ContractViolation(
                    f"{self.model.name}: cannot match {need} conditions at +L with the available eigenmodes"
                )
        return left, right

    def refresh(self):
        self.rows_left, self.rows_right = self._projection_rows(self.speed)

    # residual and Jacobian --------------------------------------------------

    def unpack(self, z: np.ndarray) -> Tuple[np.ndarray, float]:
        U = z[:self.N * self.n].reshape(self.N, self.n)
        c = float(z[-1]) if self.free_speed else self.speed
        return U, c

    def pack(self, U: np.ndarray, c: float) -> np.ndarray:
        z = U.reshape(-1).astype(float)
        return np.append(z, c) if self.free_speed else z

    def _boundary_residual(self, U: np.ndarray, rows_left: np.ndarray, rows_right: np.ndarray) -> np.ndarray:
        h, n = self.h, self.n
        d_left = (-3.0 * U[0] + 4.0 * U[1] - U[2]) / (2.0 * h)
        d_right = (3.0 * U[-1] - 4.0 * U[-2] + U[-3]) / (2.0 * h)
        out = [
            rows_left[:, :n] @ (U[0] - self.u_minus) + rows_left[:, n:] @ d_left,
            rows_right[:, :n] @ (U[-1] - self.u_plus) + rows_right[:, n:] @ d_right,
        ]
        return np.concatenate(out)

    def residual(self, z: np.ndarray) -> np.ndarray:
        U, c = self.unpack(z)
        h = self.h
        d = np.asarray(self.model.diffusion, dtype=float)
        interior = (d[None, :] * (U[2:] - 2.0 * U[1:-1] + U[:-2]) / h ** 2
                    + c * (U[2:] - U[:-2]) / (2.0 * h)
                    + self.model.reaction(U[1:-1].T).T)
        parts = [interior.reshape(-1), self._boundary_residual(U, self.rows_left, self.rows_right)]
        for k in self.dirichlet:
            parts.append(np.array([U[0, k] - self.u_minus[k], U[-1, k] - self.u_plus[k]]))
        (j0, j1), (w0, w1) = self.phase_nodes, self.phase_weights
        pc = self.phase_component
        parts.append(np.array([w0 * U[j0, pc] + w1 * U[j1, pc] - self.phase_level]))
        return np.concatenate(parts)

    def jacobian(self, z: np.ndarray) -> sparse.csc_matrix:
        U, c = self.unpack(z)
        N, n, h = self.N, self.n, self.h
        d = np.asarray(self.model.diffusion, dtype=float)
        rows, cols, vals = [], [], []
        j = np.arange(1, N - 1)
        JF = np.asarray(self.model.jacobian(U[1:-1].T), dtype=float)
        for k in range(n):
            r = (j - 1) * n + k
            for offset, coef in ((-1, d[k] / h ** 2 - c / (2.0 * h)), (0, -2.0 * d[k] / h ** 2),
                                 (1, d[k] / h ** 2 + c / (2.0 * h))):
                rows.append(r)
                cols.append((j + offset) * n + k)
                vals.append(np.full(j.size, coef))
            for l in range(n):
                rows.append(r)
                cols.append(j * n + l)
                vals.append(JF[k, l])
            if self.free_speed:
                rows.append(r)
                cols.append(np.full(j.size, N * n))
                vals.append((U[2:, k] - U[:-2, k]) / (2.0 * h))

        base = (N - 2) * n
        stencils = (
            (self.rows_left, ((0, -3.0), (1, 4.0), (2, -1.0)), 0),
            (self.rows_right, ((N - 1, 3.0), (N - 2, -4.0), (N - 3, 1.0)), N - 1),
        )
        for block, stencil, end in stencils:
            for a in range(block.shape[0]):
                for k in range(n):
                    rows.append([base])
                    cols.append([end * n + k])
                    vals.append([block[a, k]])
                    for node, coef in stencil:
                        rows.append([base])
                        cols.append([node * n + k])
                        vals.append([block[a, n + k] * coef / (2.0 * h)])
                base += 1
        for k in self.dirichlet:
            rows.extend([[base], [base + 1]])
            cols.extend([[k], [(N - 1) * n + k]])
            vals.extend([[1.0], [1.0]])
            base += 2
        pc = self.phase_component
        for node, w in zip(self.phase_nodes, self.phase_weights):
            rows.append([base])
            cols.append([node * n + pc])
            vals.append([w])

        size = N * n + (1 if self.free_speed else 0)
        if self.free_speed:
            # c enters the projection rows through the eigenvectors
            eps = 1e-7
            left_p, right_p = self._projection_rows(c + eps)
            left_0, right_0 = self._projection_rows(c)
            if left_p.shape == left_0.shape and right_p.shape == right_0.shape:
                diff = (self._boundary_residual(U, left_p, right_p) - self._boundary_residual(U, left_0, right_0)) / eps
                rows.append(np.arange((N - 2) * n, (N - 2) * n + diff.size))
                cols.append(np.full(diff.size, N * n))
                vals.append(diff)
        mat = sparse.coo_matrix(
            (np.concatenate([np.asarray(v, float) for v in vals]),
             (np.concatenate([np.asarray(r) for r in rows]), np.concatenate([np.asarray(c_) for c_ in cols]))),
            shape=(size, size),
        )
        return mat.tocsc()


def _newton(system: _FrontSystem, z: np.ndarray, tol: float, max_iter: int = 80) -> Tuple[np.ndarray, float]:
    res = system.residual(z)
    norm = float(np.max(np.abs(res)))
    history = [norm]
    converged_once = False
    for it in range(max_iter):
        if norm <= tol:
            if converged_once:
                return z, norm
            converged_once = True
        dz = spsolve(system.jacobian(z), -res)
        if not np.all(np.isfinite(dz)):
            raise NoConvergenceError("singular Newton system", last_iterate=z, residual=norm)
        t = 1.0
        while True:
            trial = z + t * dz
            if system.free_speed:
                system.speed = float(trial[-1])
                system.refresh()
            r_trial = system.residual(trial)
            n_trial = float(np.max(np.abs(r_trial)))
            if n_trial < norm or t <= 1.0 / 64.0:
                break
            t *= 0.5
        z, res, norm = trial, r_trial, n_trial
        logger.debug("newton %d: residual %.3e (damping %.3g)", it, norm, t)
        history.append(norm)
        if converged_once and norm <= tol:
            return z, norm
        if len(history) > 5 and norm > tol and history[-1] > 0.9 * history[-6]:
            raise NoConvergenceError(f"Newton stagnated at residual {norm:.3e}", last_iterate=z, residual=norm)
    if norm <= tol:
        return z, norm
    raise NoConvergenceError(f"Newton did not converge in {max_iter} steps (residual {norm:.3e})",
                             last_iterate=z, residual=norm)


def _initial_values(xi: np.ndarray, init, state_minus, state_plus) -> np.ndarray:
    if init is None:
        return tanh_ansatz(xi, state_minus, state_plus)
    if isinstance(init, FrontProfile):
        return np.stack([np.interp(xi, init.xi, init.values[:, k]) for k in range(init.n_components)], axis=1)
    values = np.asarray(init, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    return values


def _profile_from(system: _FrontSystem, z: np.ndarray, model: ReactionModel, norm: float,
                  measure: bool = True) -> FrontProfile:
    U, c = system.unpack(z)
    profile = FrontProfile(
        xi=system.xi.copy(), values=U.copy(), speed=float(c),
        state_minus=make_equilibrium(model, system.u_minus),
        state_plus=make_equilibrium(model, system.u_plus),
        residual=float(norm),
        boundary_residual=float(max(np.linalg.norm(U[0] - system.u_minus), np.linalg.norm(U[-1] - system.u_plus))),
    )
    return _with_decay(profile) if measure else profile


def solve_front_bvp(model: ReactionModel, c: float, state_minus: StateLike, state_plus: StateLike,
                    L: float, n_grid: int, init=None, free_speed: Optional[bool] = None,
                    dirichlet_components: Sequence[int] = (), phase_component: int = 0,
                    tol: float = Config.BVP_TOL) -> FrontProfile:
    """
    Newton solve of 0 = D U'' + c U' + F(U) on [-L, L]

    Projection rows annihilate the stable/center modes of the limit at -L and the
    unstable/center modes at +L; if +L leaves conditions unmatched the strongest stable
    modes are excluded as well. Component `phase_component` equals its mid-level at
    xi = 0. The speed is an unknown when the conditions count 2n + 1.

    Args:
        model: Reaction model
        c: Speed (initial guess when free)
        state_minus: Limit at -L
        state_plus: Limit at +L
        L: Half-width
        n_grid: Number of nodes (>= 400)
        init: FrontProfile, array of shape (n_grid, n), or None for a tanh ansatz
        free_speed: Force the speed to be fixed (False) or free (True); default automatic
        dirichlet_components: Components held at their limits instead of projected
        phase_component: Component carrying the phase condition
        tol: Residual tolerance

    Returns:
        Converged FrontProfile with measured decay
    """
    if n_grid < 400:
        raise ContractViolation(f"n_grid must be >= 400, got {n_grid}")
    lo, hi = _vector(state_minus), _vector(state_plus)
    for state in (lo, hi):
        if np.max(np.abs(model.reaction(state))) > 1e-8:
            raise ContractViolation(f"{model.name}: {state} is not an equilibrium")
    xi = np.linspace(-L, L, n_grid)
    system = _FrontSystem(model, xi, lo, hi, c, free_speed, dirichlet_components, phase_component)
    if isinstance(init, FrontProfile) and system.free_speed:
        system.speed = init.speed
        system.refresh()
    U0 = _initial_values(xi, init, lo, hi)
    z, norm = _newton(system, system.pack(U0, system.speed), tol)
    profile = _profile_from(system, z, model, norm)
    logger.debug("%s: BVP converged, c=%.10g residual=%.2e", model.name, profile.speed, norm)
    return profile


# ---------------------------------------------------------------------------
# continuation

def _measure_default(U: np.ndarray) -> float:
    return float(np.max(np.abs(U[:, -1])))


def continue_branch(model_family: Union[ReactionModel, Callable[[float], ReactionModel]],
                    profile0: FrontProfile, parameter: str, param_range: Tuple[float, float],
                    step: float, dirichlet_components: Sequence[int] = (), phase_component: int = 0,
                    measure: Callable[[np.ndarray], float] = _measure_default, max_points: int = 400,
                    step_max: Optional[float] = None, tol: float = 1e-9) -> ContinuationBranch:
    """
    Pseudo-arclength continuation of a converged front in `parameter`

    parameter "c" continues in the speed with a fixed model; any other name is passed
    to `model_family(value)` with the speed held at profile0.speed (or free when the
    boundary count asks for it). Folds are flagged where the parameter component of the
    tangent changes sign and refined by bisection to 1e-4.

    Args:
        model_family: Model, or value -> model for model parameters
        profile0: Converged profile at param_range[0]
        parameter: "c" or a model parameter name
        param_range: (start, end) of the sweep
        step: Initial arclength step
        dirichlet_components: As in solve_front_bvp
        phase_component: As in solve_front_bvp
        measure: Branch measure of the profile values
        max_points: Point budget
        step_max: Largest arclength step (default 4 * step)

    Returns:
        ContinuationBranch with status "completed", "terminated" or "max_points"
    """
    start, end = (float(v) for v in param_range)
    direction = np.sign(end - start) or 1.0
    on_speed = parameter == "c"
    family = (lambda _: model_family) if isinstance(model_family, ReactionModel) else model_family
    model = family(start)
    xi = profile0.xi
    u_minus, u_plus = profile0.state_minus.vector, profile0.state_plus.vector
    speed0 = start if on_speed else profile0.speed
    system = _FrontSystem(model, xi, u_minus, u_plus, speed0,
                          False if on_speed else None, dirichlet_components, phase_component)
    step_max = step_max or 4.0 * step

    def set_param(p: float):
        if on_speed:
            system.speed = p
        else:
            new_model = family(p)
            system.u_minus = refine_equilibrium(new_model, system.u_minus)
            system.u_plus = refine_equilibrium(new_model, system.u_plus)
            if system.u_minus is None or system.u_plus is None:
                raise NoConvergenceError(f"limit states lost at {parameter}={p}")
            system.model = new_model
            system.phase_level = 0.5 * (system.u_minus[phase_component] + system.u_plus[phase_component])
        system.refresh()

    def G(z, p):
        set_param(p)
        if system.free_speed and not on_speed:
            system.speed = float(z[-1])
            system.refresh()
        return system.residual(z)

    def G_p(z, p):
        eps = 1e-7 * max(1.0, abs(p))
        return (G(z, p + eps) - G(z, p)) / eps

    theta = 1.0 / (xi.size * system.n)

    def bordered(z, p, tz, tp):
        col = G_p(z, p)  # leaves the system at p
        Gz = system.jacobian(z)
        return sparse.bmat([
            [Gz, sparse.csc_matrix(col[:, None])],
            [sparse.csc_matrix(theta * tz[None, :]), sparse.csc_matrix([[tp]])],
        ], format="csc")

    def tangent(z, p, tz_old, tp_old):
        M = bordered(z, p, tz_old, tp_old)
        rhs = np.zeros(M.shape[0])
        rhs[-1] = 1.0
        sol = spsolve(M, rhs)
        tz, tp = sol[:-1], sol[-1]
        scale = np.sqrt(theta * tz @ tz + tp * tp)
        return tz / scale, tp / scale

    def correct(z_pred, p_pred, z0, p0, tz, tp):
        z, p = z_pred.copy(), p_pred
        for it in range(10):
            g = G(z, p)
            arc = theta * tz @ (z - z0) + tp * (p - p0)
            res = np.append(g, arc - (theta * tz @ (z_pred - z0) + tp * (p_pred - p0)))
            if np.max(np.abs(g)) <= tol and it > 0:
                return z, p, it
            M = bordered(z, p, tz, tp)
            delta = spsolve(M, -res)
            if not np.all(np.isfinite(delta)):
                return None
            z, p = z + delta[:-1], p + delta[-1]
        g = G(z, p)
        return (z, p, 10) if np.max(np.abs(g)) <= tol else None

    z = system.pack(profile0.values, profile0.speed)
    p = start
    set_param(p)
    tz, tp = tangent(z, p, np.zeros_like(z), 1.0)
    if tp * direction < 0:
        tz, tp = -tz, -tp

    branch = ContinuationBranch(parameter=parameter)

    def record(z, p):
        _, c = system.unpack(z)
        U = z[:system.N * system.n].reshape(system.N, system.n)
        prof = _profile_from(system, z, system.model, float(np.max(np.abs(system.residual(z)))), measure=False)
        branch.points.append(ContinuationPoint(parameter=float(p), speed=float(p if on_speed else c),
                                               measure=measure(U), profile=prof))

    record(z, p)
    ds = float(step)
    while len(branch.points) < max_points:
        out = correct(z + ds * tz, p + ds * tp, z, p, tz, tp)
        if out is None:
            ds *= 0.5
            if ds < 1e-6:
                branch.status = "terminated"
                logger.warning("continuation in %s terminated at %s=%.6g (step collapse)", parameter, parameter, p)
                break
            continue
        z_new, p_new, iters = out
        tz_new, tp_new = tangent(z_new, p_new, tz, tp)
        if branch.fold is None and tp_new * tp < 0:
            branch.fold, branch.fold_speed = _refine_fold(z, p, tz, tp, ds, correct, tangent, system, on_speed)
            logger.info("fold in %s detected at %.6g", parameter, branch.fold)
        z, p, tz, tp = z_new, p_new, tz_new, tp_new
        record(z, p)
        if (p - end) * direction >= 0 or (branch.fold is not None and (p - start) * direction <= 0):
            break
        if iters <= 3:
            ds = min(1.5 * ds, step_max)
    else:
        branch.status = "max_points"
    return branch


def _refine_fold(z0, p0, tz0, tp0, ds, correct, tangent, system, on_speed) -> Tuple[float, float]:
    s_lo, s_hi = 0.0, ds
    p_lo = p_hi = p0
    c_mid = system.unpack(z0)[1]
    while True:
        s_mid = 0.5 * (s_lo + s_hi)
        out = correct(z0 + s_mid * tz0, p0 + s_mid * tp0, z0, p0, tz0, tp0)
        if out is None:
            break
        z_mid, p_mid, _ = out
        _, tp_mid = tangent(z_mid, p_mid, tz0, tp0)
        c_mid = p_mid if on_speed else system.unpack(z_mid)[1]
        if tp_mid * tp0 > 0:
            s_lo, p_lo = s_mid, p_mid
        else:
            s_hi, p_hi = s_mid, p_mid
        if (abs(p_hi - p_lo) < 1e-4 and s_lo > 0 and s_hi < ds) or s_hi - s_lo < 1e-8:
            break
    fold = 0.5 * (p_lo + p_hi) if s_lo > 0 or s_hi < ds else p0
    return float(fold), float(c_mid)


# ---------------------------------------------------------------------------
# sub- and super-solutions of the skew wake equation

def verify_sub_super(mu: float, epsilon: float, M: float, profile_u: Optional[FrontProfile] = None,
                     x_grid: Optional[np.ndarray] = None, t_grid: Optional[np.ndarray] = None,
                     margin: float = 1.0) -> SubSuperReport:
    """
    Sign checks of N(v) = v_t - v_xx - 2 v_x - (2 u_*^2 - 1 + mu)(v - v^3) in the frame of speed 2

    Sub-solution: the front phi of 0 = phi'' + (2 - eps) phi' + phi - phi^3 moving left at
    speed eps, cut at its first zero x0 placed where 2(1 - u_*^2) <= mu - eps.
    Super-solution: min(1, M exp(nu (x - c_env t))) with nu = -2 - eps and c_env the
    envelope speed of v_t = v_xx + 2 v_x.

    Args:
        mu: Skew parameter in (0, 1)
        epsilon: Speed defect, 0 < epsilon < mu
        M: Amplitude of the exponential super-solution
        profile_u: Primary u-front at speed 2 (computed when omitted)
        x_grid: Comoving positions
        t_grid: Times

    Returns:
        SubSuperReport with the maximal N on the sub-solution support and the minimal N
        on the exponential part of the super-solution
    """
    if not 0.0 < mu < 1.0:
        raise ContractViolation(f"mu must lie in (0, 1), got {mu}")
    if not 0.0 < epsilon < mu:
        raise ContractViolation(f"need 0 < epsilon < mu, got epsilon={epsilon}, mu={mu}")
    if profile_u is None:
        profile_u = shoot_scalar_front(balanced(), 2.0, 1.0, 30.0)
    u_star = profile_u.values[:, 0]
    if np.any(np.diff(u_star) > 1e-12):
        raise ContractViolation("primary front must be monotonically decreasing")

    def u_at(x):
        return np.interp(x, profile_u.xi, u_star)

    # descending profile: interpolate position from value
    def position_of(value):
        return float(np.interp(-value, -u_star, profile_u.xi))

    x_star = position_of(np.sqrt((1.0 - mu) / 2.0))
    nu = -2.0 - epsilon
    c_env = envelope_speed(ScalarLinearization(1.0, 2.0, 0.0), nu)
    glue = np.log(M) / (2.0 + epsilon)
    if not x_star < glue:
        raise ContractViolation(f"M too small: glue point {glue:.4g} must exceed x_*={x_star:.4g}")
    x0 = position_of(np.sqrt(1.0 - 0.5 * (mu - epsilon))) - margin

    f, fp = _scalar_maps(balanced())
    sol, stop, _ = _integrate_manifold(f, fp, 2.0 - epsilon, 1.0, 0.0, 400.0, 2.0)
    if stop != "crossed":
        raise NoConnectionError("slow front did not cross zero")
    phi_zero = float(sol.t[-1])
    phi_xi = np.linspace(0.0, phi_zero, 4001)
    phi_y = sol.sol(phi_xi)

    x_grid = np.linspace(x0 - phi_zero + 1.0, glue + 40.0, 801) if x_grid is None else np.asarray(x_grid, float)
    t_grid = np.linspace(0.0, 20.0, 41) if t_grid is None else np.asarray(t_grid, float)
    X, T = np.meshgrid(x_grid, t_grid)
    U = u_at(X)

    # sub-solution, evaluated where phi > 0
    arg = X + epsilon * T - x0 + phi_zero
    support = (arg > 0.0) & (arg < phi_zero)
    phi = np.interp(arg, phi_xi, phi_y[0])
    phi_x = np.interp(arg, phi_xi, phi_y[1])
    phi_xx = -(2.0 - epsilon) * phi_x - (phi - phi ** 3)
    n_sub = epsilon * phi_x - phi_xx - 2.0 * phi_x - (2.0 * U ** 2 - 1.0 + mu) * (phi - phi ** 3)
    behind = (X + epsilon * T < x0) & support
    sub_max = float(np.max(n_sub[behind])) if behind.any() else float("nan")

    # super-solution, exponential part
    expo = M * np.exp(nu * (X - c_env * T))
    ahead = expo < 1.0
    n_super = expo * (-nu * c_env - nu ** 2 - 2.0 * nu - (2.0 * U ** 2 - 1.0 + mu) * (1.0 - expo ** 2))
    super_min = float(np.min(n_super[ahead])) if ahead.any() else float("nan")

    report = SubSuperReport(
        mu=float(mu), epsilon=float(epsilon), M=float(M), c_env=float(c_env), x0=float(x0),
        glue_point=float(glue), sub_max=sub_max, super_min=super_min,
        sub_ok=bool(sub_max < 0.0), super_ok=bool(super_min >= -1e-12),
        phi_xi=phi_xi, phi_values=phi_y[0], phi_zero=phi_zero, x_grid=x_grid, t_grid=t_grid,
    )
    logger.info("sub/super check mu=%.3g eps=%.3g: sub max N=%.3e, super min N=%.3e",
                mu, epsilon, sub_max, super_min)
    return report


def sub_super_envelopes(report: SubSuperReport, x: np.ndarray, t: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Lower and upper envelopes of shape (len(t), len(x)) in the frame of speed 2"""
    X, T = np.meshgrid(np.asarray(x, float), np.asarray(t, float))
    arg = X + report.epsilon * T - report.x0 + report.phi_zero
    lower = np.where(arg < report.phi_zero, np.interp(arg, report.phi_xi, report.phi_values), 0.0)
    upper = np.minimum(1.0, report.M * np.exp((-2.0 - report.epsilon) * (X - report.c_env * T)))
    return lower, upper
