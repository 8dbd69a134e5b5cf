"""
Reaction-diffusion models U_t = D U_xx + F(U)
Presets, equilibria and the terrace nonlinearity builder
"""
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from itertools import product
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from utils.config import Config
from utils.errors import CatalogMissError, ContractViolation, InvalidSpecError

logger = logging.getLogger(__name__)

ArrayMap = Callable[[np.ndarray], np.ndarray]


class Stability(str, Enum):
    STABLE = "stable"
    SADDLE = "saddle"
    UNSTABLE = "unstable"


@dataclass(frozen=True)
class ReactionModel:
    """
    A one- or two-component reaction-diffusion system

    `reaction` maps states of shape (n,) or (n, m) to rates of the same shape;
    `jacobian` maps them to (n, n) or (n, n, m).
    """
    name: str
    diffusion: Tuple[float, ...]
    reaction: ArrayMap
    jacobian: ArrayMap
    params: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.diffusion) not in (1, 2):
            raise InvalidSpecError(f"{self.name}: only 1 or 2 components supported")
        if any(d <= 0 for d in self.diffusion):
            raise InvalidSpecError(f"{self.name}: diffusion entries must be positive, got {self.diffusion}")

    @property
    def n_components(self) -> int:
        return len(self.diffusion)

    @property
    def diffusion_matrix(self) -> np.ndarray:
        return np.diag(np.asarray(self.diffusion, dtype=float))


@dataclass(frozen=True)
class Equilibrium:
    state: Tuple[float, ...]
    jac_eigenvalues: Tuple[complex, ...]
    stability: Stability
    label: str = ""

    @property
    def vector(self) -> np.ndarray:
        return np.asarray(self.state, dtype=float)


@dataclass(frozen=True)
class TerraceSpec:
    """
    Stack of stable levels 0 = u_0 < u_1 < ... < u_N joined by fronts of one common speed

    levels, modification_intervals and detune default to integer levels,
    the middle 60% of each gap, and zero detuning.
    """
    n_levels: int
    levels: Optional[Tuple[float, ...]] = None
    modification_intervals: Optional[Tuple[Tuple[float, float], ...]] = None
    detune: Optional[Tuple[float, ...]] = None

    def resolved_levels(self) -> Tuple[float, ...]:
        if self.levels is not None:
            return tuple(float(u) for u in self.levels)
        return tuple(float(l) for l in range(self.n_levels + 1))

    def resolved_intervals(self) -> Tuple[Tuple[float, float], ...]:
        if self.modification_intervals is not None:
            return tuple((float(a), float(b)) for a, b in self.modification_intervals)
        levels = self.resolved_levels()
        out = []
        for lo, hi in zip(levels[:-1], levels[1:]):
            gap = hi - lo
            out.append((lo + 0.2 * gap, hi - 0.2 * gap))
        return tuple(out)

    def resolved_detune(self) -> Tuple[float, ...]:
        if self.detune is not None:
            return tuple(float(e) for e in self.detune)
        return tuple(0.0 for _ in range(self.n_levels))


# ---------------------------------------------------------------------------
# helpers

def _matrix(rows, like) -> np.ndarray:
    """Assemble a Jacobian whose entries broadcast against `like`"""
    shape = np.shape(like)
    return np.array([[np.broadcast_to(np.asarray(e, dtype=float), shape) for e in row] for row in rows])


def _bump(s):
    """C^2 bump 64 s^3 (1-s)^3 on [0, 1], peak value 1"""
    s = np.asarray(s, dtype=float)
    inside = (s > 0.0) & (s < 1.0)
    return np.where(inside, 64.0 * s ** 3 * (1.0 - s) ** 3, 0.0)


def _bump_prime(s):
    s = np.asarray(s, dtype=float)
    inside = (s > 0.0) & (s < 1.0)
    return np.where(inside, 192.0 * s ** 2 * (1.0 - s) ** 2 * (1.0 - 2.0 * s), 0.0)


def classify(eigenvalues: Sequence[complex]) -> Stability:
    re = np.real(np.asarray(eigenvalues))
    if np.max(re) < 0:
        return Stability.STABLE
    if np.min(re) > 0:
        return Stability.UNSTABLE
    return Stability.SADDLE


def make_equilibrium(model: ReactionModel, state: Sequence[float], label: str = "") -> Equilibrium:
    """Wrap a state as an Equilibrium with its Jacobian spectrum"""
    vec = np.asarray(state, dtype=float)
    eigs = np.linalg.eigvals(model.jacobian(vec))
    return Equilibrium(
        state=tuple(float(x) for x in vec),
        jac_eigenvalues=tuple(complex(e) for e in eigs),
        stability=classify(eigs),
        label=label,
    )


# ---------------------------------------------------------------------------
# operations

def eval_reaction(model: ReactionModel, U) -> np.ndarray:
    """
    Evaluate F(U)

    Args:
        model: Reaction model
        U: State vector of length n (or array of shape (n, m))

    Returns:
        Rate vector with the shape of U
    """
    arr = np.asarray(U, dtype=float)
    if arr.ndim == 0 or arr.shape[0] != model.n_components:
        raise ContractViolation(
            f"{model.name}: state has leading dimension {arr.shape[:1]}, expected {model.n_components}"
        )
    return model.reaction(arr)


def refine_equilibrium(model: ReactionModel, seed) -> Optional[np.ndarray]:
    """Newton refinement of an equilibrium from a seed; None when Newton fails"""
    u = np.array(seed, dtype=float)
    for _ in range(Config.NEWTON_MAX_ITER):
        f = model.reaction(u)
        if np.max(np.abs(f)) <= Config.EQUILIBRIUM_NEWTON_TOL:
            return u
        try:
            du = np.linalg.solve(model.jacobian(u), -f)
        except np.linalg.LinAlgError:
            return None
        u = u + du
        if not np.all(np.isfinite(u)) or np.max(np.abs(u)) > 1e6:
            return None
    if np.max(np.abs(model.reaction(u))) <= Config.EQUILIBRIUM_TOL:
        return u
    return None


def find_equilibria(model: ReactionModel, box: Sequence[Tuple[float, float]], grid: int = 21) -> List[Equilibrium]:
    """
    Locate equilibria inside a box by Newton refinement from a seed grid

    Args:
        model: Reaction model
        box: One (lo, hi) pair per component
        grid: Seeds per axis (>= 8)

    Returns:
        De-duplicated, classified and labelled equilibria sorted by state
    """
    if grid < 8:
        raise ContractViolation(f"grid must be >= 8, got {grid}")
    box = [tuple(b) for b in box]
    if len(box) != model.n_components:
        raise ContractViolation(f"box has {len(box)} axes, model has {model.n_components} components")

    axes = [np.linspace(lo, hi, grid) for lo, hi in box]
    found: List[np.ndarray] = []
    dropped = 0
    for seed in product(*axes):
        root = refine_equilibrium(model, np.asarray(seed))
        if root is None:
            dropped += 1
            continue
        if any(r < lo - 1e-9 or r > hi + 1e-9 for r, (lo, hi) in zip(root, box)):
            continue
        root = np.where(np.abs(root) < 1e-14, 0.0, root)
        if all(np.linalg.norm(root - other) > Config.EQUILIBRIUM_DEDUP for other in found):
            found.append(root)
    if dropped:
        logger.debug("%s: %d Newton seeds did not converge", model.name, dropped)

    found.sort(key=lambda r: tuple(r))
    return label_equilibria(model, [make_equilibrium(model, r) for r in found])


def _format_coordinate(x: float) -> str:
    if abs(x) < 1e-9:
        return "0"
    if abs(x - round(x)) < 1e-6:
        return f"{int(round(x)):+d}"
    return f"{x:+.4g}"


def label_equilibria(model: ReactionModel, equilibria: Sequence[Equilibrium]) -> List[Equilibrium]:
    """
    Attach stable identifiers

    forced-CGL family: "O" for the origin, "A<j>" by phase sector of width 60 degrees;
    terraces: "u<l>" by level index; otherwise rounded coordinate tuples such as "(+1,-1)".
    """
    labelled = []
    seen: Dict[str, int] = {}
    levels = terrace_levels(model)
    for eq in equilibria:
        vec = eq.vector
        if model.name in ("forced_cgl", "cgl_real"):
            if np.linalg.norm(vec) < 1e-9:
                label = "O"
            else:
                j = int(round(math.atan2(vec[1], vec[0]) / (math.pi / 3.0))) % 6
                label = f"A{j}"
        elif levels is not None:
            idx = int(np.argmin([abs(vec[0] - u) for u in levels]))
            label = f"u{idx}" if abs(vec[0] - levels[idx]) < 1e-6 else f"({_format_coordinate(vec[0])})"
        else:
            label = "(" + ",".join(_format_coordinate(x) for x in vec) + ")"
        if label in seen:
            seen[label] += 1
            label = f"{label}#{seen[label]}"
        else:
            seen[label] = 0
        labelled.append(replace(eq, label=label))
    return labelled


# ---------------------------------------------------------------------------
# presets

def nagumo(a: float = -1.0) -> ReactionModel:
    """f(u) = u(1-u)(u-a); a = -1 is the balanced cubic u - u^3"""

    def reaction(U):
        u = U[0]
        return np.array([u * (1.0 - u) * (u - a)])

    def jacobian(U):
        u = U[0]
        return _matrix([[-3.0 * u ** 2 + 2.0 * (1.0 + a) * u - a]], u)

    return ReactionModel("nagumo", (1.0,), reaction, jacobian, {"a": float(a)})


def balanced() -> ReactionModel:
    return replace(nagumo(-1.0), name="balanced")


def kpp() -> ReactionModel:
    """Logistic f(u) = u(1-u)"""

    def reaction(U):
        u = U[0]
        return np.array([u * (1.0 - u)])

    def jacobian(U):
        u = U[0]
        return _matrix([[1.0 - 2.0 * u]], u)

    return ReactionModel("kpp", (1.0,), reaction, jacobian, {})


def linear(r: float = 1.0) -> ReactionModel:
    """u_t = u_xx + r u"""

    def reaction(U):
        return np.array([r * U[0]])

    def jacobian(U):
        return _matrix([[r]], U[0])

    return ReactionModel("linear", (1.0,), reaction, jacobian, {"r": float(r)})


def fhn(a: float = -0.2, b: float = 0.0, gamma: float = 0.0, epsilon: float = 0.01,
        d_v: float = 1e-3) -> ReactionModel:
    """FitzHugh-Nagumo kinetics u(1-u)(u-a) - v, eps (u - gamma v + b)"""

    def reaction(U):
        u, v = U[0], U[1]
        return np.array([u * (1.0 - u) * (u - a) - v, epsilon * (u - gamma * v + b)])

    def jacobian(U):
        u = U[0]
        return _matrix([
            [-3.0 * u ** 2 + 2.0 * (1.0 + a) * u - a, -1.0],
            [epsilon, -epsilon * gamma],
        ], u)

    params = {"a": float(a), "b": float(b), "gamma": float(gamma), "epsilon": float(epsilon), "d_v": float(d_v)}
    return ReactionModel("fhn", (1.0, float(d_v)), reaction, jacobian, params)


def forced_cgl(alpha: float = 0.02, beta: float = 0.5, coupling_sign: float = -1.0) -> ReactionModel:
    """
    Real form of the forced complex Ginzburg-Landau kinetics

    u: (1+alpha) u + beta (u^2 - v^2) - u (u^2 + v^2)
    v: (1-alpha) v + s 2 beta u v - v (u^2 + v^2), s = coupling_sign (default -1)
    """
    s = float(coupling_sign)

    def reaction(U):
        u, v = U[0], U[1]
        r2 = u ** 2 + v ** 2
        return np.array([
            (1.0 + alpha) * u + beta * (u ** 2 - v ** 2) - u * r2,
            (1.0 - alpha) * v + s * 2.0 * beta * u * v - v * r2,
        ])

    def jacobian(U):
        u, v = U[0], U[1]
        return _matrix([
            [1.0 + alpha + 2.0 * beta * u - 3.0 * u ** 2 - v ** 2, -2.0 * beta * v - 2.0 * u * v],
            [s * 2.0 * beta * v - 2.0 * u * v, 1.0 - alpha + s * 2.0 * beta * u - u ** 2 - 3.0 * v ** 2],
        ], u)

    params = {"alpha": float(alpha), "beta": float(beta), "coupling_sign": s}
    return ReactionModel("forced_cgl", (1.0, 1.0), reaction, jacobian, params)


def forced_cgl_axis(alpha: float = 0.02, beta: float = 0.5) -> ReactionModel:
    """Forced-CGL u-equation restricted to the invariant line v = 0"""

    def reaction(U):
        u = U[0]
        return np.array([(1.0 + alpha) * u + beta * u ** 2 - u ** 3])

    def jacobian(U):
        u = U[0]
        return _matrix([[1.0 + alpha + 2.0 * beta * u - 3.0 * u ** 2]], u)

    return ReactionModel("forced_cgl_axis", (1.0,), reaction, jacobian, {"alpha": float(alpha), "beta": float(beta)})


def cgl_real() -> ReactionModel:
    model = forced_cgl(0.0, 0.0)
    return replace(model, name="cgl_real", params={})


def skew(mu: float = 0.1) -> ReactionModel:
    """u - u^3, (2u^2 - 1 + mu)(v - v^3)"""

    def reaction(U):
        u, v = U[0], U[1]
        return np.array([u - u ** 3, (2.0 * u ** 2 - 1.0 + mu) * (v - v ** 3)])

    def jacobian(U):
        u, v = U[0], U[1]
        return _matrix([
            [1.0 - 3.0 * u ** 2, 0.0],
            [4.0 * u * (v - v ** 3), (2.0 * u ** 2 - 1.0 + mu) * (1.0 - 3.0 * v ** 2)],
        ], u)

    return ReactionModel("skew", (1.0, 1.0), reaction, jacobian, {"mu": float(mu)})


def interface_sn(mu: float = 3.6, delta: float = 1e-3) -> ReactionModel:
    """u - u^3, mu (u - u^3) v - v^3 + delta (u - u^3)"""

    def reaction(U):
        u, v = U[0], U[1]
        g = u - u ** 3
        return np.array([g, mu * g * v - v ** 3 + delta * g])

    def jacobian(U):
        u, v = U[0], U[1]
        dg = 1.0 - 3.0 * u ** 2
        return _matrix([
            [dg, 0.0],
            [dg * (mu * v + delta), mu * (u - u ** 3) - 3.0 * v ** 2],
        ], u)

    return ReactionModel("interface_sn", (1.0, 1.0), reaction, jacobian, {"mu": float(mu), "delta": float(delta)})


PRESETS: Dict[str, Callable[..., ReactionModel]] = {
    "nagumo": nagumo,
    "balanced": balanced,
    "kpp": kpp,
    "linear": linear,
    "fhn": fhn,
    "cgl_real": cgl_real,
    "forced_cgl": forced_cgl,
    "forced_cgl_axis": forced_cgl_axis,
    "skew": skew,
    "interface_sn": interface_sn,
}


def presets() -> Dict[str, Callable[..., ReactionModel]]:
    """Catalogue of named model builders"""
    return dict(PRESETS)


def get_preset(name: str, **params) -> ReactionModel:
    """Build a preset by name; unknown names raise CatalogMissError"""
    try:
        builder = PRESETS[name]
    except KeyError:
        raise CatalogMissError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}")
    return builder(**params)


# ---------------------------------------------------------------------------
# closed forms used across the forced-CGL analysis

def real_states(alpha: float, beta: float) -> Tuple[float, float]:
    """Nonzero real equilibria u_+ > 0 > u_- of the forced-CGL u-equation at v = 0"""
    s = math.sqrt(4.0 + 4.0 * alpha + beta ** 2)
    return 0.5 * (beta + s), 0.5 * (beta - s)


def pushed_threshold(alpha: float) -> float:
    """Real positive front turns pushed above beta_p"""
    return math.sqrt((1.0 + alpha) / 2.0)


def wake_threshold_unweighted(alpha: float) -> float:
    """The u_- wake is unstable for beta above this value"""
    return 2.0 * alpha / math.sqrt(9.0 + 3.0 * alpha)


def wake_threshold_weighted(alpha: float) -> float:
    """Weighted wake instability onset at the optimal leading-edge weight"""
    return (1.0 + 3.0 * alpha) / math.sqrt(6.0)


def perturb_model(model: ReactionModel, amplitude: float = 0.01, center: float = 0.5,
                  width: float = 0.2, component: int = 0) -> ReactionModel:
    """Add a compactly supported C^2 bump amplitude*B(U_k) to F_k"""
    lo, span = center - width, 2.0 * width

    def reaction(U):
        out = np.array(model.reaction(U), dtype=float)
        out[component] = out[component] + amplitude * _bump((U[component] - lo) / span)
        return out

    def jacobian(U):
        out = np.array(model.jacobian(U), dtype=float)
        out[component, component] = out[component, component] + amplitude * _bump_prime((U[component] - lo) / span) / span
        return out

    params = dict(model.params, perturbation=float(amplitude))
    return replace(model, name=model.name, reaction=reaction, jacobian=jacobian, params=params)


# ---------------------------------------------------------------------------
# terraces

def terrace_levels(model: ReactionModel) -> Optional[Tuple[float, ...]]:
    if "N" not in model.params or model.name != "terrace":
        return None
    n = int(model.params["N"])
    return tuple(model.params[f"level_{l}"] for l in range(n + 1))


def _connection_miss(f: Callable, fprime: Callable, upper: float, lower: float, c: float) -> float:
    """
    Signed miss of the unstable manifold of (upper, 0) at speed c

    Negative: passes `lower` with u_x < 0 (overshoot); positive: turns back above `lower`.
    """
    mu = 0.5 * (-c + math.sqrt(c * c - 4.0 * fprime(upper)))
    offset = Config.SHOOT_OFFSET * (upper - lower)
    y0 = [upper - offset, -offset * mu]

    def rhs(_, y):
        return [y[1], -c * y[1] - f(y[0])]

    def passed(_, y):
        return y[0] - lower
    passed.terminal, passed.direction = True, -1

    def turned(_, y):
        return y[1]
    turned.terminal, turned.direction = True, 1

    sol = solve_ivp(rhs, (0.0, 400.0), y0, method="DOP853", rtol=1e-10, atol=1e-13, events=[passed, turned])
    if sol.t_events[0].size:
        return float(sol.y_events[0][0][1])
    if sol.t_events[1].size:
        return float(sol.y_events[1][0][0] - lower)
    return float(sol.y[0, -1] - lower)


def build_terrace(spec: TerraceSpec) -> ReactionModel:
    """
    Build a scalar nonlinearity whose fronts u_l -> u_{l-1} all travel at c_lin = 2

    The base polynomial kappa*u*prod(u_l - u)*prod(u - theta_l) has stable zeros at every
    level and unstable zeros theta_l at gap midpoints (l >= 2); kappa makes f'(0) = 1.
    A C^2 bump in J_l is tuned so the connection u_l -> u_{l-1} exists at speed 2, then
    shifted by detune_l >= 0 so that the connection is broken on the overshoot side.

    Args:
        spec: TerraceSpec

    Returns:
        Scalar ReactionModel named "terrace"
    """
    n = int(spec.n_levels)
    if n < 1:
        raise InvalidSpecError(f"n_levels must be >= 1, got {n}")
    levels = spec.resolved_levels()
    if len(levels) != n + 1:
        raise InvalidSpecError(f"expected {n + 1} levels including u_0 = 0, got {len(levels)}")
    if levels[0] != 0.0:
        raise InvalidSpecError("levels must start at u_0 = 0")
    if any(b <= a for a, b in zip(levels[:-1], levels[1:])):
        raise InvalidSpecError(f"levels must be strictly increasing: {levels}")
    intervals = spec.resolved_intervals()
    if len(intervals) != n:
        raise InvalidSpecError(f"expected {n} modification intervals, got {len(intervals)}")
    for l, (a, b) in enumerate(intervals, start=1):
        if not (levels[l - 1] < a < b < levels[l]):
            raise InvalidSpecError(f"interval J_{l} = [{a}, {b}] must lie inside ({levels[l - 1]}, {levels[l]})")
    detune = spec.resolved_detune()
    if len(detune) != n or any(e < 0 for e in detune):
        raise InvalidSpecError(f"detune needs {n} non-negative entries, got {detune}")

    thetas = [0.5 * (levels[l - 1] + levels[l]) for l in range(2, n + 1)]
    base = np.poly1d([1.0, 0.0])
    for u_l in levels[1:]:
        base = base * np.poly1d([-1.0, u_l])
    for theta in thetas:
        base = base * np.poly1d([1.0, -theta])
    base = base / base.deriv()(0.0)
    base_prime = base.deriv()

    amplitudes = [0.0] * n

    def make_f(amps):
        def f(u):
            out = base(u)
            for (a, b), amp in zip(intervals, amps):
                if amp != 0.0:
                    out = out + amp * _bump((u - a) / (b - a))
            return out

        def fprime(u):
            out = base_prime(u)
            for (a, b), amp in zip(intervals, amps):
                if amp != 0.0:
                    out = out + amp * _bump_prime((u - a) / (b - a)) / (b - a)
            return out
        return f, fprime

    amplitudes[0] = detune[0]
    for l in range(2, n + 1):
        upper, lower = levels[l], levels[l - 1]

        def miss(amp, l=l, upper=upper, lower=lower):
            trial = list(amplitudes)
            trial[l - 1] = amp
            f, fp = make_f(trial)
            return _connection_miss(lambda u: float(f(u)), lambda u: float(fp(u)), upper, lower, 2.0)

        lo, hi = 0.0, 1.0
        if miss(lo) <= 0.0:
            lo = -1.0
            while miss(lo) <= 0.0:
                lo *= 2.0
                if lo < -1e4:
                    raise InvalidSpecError(f"cannot tune level {l}: connection overshoots for all amplitudes")
        while miss(hi) > 0.0:
            hi *= 2.0
            if hi > 1e4:
                raise InvalidSpecError(f"cannot tune level {l}: connection never reaches u_{l - 1}")
        tuned = brentq(miss, lo, hi, xtol=1e-12)
        amplitudes[l - 1] = tuned + detune[l - 1]
        logger.debug("terrace level %d: tuned bump amplitude %.10g (+ detune %.3g)", l, tuned, detune[l - 1])

    f, fprime = make_f(amplitudes)

    def reaction(U):
        return np.array([f(U[0])])

    def jacobian(U):
        return _matrix([[fprime(U[0])]], U[0])

    params: Dict[str, float] = {"N": float(n)}
    for l, u_l in enumerate(levels):
        params[f"level_{l}"] = float(u_l)
    for l, amp in enumerate(amplitudes, start=1):
        params[f"amp_{l}"] = float(amp)
        params[f"detune_{l}"] = float(detune[l - 1])
    model = ReactionModel("terrace", (1.0,), reaction, jacobian, params)

    values = [float(f(u)) for u in levels]
    slopes = [float(fprime(u)) for u in levels]
    if max(abs(v) for v in values) > 1e-12 or slopes[0] <= 0 or any(s >= 0 for s in slopes[1:]):
        raise InvalidSpecError(f"terrace invariants violated: f(levels)={values}, f'(levels)={slopes}")
    return model
