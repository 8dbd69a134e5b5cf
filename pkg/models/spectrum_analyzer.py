"""
Spectral stability of fronts
Weighted linearizations, self-adjoint point spectra, critical couplings and the marginal-stability checklist
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy import sparse
from scipy.linalg import eigh_tridiagonal

from models.dispersion_analyzer import SpectrumCurve, find_double_roots, weighted_essential_spectrum
from models.front_solver import FrontProfile, Steepness, shoot_scalar_front
from models.reaction_models import ReactionModel, forced_cgl_axis, real_states, wake_threshold_weighted
from utils.config import Config
from utils.errors import ContractViolation, FrontSolveError, NumericalError

logger = logging.getLogger(__name__)


class Verdict(str, Enum):
    MARGINALLY_STABLE_PULLED = "marginally_stable_pulled"
    UNSTABLE = "unstable"
    INDETERMINATE = "indeterminate"


class Mechanism(str, Enum):
    POINT = "point"
    ESSENTIAL = "essential"


@dataclass
class SchrodingerOperator:
    """d w'' + (V(x) + shift) w on interior nodes x with Dirichlet ends"""
    x: np.ndarray
    potential: np.ndarray
    shift: float = 0.0
    diffusion: float = 1.0

    @property
    def h(self) -> float:
        return float(self.x[1] - self.x[0])

    def tridiagonal(self) -> Tuple[np.ndarray, np.ndarray]:
        k = self.diffusion / self.h ** 2
        diag = -2.0 * k + self.potential + self.shift
        off = np.full(self.x.size - 1, k)
        return diag, off

    def dense(self) -> np.ndarray:
        diag, off = self.tridiagonal()
        return np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)

    @property
    def essential_edge(self) -> float:
        return float(max(self.potential[0], self.potential[-1]) + self.shift)


@dataclass
class WeightedOperator:
    """Discretized e^{eta x} (D d_xx + c d_x + F'(U_*)) e^{-eta x}, Dirichlet at +-L"""
    matrix: sparse.csr_matrix
    x: np.ndarray
    eta: float
    speed: float
    n_components: int
    schrodinger: Optional[SchrodingerOperator] = None


@dataclass
class Checklist:
    wake_attracting: bool = False
    pinched_dr_at_zero: bool = False
    weighted_spectrum_stable: bool = False
    no_weighted_kernel_but_generic_tail: bool = False

    def all(self) -> bool:
        return all((self.wake_attracting, self.pinched_dr_at_zero,
                    self.weighted_spectrum_stable, self.no_weighted_kernel_but_generic_tail))

    def as_dict(self) -> Dict[str, bool]:
        return {
            "wake_attracting": self.wake_attracting,
            "pinched_dr_at_zero": self.pinched_dr_at_zero,
            "weighted_spectrum_stable": self.weighted_spectrum_stable,
            "no_weighted_kernel_but_generic_tail": self.no_weighted_kernel_but_generic_tail,
        }


@dataclass
class SpectrumReport:
    eta: float
    essential: List[SpectrumCurve] = field(default_factory=list)
    filter_curves: List[SpectrumCurve] = field(default_factory=list)
    point_eigs: List[complex] = field(default_factory=list)
    filtered_eigs: List[complex] = field(default_factory=list)
    checklist: Checklist = field(default_factory=Checklist)
    verdict: Verdict = Verdict.INDETERMINATE
    smallest_singular_value: float = float("nan")
    weights: Dict[str, float] = field(default_factory=dict)


def _resample(profile: FrontProfile, n_grid: Optional[int]) -> Tuple[np.ndarray, np.ndarray]:
    if n_grid is None or n_grid == profile.xi.size:
        return profile.xi, profile.values
    x = np.linspace(profile.xi[0], profile.xi[-1], n_grid)
    return x, profile.at(x)


def weighted_linearization(model: ReactionModel, profile: FrontProfile, eta: float,
                           n_grid: Optional[int] = None, component: Optional[int] = None) -> WeightedOperator:
    """
    Conjugated linearization D w'' + (c - 2 eta D) w' + (D eta^2 - c eta + F'(U_*)) w

    Args:
        model: Reaction model
        profile: Converged front
        eta: Weight (>= 0)
        n_grid: Resample the profile to this many nodes
        component: Restrict to one diagonal block (triangular systems)

    Returns:
        WeightedOperator; `schrodinger` is set when the block is scalar and the advection
        cancels (c = 2 eta d)
    """
    if eta < 0:
        raise ContractViolation(f"eta must be >= 0, got {eta}")
    x_all, U_all = _resample(profile, n_grid)
    x, U = x_all[1:-1], U_all[1:-1]
    h = float(x_all[1] - x_all[0])
    c = profile.speed
    JF = np.asarray(model.jacobian(U.T), dtype=float)
    blocks = [component] if component is not None else list(range(model.n_components))
    m, N = len(blocks), x.size
    d = np.asarray(model.diffusion, dtype=float)

    grid = []
    for k in blocks:
        row = []
        for l in blocks:
            if k == l:
                adv = c - 2.0 * eta * d[k]
                lower = np.full(N - 1, d[k] / h ** 2 - adv / (2.0 * h))
                upper = np.full(N - 1, d[k] / h ** 2 + adv / (2.0 * h))
                diag = -2.0 * d[k] / h ** 2 + d[k] * eta ** 2 - c * eta + JF[k, k]
                row.append(sparse.diags([lower, diag, upper], [-1, 0, 1], shape=(N, N)))
            else:
                row.append(sparse.diags(JF[k, l], 0, shape=(N, N)))
        grid.append(row)
    mat = sparse.bmat(grid, format="csr")

    schrodinger = None
    if m == 1 and abs(c - 2.0 * eta * d[blocks[0]]) < 1e-12:
        k = blocks[0]
        schrodinger = SchrodingerOperator(x=x, potential=d[k] * eta ** 2 - c * eta + JF[k, k],
                                          diffusion=float(d[k]))
    return WeightedOperator(matrix=mat, x=x, eta=float(eta), speed=float(c), n_components=m,
                            schrodinger=schrodinger)


def point_spectrum_selfadjoint(op: SchrodingerOperator, count: int = 5, genuine_only: bool = True,
                               tol: float = 1e-10) -> np.ndarray:
    """
    Top eigenvalues of a symmetric tridiagonal operator by Sturm-sequence bisection

    Args:
        op: Schrodinger operator
        count: Number of top eigenvalues to compute
        genuine_only: Drop eigenvalues at or below the essential edge max(V(+-L)) + shift
        tol: Absolute bisection tolerance

    Returns:
        Eigenvalues in descending order
    """
    diag, off = op.tridiagonal()
    n = diag.size
    count = min(count, n)
    eigs = eigh_tridiagonal(diag, off, eigvals_only=True, select="i",
                            select_range=(n - count, n - 1), lapack_driver="stebz", tol=tol)
    eigs = np.sort(eigs)[::-1]
    if genuine_only:
        eigs = eigs[eigs > op.essential_edge]
    return eigs


# ---------------------------------------------------------------------------
# forced CGL: wake instability of the negative real front

def _negative_front(alpha: float, beta: float, L: float, h: float) -> FrontProfile:
    _, u_minus = real_states(alpha, beta)
    c = 2.0 * math.sqrt(1.0 + alpha)
    try:
        return shoot_scalar_front(forced_cgl_axis(alpha, beta), c, u_minus, L, n_grid=int(round(2 * L / h)) + 1)
    except NumericalError as exc:
        raise FrontSolveError(f"negative real front failed at beta={beta}: {exc}", parameter=beta) from exc


def wake_operator(alpha: float, beta: float, L: float = 40.0, h: float = 0.05) -> SchrodingerOperator:
    """v-block at the negative real front in the weight sqrt(1+alpha): potential -2a - 2b u - u^2"""
    front = _negative_front(alpha, beta, L, h)
    x, u = front.xi[1:-1], front.values[1:-1, 0]
    return SchrodingerOperator(x=x, potential=-2.0 * alpha - 2.0 * beta * u - u ** 2)


def _top_wake_eigenvalue(alpha: float, beta: float, L: float, h: float) -> float:
    eigs = point_spectrum_selfadjoint(wake_operator(alpha, beta, L, h), count=3)
    return float(eigs[0]) if eigs.size else -np.inf


def critical_beta(alpha: float, L: float = 40.0, h: float = 0.05, tol: float = 1e-6) -> Tuple[float, Mechanism]:
    """
    Onset of the wake instability behind the negative real front

    Args:
        alpha: Detuning, 0 < alpha < 1/3
        L: Half-width of the front grid
        h: Grid spacing
        tol: Bisection tolerance in beta

    Returns:
        (beta_c, mechanism): the zero crossing of the top point eigenvalue, or
        ((1 + 3 alpha)/sqrt(6), essential) when no point eigenvalue turns positive first
    """
    if not 0.0 < alpha < 1.0 / 3.0:
        raise ContractViolation(f"alpha must lie in (0, 1/3), got {alpha}")
    beta_lin = wake_threshold_weighted(alpha)
    beta_try = beta_lin - 1e-6
    if _top_wake_eigenvalue(alpha, beta_try, L, h) <= 0.0:
        logger.info("alpha=%.4g: essential onset at beta_lin=%.8g", alpha, beta_lin)
        return beta_lin, Mechanism.ESSENTIAL
    lo, hi = 0.0, beta_try
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _top_wake_eigenvalue(alpha, mid, L, h) > 0.0:
            hi = mid
        else:
            lo = mid
        logger.debug("alpha=%.4g: beta_c bracket [%.8g, %.8g]", alpha, lo, hi)
    beta_c = 0.5 * (lo + hi)
    logger.info("alpha=%.4g: point onset at beta_c=%.8g (beta_lin=%.8g)", alpha, beta_c, beta_lin)
    return beta_c, Mechanism.POINT


def critical_beta_curve(alphas: Sequence[float], parallelism: Optional[int] = None,
                        **kwargs) -> List[Tuple[float, float, Mechanism]]:
    """Tabulate (alpha, beta_c, mechanism) over an alpha grid"""
    n_jobs = Config.resolve_threads(parallelism)
    results = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(critical_beta)(float(a), **kwargs) for a in alphas
    )
    return [(float(a), float(b), m) for a, (b, m) in zip(alphas, results)]


# ---------------------------------------------------------------------------
# checks on fronts

def _is_decreasing(values: np.ndarray) -> bool:
    return bool(np.all(np.diff(values) <= 1e-12))


def sturm_exclusion_check(model: ReactionModel, profile: FrontProfile, eta: float = 1.0,
                          count: int = 3) -> bool:
    """
    Comparison structure behind the absence of unstable point spectrum of the v-block

    Checks h = -4 u_x u (v - v^3) > 0 where it is resolved and that the top eigenvalue
    of the weighted v-block is <= 1e-8.

    Args:
        model: Skew-type model
        profile: Secondary front (u_*, v_*), both components decreasing
        eta: Weight of the v-block
        count: Eigenvalues computed

    Returns:
        True iff both checks hold
    """
    if profile.n_components != 2:
        raise ContractViolation("sturm_exclusion_check needs a two-component front")
    u, v = profile.values[:, 0], profile.values[:, 1]
    if not (_is_decreasing(u) and _is_decreasing(v)):
        raise ContractViolation("secondary front must have decreasing u and v components")
    u_x = np.gradient(u, profile.xi)
    h_fun = -4.0 * u_x * u * (v - v ** 3)
    resolved = (np.abs(u_x * u) > 1e-10) & (np.abs(v - v ** 3) > 1e-10)
    h_positive = bool(np.all(h_fun[resolved] > 0.0)) and bool(np.all(h_fun > -1e-12))

    op = weighted_linearization(model, profile, eta, component=1)
    if op.schrodinger is not None:
        top = float(point_spectrum_selfadjoint(op.schrodinger, count=count, genuine_only=False)[0])
    else:
        top = float(np.max(np.linalg.eigvals(op.matrix.toarray()).real))
    logger.debug("sturm check: h>0 %s, top v-eigenvalue %.3e", h_positive, top)
    return h_positive and top <= Config.SPECTRUM_TOL


def _subsampled(profile: FrontProfile, n_max: int) -> Optional[int]:
    if profile.xi.size <= n_max:
        return None
    return n_max


def _distance_to_curves(lam: complex, curves: Sequence[SpectrumCurve]) -> float:
    if not curves:
        return np.inf
    return float(min(np.min(np.abs(curve.lam - lam)) for curve in curves))


def marginal_stability_report(model: ReactionModel, profile: FrontProfile, n_dense: int = 800,
                              k_range: Tuple[float, float] = (-6.0, 6.0)) -> SpectrumReport:
    """
    Marginal-stability checklist of a front in the weight of its pinched double root

    Checks: (1) the wake state is linearly stable; (2) a pinched double root sits at
    lambda = 0 at the front speed; (3) weighted essential curves and point eigenvalues lie
    in Re <= 1e-8; (4) generic steepness and no weighted kernel (smallest singular value
    above 1e-6).

    Args:
        model: Reaction model
        profile: Converged front with measured decay
        n_dense: Node cap for dense eigenvalue and singular value computations
        k_range: Fourier range for the essential curves

    Returns:
        SpectrumReport
    """
    if profile.state_minus is None or profile.state_plus is None:
        raise ContractViolation("profile must carry its limit states")
    c = profile.speed
    report = SpectrumReport(eta=float(profile.eta))
    check = report.checklist

    check.wake_attracting = bool(np.max(np.real(profile.state_minus.jac_eigenvalues)) < 0.0)

    eta = profile.eta
    pinched = None
    for root in find_double_roots(model, c, profile.state_plus, check_pinch=True):
        if root.pinched and abs(root.lam) <= 1e-6:
            if pinched is None or abs(-root.nu.real - profile.eta) < abs(-pinched.nu.real - profile.eta):
                pinched = root
    if pinched is not None and np.isfinite(profile.eta) and abs(-pinched.nu.real - profile.eta) <= 0.1:
        check.pinched_dr_at_zero = True
    if pinched is not None:
        eta = float(-pinched.nu.real)
    report.eta = float(eta) if np.isfinite(eta) else float("nan")
    if not np.isfinite(eta):
        report.verdict = Verdict.INDETERMINATE
        return report
    report.weights = {"minus": 0.0, "plus": float(eta)}

    minus_curves = weighted_essential_spectrum(model, profile.state_minus, c, 0.0, k_range, label="minus")
    plus_curves = weighted_essential_spectrum(model, profile.state_plus, c, eta, k_range, label="plus")
    report.essential = minus_curves + plus_curves
    # the dense operator carries e^{eta x} on both sides, so both filters use eta
    report.filter_curves = weighted_essential_spectrum(model, profile.state_minus, c, eta, k_range,
                                                       label="minus") + plus_curves
    minus_ok = max(curve.max_real for curve in minus_curves) < 0.0
    plus_max = max(curve.max_real for curve in plus_curves)
    plus_ok = plus_max <= Config.SPECTRUM_TOL

    op = weighted_linearization(model, profile, eta, n_grid=_subsampled(profile, n_dense))
    dense = op.matrix.toarray()
    eigs = np.linalg.eigvals(dense)
    for lam in sorted(eigs, key=lambda z: -z.real):
        if _distance_to_curves(lam, report.filter_curves) < Config.ESSENTIAL_FILTER:
            report.filtered_eigs.append(complex(lam))
        else:
            report.point_eigs.append(complex(lam))
    point_ok = all(lam.real <= Config.SPECTRUM_TOL for lam in report.point_eigs)
    check.weighted_spectrum_stable = bool(minus_ok and plus_ok and point_ok)

    sigma = np.linalg.svd(dense, compute_uv=False)
    report.smallest_singular_value = float(sigma[-1])
    check.no_weighted_kernel_but_generic_tail = bool(
        profile.steepness == Steepness.GENERIC and report.smallest_singular_value > Config.KERNEL_TOL
    )

    if profile.steepness == Steepness.INDETERMINATE:
        report.verdict = Verdict.INDETERMINATE
    elif check.all():
        report.verdict = Verdict.MARGINALLY_STABLE_PULLED
    else:
        report.verdict = Verdict.UNSTABLE
    logger.info("%s: verdict %s (%s)", model.name, report.verdict.value, check.as_dict())
    return report


class SpectrumAnalyzer:
    """
    Marginal-stability analysis of fronts of one model
    """

    def __init__(self, model: ReactionModel, n_dense: int = 800, k_range: Tuple[float, float] = (-6.0, 6.0)):
        self.model = model
        self.n_dense = n_dense
        self.k_range = k_range

    def analyze(self, profile: FrontProfile) -> SpectrumReport:
        return marginal_stability_report(self.model, profile, n_dense=self.n_dense, k_range=self.k_range)
