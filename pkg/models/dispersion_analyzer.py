"""
Linear spreading analysis at an equilibrium
Dispersion determinants, pinched double roots, spreading speeds and weighted essential spectra
"""
import logging
from dataclasses import dataclass, field
from itertools import permutations
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import brentq

from models.reaction_models import Equilibrium, ReactionModel
from utils.config import Config
from utils.errors import AnalysisFailure, ContractViolation, IndeterminateError

logger = logging.getLogger(__name__)

StateLike = Union[Equilibrium, Sequence[float], np.ndarray]


@dataclass
class DoubleRoot:
    c: float
    lam: complex
    nu: complex
    pinched: Optional[bool]
    eigvec: np.ndarray
    gen_eigvec: np.ndarray
    residuals: Tuple[float, float]
    degenerate: bool
    branch: Optional[int] = None


@dataclass
class SpreadingSpeed:
    c_lin: float
    eta: float
    d_eff: float
    c_group: float
    double_root: Optional[DoubleRoot] = None


@dataclass
class SpectrumCurve:
    weight: float
    label: str
    points: List[Tuple[float, complex]] = field(default_factory=list)

    @property
    def max_real(self) -> float:
        return max(lam.real for _, lam in self.points)

    @property
    def k(self) -> np.ndarray:
        return np.array([k for k, _ in self.points])

    @property
    def lam(self) -> np.ndarray:
        return np.array([lam for _, lam in self.points])


@dataclass(frozen=True)
class ScalarLinearization:
    """Frozen linear equation w_t = d w_xx + a w_x + r w"""
    diffusion: float = 1.0
    advection: float = 0.0
    rate: float = 0.0

    def growth(self, nu: complex) -> complex:
        return self.diffusion * nu ** 2 + self.advection * nu + self.rate


def _state_vector(at: StateLike) -> np.ndarray:
    if isinstance(at, Equilibrium):
        return at.vector
    return np.asarray(at, dtype=float)


def _jacobian_at(model: ReactionModel, at: StateLike) -> np.ndarray:
    return np.asarray(model.jacobian(_state_vector(at)), dtype=float)


def _is_triangular(J: np.ndarray) -> bool:
    return J.shape[0] == 2 and J[0, 1] * J[1, 0] == 0.0


def _symbol(model: ReactionModel, J: np.ndarray, c: float, lam: complex, nu: complex) -> np.ndarray:
    n = model.n_components
    return model.diffusion_matrix * nu ** 2 + (c * nu - lam) * np.eye(n) + J


def dispersion_det(model: ReactionModel, c: float, lam: complex, nu: complex, at: StateLike) -> complex:
    """
    d_c(lambda, nu) = det(D nu^2 + c nu + J - lambda) with J = F'(at)

    Args:
        model: Reaction model
        c: Frame speed
        lam: Temporal exponent
        nu: Spatial exponent
        at: Equilibrium (or state vector) supplying the Jacobian

    Returns:
        Complex determinant
    """
    J = _jacobian_at(model, at)
    return complex(np.linalg.det(_symbol(model, J, c, lam, nu)))


# ---------------------------------------------------------------------------
# d_c as a polynomial in nu with coefficients affine in lambda

def _factor(d: float, c: float, j: float, lam: complex) -> np.ndarray:
    return np.array([d, c, j - lam], dtype=complex)


def _nu_polynomial(model: ReactionModel, J: np.ndarray, c: float, lam: complex,
                   branch: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Coefficients (highest first) of d_c(lambda, .) and of its lambda-derivative

    With `branch` set, only the diagonal factor of that component is returned
    (triangular Jacobians factor exactly).
    """
    dif = model.diffusion
    if model.n_components == 1 or branch is not None:
        k = 0 if branch is None else branch
        return _factor(dif[k], c, J[k, k], lam), np.array([0.0, 0.0, -1.0], dtype=complex)
    p1 = _factor(dif[0], c, J[0, 0], lam)
    p2 = _factor(dif[1], c, J[1, 1], lam)
    dp = np.array([0.0, 0.0, -1.0], dtype=complex)
    poly = np.polysub(np.polymul(p1, p2), np.array([J[0, 1] * J[1, 0]], dtype=complex))
    dlam = np.polyadd(np.polymul(dp, p2), np.polymul(p1, dp))
    return poly, dlam


def _derivatives(model, J, c, lam, nu, branch=None):
    """(d, d_nu, d_lam, d_lam_nu, d_nunu) at (lam, nu)"""
    poly, dlam = _nu_polynomial(model, J, c, lam, branch)
    d = np.polyval(poly, nu)
    d_nu = np.polyval(np.polyder(poly), nu)
    d_nunu = np.polyval(np.polyder(poly, 2), nu)
    d_lam = np.polyval(dlam, nu)
    d_lam_nu = np.polyval(np.polyder(dlam), nu)
    return d, d_nu, d_lam, d_lam_nu, d_nunu


def double_root_residuals(model: ReactionModel, c: float, lam: complex, nu: complex, at: StateLike,
                          branch: Optional[int] = None) -> Tuple[float, float]:
    """|d_c| and |d/dnu d_c| at (lam, nu); with `branch`, of that diagonal factor only"""
    J = _jacobian_at(model, at)
    d, d_nu, *_ = _derivatives(model, J, c, lam, nu, branch)
    return float(abs(d)), float(abs(d_nu))


def _newton_double_root(model, J, c, lam, nu, branch=None) -> Optional[Tuple[complex, complex]]:
    for _ in range(Config.NEWTON_MAX_ITER):
        d, d_nu, d_lam, d_lam_nu, d_nunu = _derivatives(model, J, c, lam, nu, branch)
        if max(abs(d), abs(d_nu)) <= 1e-13:
            return lam, nu
        jac = np.array([[d_lam, d_nu], [d_lam_nu, d_nunu]], dtype=complex)
        try:
            step = np.linalg.solve(jac, -np.array([d, d_nu], dtype=complex))
        except np.linalg.LinAlgError:
            return None
        lam, nu = lam + step[0], nu + step[1]
        if not (np.isfinite(lam) and np.isfinite(nu)) or abs(nu) > 1e4:
            return None
    d, d_nu, *_ = _derivatives(model, J, c, lam, nu, branch)
    if max(abs(d), abs(d_nu)) <= Config.DOUBLE_ROOT_TOL:
        return lam, nu
    return None


def _unit_phase(v: np.ndarray) -> np.ndarray:
    v = v / np.linalg.norm(v)
    for entry in v:
        if abs(entry) > 1e-12:
            return v * (abs(entry) / entry)
    return v


def _eigenvectors(model, J, c, lam, nu) -> Tuple[np.ndarray, np.ndarray]:
    """Kernel vector of the symbol and the generalized vector orthogonal to it"""
    M = _symbol(model, J, c, lam, nu)
    _, _, vh = np.linalg.svd(M)
    u = _unit_phase(vh[-1].conj())
    forcing = -(2.0 * model.diffusion_matrix * nu + c * np.eye(model.n_components)) @ u
    u1, *_ = np.linalg.lstsq(M, forcing, rcond=None)
    u1 = u1 - np.vdot(u, u1) * u
    return u, u1


def _make_root(model, J, c, lam, nu, branch=None) -> DoubleRoot:
    d, d_nu, d_lam, _, d_nunu = _derivatives(model, J, c, lam, nu)
    eigvec, gen = _eigenvectors(model, J, c, lam, nu)
    degenerate = abs(d_lam * d_nunu) < Config.DEGENERACY_TOL
    return DoubleRoot(
        c=float(c), lam=complex(lam), nu=complex(nu), pinched=None,
        eigvec=eigvec, gen_eigvec=gen,
        residuals=(float(abs(d)), float(abs(d_nu))),
        degenerate=bool(degenerate), branch=branch,
    )


def _default_seed_box(c: float) -> Tuple[complex, complex]:
    return complex(-abs(c) - 2.0, -1.0), complex(0.5, 1.0)


def find_double_roots(model: ReactionModel, c: float, at: StateLike,
                      seed_box: Optional[Tuple[complex, complex]] = None,
                      n_seeds: int = 64, check_pinch: bool = False) -> List[DoubleRoot]:
    """
    Solve d_c = 0, d/dnu d_c = 0 from a grid of nu-seeds

    Triangular Jacobians factor into per-component quadratics whose double roots are
    exact; they are reported per branch so that identical copies show up as degenerate
    instead of a continuum. Coupled systems use complex Newton from seeds (lambda seeded
    by the eigenvalues of the symbol at each seed nu).

    Args:
        model: Reaction model
        c: Frame speed
        at: Equilibrium (or state) providing F'
        seed_box: (lower-left, upper-right) corners of the nu seed rectangle
        n_seeds: Number of nu seeds (>= 16)
        check_pinch: Also run check_pinching on every root

    Returns:
        De-duplicated double roots
    """
    if n_seeds < 16:
        raise ContractViolation(f"n_seeds must be >= 16, got {n_seeds}")
    J = _jacobian_at(model, at)
    roots: List[DoubleRoot] = []

    def add(root: DoubleRoot):
        for other in roots:
            if abs(other.lam - root.lam) + abs(other.nu - root.nu) < Config.DOUBLE_ROOT_DEDUP and other.branch == root.branch:
                return
        roots.append(root)

    if model.n_components == 1 or _is_triangular(J):
        for k in range(model.n_components):
            d = model.diffusion[k]
            nu = complex(-c / (2.0 * d))
            lam = complex(J[k, k] - c * c / (4.0 * d))
            add(_make_root(model, J, c, lam, nu, branch=None if model.n_components == 1 else k))
        if model.n_components == 2 and model.diffusion[0] != model.diffusion[1]:
            # simultaneous zeros of both factors are double roots of the product
            nu_sq = (J[1, 1] - J[0, 0]) / (model.diffusion[0] - model.diffusion[1])
            for nu in (np.sqrt(complex(nu_sq)), -np.sqrt(complex(nu_sq))):
                lam = model.diffusion[0] * nu ** 2 + c * nu + J[0, 0]
                d, d_nu, *_ = _derivatives(model, J, c, lam, nu)
                if max(abs(d), abs(d_nu)) <= Config.DOUBLE_ROOT_TOL:
                    add(_make_root(model, J, c, lam, nu))
    else:
        lo, hi = seed_box or _default_seed_box(c)
        side = max(4, int(np.ceil(np.sqrt(n_seeds))))
        re_axis = np.linspace(lo.real, hi.real, side)
        im_axis = np.linspace(lo.imag, hi.imag, side)
        for re in re_axis:
            for im in im_axis:
                nu0 = complex(re, im)
                for lam0 in np.linalg.eigvals(_symbol(model, J, c, 0.0, nu0)):
                    found = _newton_double_root(model, J, c, complex(lam0), nu0)
                    if found is not None:
                        add(_make_root(model, J, c, found[0], found[1]))
    if not roots:
        logger.warning("%s: no double root converged at c=%.6g", model.name, c)
    roots.sort(key=lambda r: (-r.lam.real, r.nu.real, r.nu.imag))
    if check_pinch:
        for root in roots:
            root.pinched = check_pinching(model, root, at)
    return roots


# ---------------------------------------------------------------------------
# pinching

def _match(previous: np.ndarray, candidates: np.ndarray) -> Optional[np.ndarray]:
    """Assign each tracked root to a distinct nearest candidate"""
    best, best_cost = None, np.inf
    for perm in permutations(range(len(candidates)), len(previous)):
        cost = sum(abs(candidates[j] - p) for j, p in zip(perm, previous))
        if cost < best_cost:
            best, best_cost = perm, cost
    if best is None:
        return None
    return candidates[list(best)]


def pinching_from_polynomial(poly_of_lambda: Callable[[complex], np.ndarray], lam_dr: complex,
                             nu_dr: complex, path_len: float = Config.PINCH_PATH_LENGTH,
                             n_steps: int = 400, max_refine: int = 4) -> bool:
    """
    Follow the two roots colliding at nu_dr along lambda = lambda_dr + tau

    Args:
        poly_of_lambda: lambda -> nu-polynomial coefficients (highest first)
        lam_dr: Double-root lambda
        nu_dr: Double-root nu
        path_len: Final tau
        n_steps: Initial number of continuation steps

    Returns:
        True iff over the last part of the path one root drifts to Re nu -> +inf and
        the other to Re nu -> -inf
    """
    tau0 = 1e-6 * max(1.0, path_len)
    for attempt in range(max_refine + 1):
        steps = n_steps * 2 ** attempt
        taus = np.concatenate([[tau0], np.linspace(tau0, path_len, steps + 1)[1:]])
        start = np.roots(poly_of_lambda(lam_dr + taus[0]))
        order = np.argsort(np.abs(start - nu_dr))
        tracked = start[order[:2]]
        history = [tracked.copy()]
        ambiguous = False
        for tau in taus[1:]:
            candidates = np.roots(poly_of_lambda(lam_dr + tau))
            matched = _match(tracked, candidates)
            if matched is None or abs(matched[0] - matched[1]) < 1e-10:
                ambiguous = True
                break
            tracked = matched
            history.append(tracked.copy())
        if not ambiguous:
            break
        logger.debug("pinching: collision ambiguity with %d steps, refining", steps)
    else:
        raise IndeterminateError(f"root tracking stayed ambiguous near nu={nu_dr}")

    path = np.array(history)
    tail = max(2, int(np.ceil(Config.PINCH_TREND_WINDOW * len(path))))
    trend = path[-1].real - path[-tail].real
    return bool((trend[0] > 0 > trend[1]) or (trend[1] > 0 > trend[0]))


def check_pinching(model: ReactionModel, dr: DoubleRoot, at: StateLike,
                   path_len: float = Config.PINCH_PATH_LENGTH) -> bool:
    """Pinching condition for a double root of `model` at `at` (per branch when factored)"""
    J = _jacobian_at(model, at)

    def poly(lam):
        return _nu_polynomial(model, J, dr.c, lam, dr.branch)[0]

    return pinching_from_polynomial(poly, dr.lam, dr.nu, path_len)


# ---------------------------------------------------------------------------
# spreading speed

def _leading_pinched(model, c, at) -> Optional[DoubleRoot]:
    for root in find_double_roots(model, c, at):
        if root.pinched is None:
            root.pinched = check_pinching(model, root, at)
        if root.pinched:
            return root
    return None


def _criterion(model, c, at) -> float:
    root = _leading_pinched(model, c, at)
    if root is None:
        return -np.inf
    return root.lam.real


def linear_spreading_speed(model: ReactionModel, at: StateLike, frame_speed: Optional[float] = None,
                           c_max: float = Config.C_MAX) -> SpreadingSpeed:
    """
    Largest speed with a pinched double root in the closed right half plane

    Bracket by doubling from c = 1, then refine the zero of
    max{Re lambda_dr : pinched} with a bracketing root finder.

    Args:
        model: Reaction model
        at: Linearly unstable equilibrium
        frame_speed: Optional frame for the group-velocity offset
        c_max: Upper speed limit of the bracket search

    Returns:
        SpreadingSpeed with c_lin, eta, d_eff and c_group
    """
    J = _jacobian_at(model, at)
    if np.max(np.linalg.eigvals(J).real) <= 0:
        raise ContractViolation(f"{model.name}: state is not linearly unstable")

    c_lo, c_hi = 0.0, 1.0
    g_lo = _criterion(model, c_lo, at)
    if not np.isfinite(g_lo):
        raise AnalysisFailure(f"{model.name}: no pinched double root at c=0")
    g_hi = _criterion(model, c_hi, at)
    while g_hi > 0:
        c_lo, g_lo = c_hi, g_hi
        c_hi *= 2.0
        if c_hi > c_max:
            raise AnalysisFailure(f"{model.name}: spreading speed exceeds c_max={c_max}")
        g_hi = _criterion(model, c_hi, at)
    if not np.isfinite(g_hi):
        raise AnalysisFailure(f"{model.name}: no pinched double root at c={c_hi}")
    logger.debug("%s: c_lin bracket [%g, %g]", model.name, c_lo, c_hi)

    c_lin = brentq(lambda c: _criterion(model, c, at), c_lo, c_hi, xtol=1e-13, rtol=4 * np.finfo(float).eps)
    root = _leading_pinched(model, c_lin, at)
    if root is None:
        raise AnalysisFailure(f"{model.name}: pinched root lost at c_lin={c_lin}")

    J = _jacobian_at(model, at)
    _, _, d_lam, _, d_nunu = _derivatives(model, J, c_lin, root.lam, root.nu, root.branch)
    d_eff = float((-d_nunu / (2.0 * d_lam)).real)
    c_group = 0.0 if frame_speed is None else float(frame_speed - c_lin)
    return SpreadingSpeed(c_lin=float(c_lin), eta=float(-root.nu.real), d_eff=d_eff,
                          c_group=c_group, double_root=root)


def envelope_speed(model_lin: ScalarLinearization, nu: float) -> float:
    """
    Speed -lambda(nu)/nu of the exponential solution e^{lambda t + nu x}

    Args:
        model_lin: Frozen scalar linear equation
        nu: Negative spatial exponent

    Returns:
        Envelope speed
    """
    if nu == 0:
        raise ZeroDivisionError("envelope speed undefined at nu = 0")
    return float(-model_lin.growth(nu).real / nu)


def weighted_essential_spectrum(model: ReactionModel, at: StateLike, c: float, eta: float,
                                k_range: Tuple[float, float] = (-6.0, 6.0), n_pts: int = 256,
                                label: str = "") -> List[SpectrumCurve]:
    """
    lambda-curves of D nu^2 + c nu + J with nu = -eta + i k, grouped into continuous branches

    Args:
        model: Reaction model
        at: Limit state
        c: Frame speed
        eta: Weight
        k_range: Fourier parameter range
        n_pts: Samples (>= 64)
        label: Prefix for branch labels

    Returns:
        One SpectrumCurve per branch
    """
    if n_pts < 64:
        raise ContractViolation(f"n_pts must be >= 64, got {n_pts}")
    J = _jacobian_at(model, at)
    n = model.n_components
    ks = np.linspace(k_range[0], k_range[1], n_pts)
    branches = np.empty((n_pts, n), dtype=complex)
    previous = None
    for i, k in enumerate(ks):
        nu = complex(-eta, k)
        eigs = np.linalg.eigvals(model.diffusion_matrix * nu ** 2 + c * nu * np.eye(n) + J)
        if previous is None:
            eigs = eigs[np.argsort(-eigs.real)]
        else:
            eigs = _match(previous, eigs)
        branches[i] = eigs
        previous = eigs
    prefix = label or "limit"
    return [
        SpectrumCurve(weight=float(eta), label=f"{prefix}:b{j}",
                      points=[(float(k), complex(lam)) for k, lam in zip(ks, branches[:, j])])
        for j in range(n)
    ]


@dataclass
class DispersionAnalysis:
    c: float
    double_roots: List[DoubleRoot]
    spreading: Optional[SpreadingSpeed] = None


class DispersionAnalyzer:
    """
    Double roots and spreading speed of a model at one equilibrium
    """

    def __init__(self, model: ReactionModel, n_seeds: int = 64, check_pinch: bool = True):
        self.model = model
        self.n_seeds = n_seeds
        self.check_pinch = check_pinch

    def analyze(self, at: StateLike, c: Optional[float] = None) -> DispersionAnalysis:
        """
        Args:
            at: Equilibrium
            c: Frame speed of the double roots (default: the linear spreading speed)

        Returns:
            DispersionAnalysis; spreading is None when `at` is not linearly unstable
        """
        try:
            spreading = linear_spreading_speed(self.model, at)
        except ContractViolation as exc:
            logger.warning("no spreading speed: %s", exc)
            spreading = None
        if c is None:
            if spreading is None:
                raise ContractViolation("a frame speed is required when the state is not linearly unstable")
            c = spreading.c_lin
        roots = find_double_roots(self.model, c, at, n_seeds=self.n_seeds, check_pinch=self.check_pinch)
        return DispersionAnalysis(c=float(c), double_roots=roots, spreading=spreading)
