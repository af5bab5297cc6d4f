import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal

from app.core.config import settings
from app.core.errors import OracleError
from app.schemas.spectral import RefinementStep, SpectralEstimate
from app.services.coefficients import Problem

logger = logging.getLogger(__name__)

EPS = float(np.finfo(float).eps)


@dataclass(frozen=True)
class DiscretePencil:
    """Three-point finite-difference pencil (A, R) on the interior nodes of [lo, lo + n h].

    ``diagonal``/``off_diagonal`` hold the symmetric tridiagonal A and ``mass``
    the diagonal of R.
    """

    n: int
    h: float
    L: float
    lo: float
    diagonal: np.ndarray
    off_diagonal: np.ndarray
    mass: np.ndarray

    @property
    def size(self) -> int:
        return self.diagonal.size

    def nodes(self) -> np.ndarray:
        return self.lo + self.h * np.arange(1, self.n)

    def stiffness_product(self, v: np.ndarray) -> np.ndarray:
        out = self.diagonal * v
        out[:-1] += self.off_diagonal * v[1:]
        out[1:] += self.off_diagonal * v[:-1]
        return out

    def rayleigh_quotient(self, v: np.ndarray) -> float:
        return float(v @ self.stiffness_product(v)) / float(v @ (self.mass * v))

    def shifted(self, c: float) -> "DiscretePencil":
        """Pencil (A + cR, R)."""
        return DiscretePencil(
            self.n,
            self.h,
            self.L,
            self.lo,
            self.diagonal + c * self.mass,
            self.off_diagonal,
            self.mass,
        )

    def scaled(self) -> Tuple[np.ndarray, np.ndarray]:
        """R^(-1/2) A R^(-1/2) as (diagonal, off-diagonal); same spectrum as the pencil."""
        root = np.sqrt(self.mass)
        return self.diagonal / self.mass, self.off_diagonal / (root[:-1] * root[1:])

    def gershgorin(self) -> Tuple[float, float]:
        d, e = self.scaled()
        radius = np.zeros_like(d)
        radius[:-1] += np.abs(e)
        radius[1:] += np.abs(e)
        return float(np.min(d - radius)), float(np.max(d + radius))


def discretize(prob: Problem, L: float, n: int) -> DiscretePencil:
    """Dirichlet truncation to [-L, L] ([0, L] on the half line) with n cells.

    p is sampled at cell midpoints, q and r at nodes; r is floored at R_FLOOR.
    """
    if n < 2:
        raise OracleError(f"grid needs at least 2 cells, got n={n}")
    lo, hi = (0.0, L) if prob.half_line else (-L, L)
    h = (hi - lo) / n
    nodes = lo + h * np.arange(1, n)
    midpoints = lo + h * (np.arange(n) + 0.5)

    p_mid = prob.p.evaluate_array(midpoints)
    q_nodes = prob.q.evaluate_array(nodes)
    r_nodes = np.maximum(prob.r.evaluate_array(nodes), settings.R_FLOOR)

    diagonal = (p_mid[:-1] + p_mid[1:]) / h**2 + q_nodes
    off_diagonal = -p_mid[1:-1] / h**2
    return DiscretePencil(n, h, L, lo, diagonal, off_diagonal, r_nodes)


def sturm_count(pencil: DiscretePencil, lam: float) -> Optional[int]:
    """Number of pencil eigenvalues below ``lam`` (negative LDL^T pivots of A - lam R).

    Returns None on an exactly zero pivot.
    """
    shifted = (pencil.diagonal - lam * pencil.mass).tolist()
    squares = (pencil.off_diagonal**2).tolist()
    count = 0
    pivot = shifted[0]
    for i in range(len(shifted)):
        if i:
            pivot = shifted[i] - squares[i - 1] / pivot
        if pivot == 0.0:
            return None
        if pivot < 0:
            count += 1
    return count


def _count(pencil: DiscretePencil, lam: float, tol: float) -> int:
    """sturm_count, retried off an exact zero pivot at lam + k max(tol / 8, 4 ulp(lam))."""
    step = max(tol / 8, 4 * float(np.spacing(abs(lam))))
    for attempt in range(settings.STURM_MAX_RETRIES):
        count = sturm_count(pencil, lam + attempt * step)
        if count is not None:
            return count
    raise OracleError(
        f"pivot breakdown at lambda={lam!r} after {settings.STURM_MAX_RETRIES} retries"
    )


def resolution(pencil: DiscretePencil, tol: float) -> float:
    """max(tol, roundoff of A - lam R); the sign count cannot separate closer shifts."""
    lower, upper = pencil.gershgorin()
    return max(tol, 8 * EPS * max(abs(lower), abs(upper)))


def bisect_min_eigenvalue(
    pencil: DiscretePencil, tol: float, bracket: Optional[Tuple[float, float]] = None
) -> float:
    """Sturm-count bisection for the smallest eigenvalue."""
    lower, upper = pencil.gershgorin()
    lo, hi = bracket if bracket is not None else (lower, upper)
    if _count(pencil, lo, tol) > 0:
        lo = lower
    if _count(pencil, hi, tol) == 0:
        hi = upper + tol
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        if _count(pencil, mid, tol) >= 1:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def min_eigenvalue(
    pencil: DiscretePencil, tol: float, bracket: Optional[Tuple[float, float]] = None
) -> float:
    """Smallest lambda with A v = lambda R v, to absolute tolerance ``tol``.

    LAPACK's Sturm bisection (stebz) on the scaled matrix is checked against
    our own sign count on the unscaled pencil at +-resolution(pencil, tol); on
    disagreement the answer comes from plain bisection. Below that resolution
    the result is only as good as the roundoff of the pencil.
    """
    if tol <= 0:
        raise OracleError("tolerance must be positive")
    d, e = pencil.scaled()
    if d.size == 1:
        return float(d[0])

    estimate = float(
        eigvalsh_tridiagonal(
            d, e, select="i", select_range=(0, 0), lapack_driver="stebz", tol=tol / 4
        )[0]
    )
    slack = resolution(pencil, tol)
    below = _count(pencil, estimate - slack, tol)
    above = _count(pencil, estimate + slack, tol)
    if below == 0 and above >= 1:
        return estimate

    logger.warning(
        f"stebz estimate {estimate:.10g} failed the Sturm check ({below}, {above}); bisecting"
    )
    if bracket is None:
        lower, upper = pencil.gershgorin()
        bracket = (lower, upper)
    return bisect_min_eigenvalue(pencil, tol, bracket)


def default_bracket(pencil: DiscretePencil, bound: Optional[float]) -> Tuple[float, float]:
    """[-10 (1 + |bound|), upper Gershgorin]."""
    lower, upper = pencil.gershgorin()
    if bound is None:
        return lower, upper
    return -10 * (1 + abs(bound)), upper


def estimate_min_spectrum(
    prob: Problem, tol: Optional[float] = None, bound: Optional[float] = None
) -> SpectralEstimate:
    """Refinement ladder over (L, n).

    At every L the mesh is checked by one halving; L doubles (keeping the
    coarse mesh width while the size cap allows) until both the mesh step
    and the L step move lambda by less than ``tol``. The result approximates min
    sigma(T) from above.
    """
    tol = settings.ORACLE_TOL if tol is None else tol
    solve_tol = tol / 100
    history: List[RefinementStep] = []

    def solve(L: float, n: int) -> float:
        pencil = discretize(prob, L, n)
        lam = min_eigenvalue(pencil, solve_tol, default_bracket(pencil, bound))
        history.append(RefinementStep(L=L, n=n, lambda_min=lam))
        logger.info(f"oracle L={L:g} n={n}: lambda_min={lam:.10g}")
        return lam

    L0 = L = max(settings.ORACLE_START_L, prob.start)
    previous_L_lambda = None
    while True:
        # coarse grid keeps the start mesh width until the size cap
        n = min(int(settings.ORACLE_MIN_N * L / L0), settings.ORACLE_MAX_N // 2)
        coarse = solve(L, n)
        n *= 2
        fine = solve(L, n)
        mesh_ok = abs(fine - coarse) < tol

        if mesh_ok and previous_L_lambda is not None and abs(fine - previous_L_lambda) < tol:
            return SpectralEstimate(
                lambda_min=fine, L=L, n=n, refinement_history=history, converged=True
            )
        if 2 * L > settings.ORACLE_MAX_L:
            break
        previous_L_lambda = fine
        L *= 2

    logger.warning(f"oracle ladder exhausted at L={L:g}, n={n} without convergence")
    return SpectralEstimate(
        lambda_min=history[-1].lambda_min,
        L=L,
        n=n,
        refinement_history=history,
        converged=False,
        reason="refinement ladder exhausted",
    )


def history_rows(estimate: SpectralEstimate) -> List[Tuple[float, int, float]]:
    return [(step.L, step.n, step.lambda_min) for step in estimate.refinement_history]


def validation_margin(estimate: SpectralEstimate) -> float:
    """2 |lambda_final - lambda_previous| + 1e-6."""
    previous = estimate.previous_lambda
    if previous is None:
        return 1e-6
    return 2 * abs(estimate.lambda_min - previous) + 1e-6
