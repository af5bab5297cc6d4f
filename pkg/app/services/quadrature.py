"""
Adaptive Gauss-Kronrod (7/15) quadrature.

Segments are processed in vectorized batches: every pass evaluates the 15-point
Kronrod rule and the embedded 7-point Gauss rule on all active segments, keeps
the segments whose |K - G| estimate meets their share of the tolerance and
bisects the others. Integrands are split at their jump points before the first
pass so that every segment sees a smooth function.
"""

import logging
from typing import Callable, Iterable, Sequence, Tuple, Union

import numpy as np

from app.core.config import settings
from app.core.errors import QuadratureError
from app.services.expressions import CoefficientExpr

logger = logging.getLogger(__name__)

Integrand = Union[CoefficientExpr, Callable[[np.ndarray], np.ndarray]]

EPS = float(np.finfo(float).eps)
ROUNDOFF_FACTOR = 50.0

_XGK = np.array(
    [
        0.991455371120812639206854697526329,
        0.949107912342758524526189684047851,
        0.864864423359769072789712788640926,
        0.741531185599394439863864773280788,
        0.586087235467691130294144845693013,
        0.405845151377397166906606412076961,
        0.207784955007898467600689403773245,
        0.0,
    ]
)
_WGK = np.array(
    [
        0.022935322010529224963732008058970,
        0.063092092629978553290700663189204,
        0.104790010322250183839876322541518,
        0.140653259715525918745189590510238,
        0.169004726639267902826583426598550,
        0.190350578064785409913256402421014,
        0.204432940075298892414161999234649,
        0.209482141084727828012999174891714,
    ]
)
_WG = np.array(
    [
        0.129484966168869693270611432679082,
        0.279705391489276667901467771423780,
        0.381830050505118944950369775488975,
        0.417959183673469387755102040816327,
    ]
)

NODES = np.concatenate([-_XGK[:7], [0.0], _XGK[6::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:7], [_WGK[7]], _WGK[6::-1]])
GAUSS_WEIGHTS = np.concatenate([_WG[:3], [_WG[3]], _WG[2::-1]])


def _as_function(f: Integrand) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(f, CoefficientExpr):
        return f.evaluate_array
    return f


def gauss_kronrod(
    func: Callable[[np.ndarray], np.ndarray], a: np.ndarray, b: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """One GK15 pass over the segments [a_i, b_i]; returns (estimates, |K - G|)."""
    center = 0.5 * (a + b)
    half = 0.5 * (b - a)
    points = center[:, None] + half[:, None] * NODES[None, :]
    values = np.asarray(func(points.ravel()), dtype=float).reshape(points.shape)
    kronrod = half * (values @ KRONROD_WEIGHTS)
    gauss = half * (values[:, 1::2] @ GAUSS_WEIGHTS)
    return kronrod, np.abs(kronrod - gauss)


def split_points(lo: float, hi: float, breakpoints: Iterable[float]) -> np.ndarray:
    inner = [p for p in breakpoints if lo < p < hi]
    return np.unique(np.concatenate([[lo], inner, [hi]]))


def integrate_groups(
    f: Integrand,
    segments: Sequence[Tuple[float, float]],
    groups: Sequence[int],
    n_groups: int,
    tol: Union[float, np.ndarray],
    max_depth: int | None = None,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Integrate many segments at once and sum them per group.

    Returns (values, error estimates, converged flags), each of length
    ``n_groups``. ``tol`` is the absolute tolerance of each group, shared
    between its segments in proportion to their length.
    """
    func = _as_function(f)
    max_depth = settings.QUAD_MAX_DEPTH if max_depth is None else max_depth
    seg = np.asarray(segments, dtype=float).reshape(-1, 2)
    a, b = seg[:, 0].copy(), seg[:, 1].copy()
    owner = np.asarray(groups, dtype=int)
    depth = np.zeros(a.shape, dtype=int)

    group_tol = np.broadcast_to(np.asarray(tol, dtype=float), (n_groups,))
    group_length = np.zeros(n_groups)
    np.add.at(group_length, owner, b - a)
    group_length[group_length == 0] = 1.0

    values = np.zeros(n_groups)
    errors = np.zeros(n_groups)
    converged = np.ones(n_groups, dtype=bool)
    evaluated = 0

    while a.size:
        estimate, error = gauss_kronrod(func, a, b)
        evaluated += a.size
        local_tol = group_tol[owner] * (b - a) / group_length[owner]
        # |K - G| below the roundoff of K itself cannot be reduced by bisection
        local_tol = np.maximum(local_tol, ROUNDOFF_FACTOR * EPS * np.abs(estimate))
        accept = (error <= local_tol) | (depth >= max_depth)
        stuck = accept & (error > local_tol)
        if np.any(stuck):
            converged[np.unique(owner[stuck])] = False

        np.add.at(values, owner[accept], estimate[accept])
        np.add.at(errors, owner[accept], error[accept])

        keep = ~accept
        if evaluated + 2 * int(keep.sum()) > settings.QUAD_MAX_SEGMENTS:
            np.add.at(values, owner[keep], estimate[keep])
            np.add.at(errors, owner[keep], error[keep])
            converged[np.unique(owner[keep])] = False
            logger.warning(
                f"Quadrature segment budget exhausted with {int(keep.sum())} open segments"
            )
            break

        mid = 0.5 * (a[keep] + b[keep])
        a = np.concatenate([a[keep], mid])
        b = np.concatenate([mid, b[keep]])
        owner = np.concatenate([owner[keep], owner[keep]])
        depth = np.concatenate([depth[keep] + 1, depth[keep] + 1])

    return values, errors, converged


def integrate_adaptive(
    f: Integrand,
    lo: float,
    hi: float,
    tol: float | None = None,
    breakpoints: Iterable[float] = (),
) -> Tuple[float, float]:
    """Integrate ``f`` over [lo, hi] to absolute tolerance ``tol``.

    Expressions are split at their own jump points and at their singular
    points; ``breakpoints`` adds more. Raises QuadratureError (carrying the
    partial value) when the depth or segment limit is hit first.
    """
    if not lo < hi:
        raise QuadratureError(f"integration bounds must satisfy lo < hi, got [{lo}, {hi}]")
    tol = settings.DEFAULT_TOL if tol is None else tol
    if tol <= 0:
        raise QuadratureError("tolerance must be positive")

    cuts = list(breakpoints)
    if isinstance(f, CoefficientExpr):
        cuts.extend(f.breakpoints())
        cuts.extend(f.singular_points(lo, hi))
    edges = split_points(lo, hi, cuts)
    segments = list(zip(edges[:-1], edges[1:]))

    values, errors, converged = integrate_groups(
        f, segments, [0] * len(segments), 1, tol
    )
    value, error = float(values[0]), float(errors[0])
    if not converged[0]:
        raise QuadratureError(
            f"quadrature did not converge on [{lo}, {hi}] (error estimate {error:.3e})",
            value=value,
            error=error,
        )
    return value, error


def integrate_intervals(
    f: Integrand,
    intervals: Sequence[Tuple[float, float]],
    tol: float,
    breakpoints: Iterable[float] = (),
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Integrate ``f`` separately over each interval (split at ``breakpoints``)."""
    cuts = sorted(set(breakpoints))
    segments = []
    owners = []
    for index, (lo, hi) in enumerate(intervals):
        edges = split_points(lo, hi, cuts)
        segments.extend(zip(edges[:-1], edges[1:]))
        owners.extend([index] * (len(edges) - 1))
    return integrate_groups(f, segments, owners, len(intervals), tol)
