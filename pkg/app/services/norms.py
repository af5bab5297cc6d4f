import logging
import math
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from app.core.config import settings
from app.core.errors import (
    CoefficientEvaluationError,
    InvalidExponentError,
    PoleEvaluationError,
    QuadratureError,
)
from app.schemas.norms import NormKind, NormValue
from app.schemas.problem import TailDecay
from app.services.expressions import CoefficientExpr, absolute
from app.services.quadrature import integrate_adaptive, integrate_intervals, split_points
from app.utils.exponents import parse_exponent

logger = logging.getLogger(__name__)

# envelope constants are inflated by this factor over their sampled value
TAIL_SLACK = 2.0
DYADIC_SAMPLES = 512
MAX_REFINEMENTS = 60
# a doubling scan stops only after this many negligible increments in a row
QUIET_DOUBLINGS = 3

Piece = Tuple[float, float, int]


# ---------------------------------------------------------------------------
# Declared tails
# ---------------------------------------------------------------------------


def _mirror(xs: np.ndarray, half_line: bool) -> np.ndarray:
    return xs if half_line else np.concatenate([-xs[::-1], xs])


def envelope_constant(f: CoefficientExpr, tail: TailDecay, half_line: bool = False) -> float:
    """C of the declared envelope C |x|^(-exponent), sampled on [cutoff, 2 cutoff]."""
    xs = _mirror(np.linspace(tail.cutoff, 2 * tail.cutoff, 257), half_line)
    values = np.abs(f.evaluate_safe(xs))
    if not np.all(np.isfinite(values)):
        return math.inf
    return TAIL_SLACK * float(np.max(values * np.abs(xs) ** tail.exponent))


def tail_dominance(f: CoefficientExpr, tail: TailDecay, half_line: bool = False) -> float:
    """Fraction of geometric samples beyond the cutoff where the envelope dominates |f|."""
    constant = envelope_constant(f, tail, half_line)
    xs = _mirror(
        np.geomspace(tail.cutoff, settings.DOUBLING_CAP, settings.TAIL_CHECK_SAMPLES),
        half_line,
    )
    values = np.abs(f.evaluate_safe(xs))
    envelope = constant * np.abs(xs) ** (-tail.exponent)
    with np.errstate(invalid="ignore"):
        dominated = np.isfinite(values) & (values <= envelope * (1 + 1e-12))
    return float(np.mean(dominated))


def _lp_tail_bound(constant: float, exponent: float, s: float, L: float, sides: int) -> float:
    """Bound on the integral of |f|^s over |x| > L given |f| <= C |x|^(-exponent)."""
    decay = exponent * s
    if decay <= 1 or not math.isfinite(constant):
        return math.inf
    return sides * constant**s * L ** (1 - decay) / (decay - 1)


# ---------------------------------------------------------------------------
# Essential extrema by sampling
# ---------------------------------------------------------------------------


def region_pieces(lo: float, hi: float, width: float) -> List[Piece]:
    """Sampling pieces covering [lo, hi]; infinite ends become dyadic pieces out to the cap."""
    core_lo = lo if math.isfinite(lo) else min(-width, hi - width)
    core_hi = hi if math.isfinite(hi) else max(width, lo + width)
    pieces: List[Piece] = [(core_lo, core_hi, settings.ESS_SAMPLES)]
    cap = settings.DOUBLING_CAP
    if not math.isfinite(hi):
        edge = max(abs(core_hi), 1.0)
        start = core_hi
        while edge < cap:
            pieces.append((start, core_hi + 2 * edge, DYADIC_SAMPLES))
            start = core_hi + 2 * edge
            edge *= 2
    if not math.isfinite(lo):
        edge = max(abs(core_lo), 1.0)
        stop = core_lo
        while edge < cap:
            pieces.append((core_lo - 2 * edge, stop, DYADIC_SAMPLES))
            stop = core_lo - 2 * edge
            edge *= 2
    return pieces


def _piece_grid(f: CoefficientExpr, piece: Piece) -> np.ndarray:
    lo, hi, count = piece
    edges = split_points(lo, hi, list(f.breakpoints()) + list(f.singular_points(lo, hi)))
    per_part = max(16, count // max(1, len(edges) - 1))
    grids = []
    for left, right in zip(edges[:-1], edges[1:]):
        grid = np.linspace(left, right, per_part)
        # [lo, hi) pieces: approach the right edge from inside
        grid[-1] = np.nextafter(right, left)
        if left != lo:
            grid[0] = np.nextafter(left, right)
        grids.append(grid)
    return np.concatenate(grids)


def sample_grid(f: CoefficientExpr, pieces: Sequence[Piece]) -> np.ndarray:
    """Sorted sample points of all pieces, split at the jump and singular points of f."""
    return np.sort(np.concatenate([_piece_grid(f, piece) for piece in pieces]))


def essential_extremum(
    f: CoefficientExpr,
    pieces: Sequence[Piece],
    mode: str = "sup",
    absolute_value: bool = False,
) -> Tuple[float, float, bool]:
    """ess sup (``mode="sup"``) or ess inf of ``f`` over the pieces.

    Returns (value, location, converged). The sampled extremum is refined
    dyadically until it moves by less than ESS_RTOL relative. Poles count as
    +inf for the sup and are ignored by the inf.
    """
    sign = 1.0 if mode == "sup" else -1.0
    pole_score = math.inf if mode == "sup" else -math.inf

    def score(xs: np.ndarray) -> np.ndarray:
        values = f.evaluate_safe(xs)
        if absolute_value:
            values = np.abs(values)
        return np.where(np.isnan(values), pole_score, sign * values)

    grid = sample_grid(f, pieces)
    scores = score(grid)
    k = int(np.argmax(scores))
    best = float(scores[k])
    location = float(grid[k])
    if not math.isfinite(best):
        return sign * best, location, True

    left = grid[max(k - 1, 0)]
    right = grid[min(k + 1, len(grid) - 1)]
    converged = False
    for _ in range(MAX_REFINEMENTS):
        if right <= left:
            converged = True
            break
        window = np.linspace(left, right, settings.ESS_REFINE_SAMPLES)
        window_scores = score(window)
        j = int(np.argmax(window_scores))
        candidate = float(window_scores[j])
        if not math.isfinite(candidate):
            return sign * candidate, float(window[j]), True
        change = candidate - best
        if candidate > best:
            best, location = candidate, float(window[j])
        if change <= settings.ESS_RTOL * max(abs(best), 1e-300):
            converged = True
            break
        left, right = window[max(j - 1, 0)], window[min(j + 1, len(window) - 1)]
    return sign * best, location, converged


def grows_at_cap(f: CoefficientExpr, half_line: bool = False) -> bool:
    """True when |f| is still increasing over the last two doublings before the cap."""
    cap = settings.DOUBLING_CAP
    xs = np.array([cap / 4, cap / 2, cap])
    sides = [xs] if half_line else [xs, -xs]
    for side in sides:
        values = np.abs(f.evaluate_safe(side))
        if not np.all(np.isfinite(values)):
            return True
        if values[2] > values[1] * (1 + 1e-9) and values[1] > values[0] * (1 + 1e-9):
            return True
    return False


def ess_sup(
    f: CoefficientExpr,
    tail: Optional[TailDecay] = None,
    start: Optional[float] = None,
    half_line: bool = False,
    support: Optional[Tuple[float, float]] = None,
) -> NormValue:
    """ess sup |f| over the line, the half line, or a bounded ``support``."""
    if support is not None:
        pieces = [(support[0], support[1], settings.ESS_SAMPLES)]
    else:
        width = max(start or 0.0, settings.DOUBLING_START)
        pieces = region_pieces(0.0 if half_line else -math.inf, math.inf, width)

    value, location, converged = essential_extremum(
        f, pieces, mode="sup", absolute_value=True
    )
    if not math.isfinite(value):
        logger.info(f"ess sup of {f} is infinite near x={location:.6g}")
        return NormValue.infinite(NormKind.ESS_SUP, s=math.inf)

    if support is None:
        if tail is not None:
            if tail.exponent < 0:
                return NormValue.infinite(NormKind.ESS_SUP, s=math.inf)
            constant = envelope_constant(f, tail, half_line)
            value = max(value, constant * settings.DOUBLING_CAP ** (-tail.exponent))
        elif grows_at_cap(f, half_line):
            logger.warning(f"|{f}| is still growing at the sampling cap; reporting +inf")
            return NormValue.infinite(NormKind.ESS_SUP, s=math.inf)

    error = settings.ESS_RTOL * max(1.0, value)
    return NormValue(
        value=value,
        abs_error_estimate=error,
        kind=NormKind.ESS_SUP,
        s=math.inf,
        converged=converged,
    )


# ---------------------------------------------------------------------------
# Integral norms
# ---------------------------------------------------------------------------


def _power_integral(
    f: CoefficientExpr, s: float, lo: float, hi: float, tol: float
) -> Tuple[float, float]:
    cuts = list(f.breakpoints()) + list(f.singular_points(lo, hi))

    def integrand(xs: np.ndarray) -> np.ndarray:
        return np.abs(f.evaluate_array(xs)) ** s

    return integrate_adaptive(integrand, lo, hi, tol, breakpoints=cuts)


def _substituted_tail(
    f: CoefficientExpr, s: float, L: float, tol: float, half_line: bool
) -> Tuple[float, float]:
    """Integral of |f|^s over |x| > L via x = L/u on (0, 1]."""

    def integrand(us: np.ndarray) -> np.ndarray:
        xs = L / us
        right = np.abs(f.evaluate_array(xs)) ** s
        if half_line:
            total = right
        else:
            total = right + np.abs(f.evaluate_array(-xs)) ** s
        return total * L / us**2

    return integrate_adaptive(integrand, 0.0, 1.0, tol)


def lp_norm(
    f: CoefficientExpr,
    s: float | str,
    tol: Optional[float] = None,
    tail: Optional[TailDecay] = None,
    start: Optional[float] = None,
    half_line: bool = False,
    support: Optional[Tuple[float, float]] = None,
) -> NormValue:
    """(integral of |f|^s)^(1/s) over the line by interval doubling; s = inf gives ess sup.

    ``start`` is the first half-length (at least DOUBLING_START). With a
    bounded ``support`` the integral is taken over it directly.
    """
    s = parse_exponent(s)
    if s < 1:
        raise InvalidExponentError(f"exponent must be >= 1, got {s}")
    if math.isinf(s):
        return ess_sup(f, tail=tail, start=start, half_line=half_line, support=support)
    tol = settings.DEFAULT_TOL if tol is None else tol

    try:
        if support is not None:
            total, error = _power_integral(f, s, support[0], support[1], 0.1 * tol)
            return _lp_value(total, error, s, converged=True)
        return _lp_on_line(f, s, tol, tail, start, half_line)
    except QuadratureError as exc:
        if f.singular_points(*(support or _window(start, half_line))):
            logger.info(f"|{f}|^{s} is not integrable at a singular point")
            return NormValue.infinite(NormKind.LP, s=s)
        logger.warning(f"Lp quadrature for {f} did not converge: {exc.detail}")
        return _lp_value(exc.value, exc.error, s, converged=False)
    except (CoefficientEvaluationError, PoleEvaluationError) as exc:
        logger.info(f"Lp norm of {f} is infinite: {exc.detail}")
        return NormValue.infinite(NormKind.LP, s=s)


def _window(start: Optional[float], half_line: bool) -> Tuple[float, float]:
    L = max(start or 0.0, settings.DOUBLING_START)
    return (0.0 if half_line else -L, L)


def _lp_on_line(
    f: CoefficientExpr,
    s: float,
    tol: float,
    tail: Optional[TailDecay],
    start: Optional[float],
    half_line: bool,
) -> NormValue:
    lo, L = _window(start, half_line)
    sides = 1 if half_line else 2
    total, error = _power_integral(f, s, lo, L, 0.1 * tol)
    constant = envelope_constant(f, tail, half_line) if tail is not None else None
    quiet = 0

    while True:
        previous = L
        L *= 2
        increment, increment_error = _power_integral(f, s, previous, L, 0.05 * tol)
        if not half_line:
            left, left_error = _power_integral(f, s, -L, -previous, 0.05 * tol)
            increment += left
            increment_error += left_error
        total += increment
        error += increment_error
        scale = max(1.0, total)

        tail_bound = None
        if constant is not None and L >= tail.cutoff:
            tail_bound = _lp_tail_bound(constant, tail.exponent, s, L, sides)
        quiet = quiet + 1 if increment <= tol * scale else 0
        if quiet >= QUIET_DOUBLINGS and (tail_bound is None or tail_bound <= tol * scale):
            return _lp_value(total, error + (tail_bound or increment), s, converged=True)

        if L >= settings.DOUBLING_CAP:
            break

    if tail_bound is not None and math.isfinite(tail_bound):
        rest, rest_error = _substituted_tail(f, s, L, 0.1 * tol * max(1.0, total), half_line)
        logger.info(f"Lp norm of {f}: tail beyond L={L:g} contributes {rest:.3e}")
        return _lp_value(total + rest, error + rest_error, s, converged=True)

    logger.info(f"|{f}|^{s} is not integrable within the doubling cap")
    return NormValue.infinite(NormKind.LP, s=s)


def _lp_value(total: float, error: float, s: float, converged: bool) -> NormValue:
    total = max(total, 0.0)
    value = total ** (1.0 / s)
    if total > 0:
        value_error = error * value / (s * total)
    else:
        value_error = error ** (1.0 / s) if error > 0 else 0.0
    return NormValue(
        value=value,
        abs_error_estimate=value_error,
        kind=NormKind.LP,
        s=s,
        converged=converged,
    )


def uniform_local_norm(
    f: CoefficientExpr,
    tol: Optional[float] = None,
    tail: Optional[TailDecay] = None,
    start: Optional[float] = None,
    half_line: bool = False,
) -> NormValue:
    """sup over integers n of the integral of |f| over [n, n+1]."""
    tol = settings.DEFAULT_TOL if tol is None else tol
    N = int(math.ceil(max(start or 0.0, settings.DOUBLING_START)))
    integrand = absolute(f)
    constant = envelope_constant(f, tail, half_line) if tail is not None else None

    def scan(ns: Sequence[int], scale: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        lo, hi = min(ns), max(ns) + 1
        cuts = list(f.breakpoints()) + list(f.singular_points(lo, hi))
        return integrate_intervals(
            integrand, [(n, n + 1) for n in ns], 0.1 * tol * scale, breakpoints=cuts
        )

    try:
        first = list(range(0 if half_line else -N, N))
        values, errors, converged = scan(first, 1.0)
        k = int(np.argmax(values))
        running, running_error = float(values[k]), float(errors[k])
        all_converged = bool(np.all(converged))
        quiet = 0
        cap = max(settings.UNIFORM_SCAN_CAP, N * 2 ** (QUIET_DOUBLINGS + 1))

        while True:
            if 2 * N > cap:
                logger.info(f"uniform local norm of {f} still growing at |n|={N}")
                return NormValue.infinite(NormKind.L1_UNIFORM)
            ring = list(range(N, 2 * N))
            if not half_line:
                ring = list(range(-2 * N, -N)) + ring
            values, errors, converged = scan(ring, max(1.0, running))
            all_converged = all_converged and bool(np.all(converged))
            k = int(np.argmax(values))
            ring_max = float(values[k])
            N *= 2

            grew = ring_max > running * (1 + tol) + tol
            quiet = 0 if grew else quiet + 1
            if ring_max > running:
                running, running_error = ring_max, float(errors[k])

            tail_ok = True
            if constant is not None:
                if tail.exponent < 0 or not math.isfinite(constant):
                    tail_ok = False
                elif N >= tail.cutoff:
                    tail_ok = constant * N ** (-tail.exponent) <= running
            if quiet >= QUIET_DOUBLINGS and tail_ok:
                break
    except (CoefficientEvaluationError, PoleEvaluationError) as exc:
        logger.info(f"uniform local norm of {f} is infinite: {exc.detail}")
        return NormValue.infinite(NormKind.L1_UNIFORM)

    return NormValue(
        value=running,
        abs_error_estimate=running_error,
        kind=NormKind.L1_UNIFORM,
        converged=all_converged,
    )


# ---------------------------------------------------------------------------
# Measure of the sub-level set {r g < 1}
# ---------------------------------------------------------------------------


def _sublevel_on_window(
    r: CoefficientExpr, c: float, lo: float, hi: float
) -> Tuple[float, float, bool]:
    """Measure of {x in [lo, hi] : r(x) c < 1}; returns (measure, error, touches_edge)."""

    def phi(xs: np.ndarray) -> np.ndarray:
        values = r.evaluate_safe(xs) * c - 1.0
        return np.where(np.isnan(values), 1.0, values)

    def phi_scalar(x: float) -> float:
        return float(phi(np.array([x]))[0])

    cuts = list(r.breakpoints()) + list(r.singular_points(lo, hi))
    grid = np.union1d(
        np.linspace(lo, hi, settings.OMEGA_SEEDS), [p for p in cuts if lo <= p <= hi]
    )
    values = phi(grid)
    points = [float(x) for x in grid]
    error = 0.0

    crossings = np.flatnonzero(values[:-1] * values[1:] < 0)
    for i in crossings:
        points.append(brentq(phi_scalar, grid[i], grid[i + 1], xtol=1e-13))
        error += 2e-13

    # dips below zero between two nonnegative samples
    middle = values[1:-1]
    dips = np.flatnonzero(
        (middle >= 0)
        & (middle <= values[:-2])
        & (middle <= values[2:])
        & ((middle < values[:-2]) | (middle < values[2:]))
        & (middle < 1e-2)
    )
    for i in dips + 1:
        left, right = grid[i - 1], grid[i + 1]
        result = minimize_scalar(
            phi_scalar, bounds=(left, right), method="bounded", options={"xatol": 1e-12}
        )
        if result.fun < 0:
            x_min = float(result.x)
            points.append(brentq(phi_scalar, left, x_min, xtol=1e-13))
            points.append(brentq(phi_scalar, x_min, right, xtol=1e-13))
            error += 4e-13
        elif result.fun < 1e-9:
            # unresolved tangency: count the bracket conservatively
            error += right - left

    points = np.unique(points)
    midpoints = 0.5 * (points[:-1] + points[1:])
    inside = phi(midpoints) < 0
    measure = float(np.sum((points[1:] - points[:-1])[inside]))
    edge = np.array([lo, np.nextafter(hi, lo)])
    touches = bool(np.any(phi(edge) < 0))
    return measure + error, error, touches


@lru_cache(maxsize=4096)
def _omega(
    r: CoefficientExpr,
    c: float,
    compact: Tuple[float, float],
    essinf_outside: Optional[float],
    half_line: bool,
) -> Tuple[float, float, bool]:
    a, b = compact
    if essinf_outside is not None and essinf_outside * c >= 1:
        lo = max(a, 0.0) if half_line else a
        measure, error, _ = _sublevel_on_window(r, c, lo, b)
        return measure, error, True

    L = max(abs(a), abs(b), settings.DOUBLING_START)
    while True:
        lo = 0.0 if half_line else -L
        measure, error, touches = _sublevel_on_window(r, c, lo, L)
        if not touches:
            return measure, error, True
        if L >= settings.DOUBLING_CAP:
            return math.inf, math.inf, False
        L *= 2


def omega_measure(
    r: CoefficientExpr,
    g_const: float,
    compact: Tuple[float, float] = (-1.0, 1.0),
    essinf_outside: Optional[float] = None,
    half_line: bool = False,
) -> NormValue:
    """Lebesgue measure of {x : r(x) g_const < 1}.

    When ``essinf_outside`` (ess inf of r off the compact set) times g_const
    is at least 1, the set lies inside ``compact``; otherwise the window
    doubles until the set no longer reaches its edges.
    """
    if not g_const > 0 or not math.isfinite(g_const):
        raise InvalidExponentError(f"g must be a positive finite constant, got {g_const}")
    measure, error, finite = _omega(
        r, float(g_const), tuple(compact), essinf_outside, half_line
    )
    if not finite:
        return NormValue.infinite(NormKind.OMEGA_MEASURE)
    if error > 1e-9:
        logger.warning(f"omega measure for c={g_const:g} is a conservative estimate (+{error:.3e})")
    return NormValue(
        value=measure,
        abs_error_estimate=error,
        kind=NormKind.OMEGA_MEASURE,
        converged=error <= 1e-9,
    )
