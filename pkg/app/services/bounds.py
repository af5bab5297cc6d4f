"""
Lower bounds for min sigma(T), T = (1/r)(-(p f')' + q f).

Every theorem bound has the shape -alpha * sup(g) / (1 - mu(Omega_g) * beta)
where Omega_g = {r g < 1}. The free data are the exponents (s, eta) and the
auxiliary function g, which is searched over positive constants and the
distinguished choice g = 1/r (for which mu(Omega_g) = 0).
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

from scipy.optimize import minimize_scalar

from app.core.errors import HypothesisError, InfeasibleError, InvalidExponentError
from app.schemas.bounds import (
    INVERSE_R,
    NO_CERTIFIED_BOUND,
    TIE_RANK,
    BoundResult,
    GOptimum,
    RemarkRow,
    TheoremTag,
)
from app.schemas.hypothesis import HypothesisReport
from app.schemas.norms import NormValue
from app.services.coefficients import Problem, check_hypotheses, is_identically
from app.services.expressions import CoefficientExpr
from app.services.norms import (
    essential_extremum,
    lp_norm,
    omega_measure,
    region_pieces,
    uniform_local_norm,
)

logger = logging.getLogger(__name__)

GChoice = Union[float, str]
OPTIMIZE = "optimize"

DEFAULT_S_GRID = (1.0, 1.25, 1.5, 2.0, 3.0, math.inf)
DEFAULT_ETA_GRID = (1.0, 2.0)
LIEB_THIRRING_ONE_PARTICLE = 4 / (3**1.5 * math.pi)


# ---------------------------------------------------------------------------
# Closed-form constants
# ---------------------------------------------------------------------------


def warmup_constant(s: float) -> float:
    if s == 1:
        return 0.25
    if math.isinf(s):
        return 1.0
    return 2 ** (-2 / (2 * s - 1)) * ((s - 1) / s) ** (2 * (s - 1) / (2 * s - 1))


def warmup_exponent(s: float) -> float:
    if math.isinf(s):
        return 1.0
    return 2 * s / (2 * s - 1)


def thm2_constant(s: float) -> float:
    """Constant of the g = 1/r display of the second theorem with ||1/p||_inf = 1."""
    if math.isinf(s):
        return 1.0
    return 4 ** (1 / (2 * s - 1))


def thm1_parameters(q_minus_u: float, inv_p_sup: float) -> Tuple[float, float]:
    alpha = 2 * q_minus_u + 4 * inv_p_sup * q_minus_u**2
    return alpha, math.sqrt(4 * inv_p_sup * alpha)


def thm2_parameters(q_minus_s: float, inv_p_sup: float, s: float) -> Tuple[float, float]:
    if math.isinf(s):
        return q_minus_s, math.sqrt(4 * inv_p_sup * q_minus_s)
    beta = (4 * inv_p_sup * q_minus_s) ** (s / (2 * s - 1))
    return q_minus_s * beta ** (1 / s), beta


def thm3_parameters(
    q_minus_s: float, inv_p_eta: float, eta: float, s: float
) -> Tuple[float, float]:
    base = ((2 * eta - 1) / eta) ** 2 * inv_p_eta * q_minus_s
    if math.isinf(s):
        return q_minus_s, base ** (eta / (2 * eta - 1))
    beta = base ** (eta * s / (2 * eta * s - eta - s))
    return q_minus_s * beta ** (1 / s), beta


def thm1_closed_form(q_minus_u: float, inv_p_sup: float, inv_r_sup: float) -> float:
    return -(2 * q_minus_u + 4 * inv_p_sup * q_minus_u**2) * inv_r_sup


def thm2_closed_form(q_minus_s: float, inv_p_sup: float, inv_r_sup: float, s: float) -> float:
    if math.isinf(s):
        return -q_minus_s * inv_r_sup
    return (
        -((4 * inv_p_sup) ** (1 / (2 * s - 1)))
        * q_minus_s ** (2 * s / (2 * s - 1))
        * inv_r_sup
    )


def thm3_closed_form(
    q_minus_s: float, inv_p_eta: float, inv_r_sup: float, eta: float, s: float
) -> float:
    if math.isinf(s):
        return -q_minus_s * inv_r_sup
    denominator = 2 * eta * s - eta - s
    k = ((2 * eta - 1) / eta) ** 2 * inv_p_eta
    return (
        -(k ** (eta / denominator))
        * q_minus_s ** ((2 * eta * s - s) / denominator)
        * inv_r_sup
    )


# ---------------------------------------------------------------------------
# Individual calculators
# ---------------------------------------------------------------------------


def _finite(norm: Optional[NormValue]) -> bool:
    return norm is not None and norm.finite


def _theorem_bound(
    theorem: TheoremTag,
    alpha: float,
    beta: float,
    g: GChoice,
    omega: Optional[NormValue],
    inv_r_sup: Optional[NormValue],
    **params,
) -> BoundResult:
    if g == INVERSE_R:
        if not _finite(inv_r_sup):
            return BoundResult.inapplicable(
                theorem, "||1/r||_inf is infinite", alpha=alpha, beta=beta, g=g, **params
            )
        mu = 0.0
        g_sup = inv_r_sup.inflated
    else:
        g_sup = float(g)
        if not _finite(omega):
            return BoundResult.inapplicable(
                theorem, "mu(Omega_g) is infinite", alpha=alpha, beta=beta, g=g_sup, **params
            )
        mu = omega.inflated

    if mu * beta >= 1:
        return BoundResult.inapplicable(
            theorem,
            f"mu(Omega_g)*beta = {mu * beta:.6g} >= 1",
            alpha=alpha,
            beta=beta,
            g=g if g == INVERSE_R else g_sup,
            omega_measure=mu,
            **params,
        )
    bound = -alpha * g_sup / (1 - mu * beta) + 0.0
    return BoundResult(
        theorem=theorem,
        alpha=alpha,
        beta=beta,
        g=g if g == INVERSE_R else g_sup,
        omega_measure=mu,
        bound=bound,
        applicable=True,
        **params,
    )


def warmup_bound(q_norm: NormValue, s: float, unit_coefficients: bool = True) -> BoundResult:
    """-C(s) ||q||_s^(2s/(2s-1)) for p = r = 1 (s = inf gives -||q||_inf)."""
    if not unit_coefficients:
        return BoundResult.inapplicable(
            TheoremTag.WARMUP, "p and r must both be identically 1", s=s
        )
    if not q_norm.finite:
        return BoundResult.inapplicable(TheoremTag.WARMUP, "||q||_s is infinite", s=s)
    value = -warmup_constant(s) * q_norm.inflated ** warmup_exponent(s) + 0.0
    return BoundResult(theorem=TheoremTag.WARMUP, s=s, bound=value, applicable=True)


def thm1_bound(
    q_minus_u: NormValue,
    inv_p_sup: NormValue,
    g: GChoice,
    omega: Optional[NormValue] = None,
    inv_r_sup: Optional[NormValue] = None,
) -> BoundResult:
    if not (q_minus_u.finite and inv_p_sup.finite):
        return BoundResult.inapplicable(TheoremTag.THM1, "||q_-||_u or ||1/p||_inf is infinite")
    alpha, beta = thm1_parameters(q_minus_u.inflated, inv_p_sup.inflated)
    return _theorem_bound(TheoremTag.THM1, alpha, beta, g, omega, inv_r_sup)


def thm2_bound(
    q_minus_s: NormValue,
    inv_p_sup: NormValue,
    s: float,
    g: GChoice,
    omega: Optional[NormValue] = None,
    inv_r_sup: Optional[NormValue] = None,
) -> BoundResult:
    if not (q_minus_s.finite and inv_p_sup.finite):
        return BoundResult.inapplicable(
            TheoremTag.THM2, "||q_-||_s or ||1/p||_inf is infinite", s=s
        )
    alpha, beta = thm2_parameters(q_minus_s.inflated, inv_p_sup.inflated, s)
    return _theorem_bound(TheoremTag.THM2, alpha, beta, g, omega, inv_r_sup, s=s)


def thm3_gate(
    q_minus_s: NormValue, inv_p_eta: NormValue, eta: float, s: float
) -> Optional[str]:
    """Why the third theorem does not apply, or None."""
    if math.isinf(eta) or eta < 1:
        return "eta must lie in [1, inf)"
    if not math.isinf(s) and eta + s <= 2:
        return "requires eta + s > 2"
    if not (q_minus_s.finite and inv_p_eta.finite):
        return "||q_-||_s or ||1/p||_eta is infinite"
    return None


def thm3_bound(
    q_minus_s: NormValue,
    inv_p_eta: NormValue,
    eta: float,
    s: float,
    g: GChoice,
    omega: Optional[NormValue] = None,
    inv_r_sup: Optional[NormValue] = None,
) -> BoundResult:
    reason = thm3_gate(q_minus_s, inv_p_eta, eta, s)
    if reason is not None:
        return BoundResult.inapplicable(
            TheoremTag.THM3, reason, s=s, eta=eta if eta >= 1 else None
        )
    alpha, beta = thm3_parameters(q_minus_s.inflated, inv_p_eta.inflated, eta, s)
    return _theorem_bound(TheoremTag.THM3, alpha, beta, g, omega, inv_r_sup, s=s, eta=eta)


def nonnegativity_test(inv_p_l1: NormValue, q_minus_l1: NormValue) -> BoundResult:
    """min sigma(T) >= 0 when ||1/p||_1 ||q_-||_1 < 1."""
    if q_minus_l1.finite and q_minus_l1.magnitude == 0:
        return BoundResult(
            theorem=TheoremTag.PROP, bound=0.0, verdict="nonnegative", applicable=True
        )
    if not (inv_p_l1.finite and q_minus_l1.finite):
        return BoundResult.inapplicable(TheoremTag.PROP, "||1/p||_1 or ||q_-||_1 is infinite")
    product = inv_p_l1.inflated * q_minus_l1.inflated
    if product >= 1:
        return BoundResult.inapplicable(
            TheoremTag.PROP, f"||1/p||_1 ||q_-||_1 = {product:.6g} >= 1"
        )
    return BoundResult(theorem=TheoremTag.PROP, bound=0.0, verdict="nonnegative", applicable=True)


# ---------------------------------------------------------------------------
# Choice of constant g
# ---------------------------------------------------------------------------


def optimize_constant_g(
    alpha: float,
    beta: float,
    r: CoefficientExpr,
    compact: Tuple[float, float] = (-1.0, 1.0),
    essinf_outside: Optional[float] = None,
    r_inf: Optional[float] = None,
    half_line: bool = False,
) -> GOptimum:
    """Maximize -alpha c / (1 - mu(Omega_c) beta) over constants c with mu beta < 1.

    mu(Omega_c) is nonincreasing in c, so the feasible set is a half line
    [c_lo, inf). The objective is minimized in magnitude by a bounded
    golden-section/parabolic search on log c.
    """
    if alpha < 0 or beta < 0:
        raise InvalidExponentError("alpha and beta must be nonnegative")
    evaluations = 0

    def mu(c: float) -> float:
        nonlocal evaluations
        evaluations += 1
        norm = omega_measure(r, c, compact, essinf_outside, half_line)
        return norm.inflated if norm.finite else math.inf

    def feasible(c: float) -> bool:
        return mu(c) * beta < 1

    def magnitude(log_c: float) -> float:
        c = math.exp(log_c)
        m = mu(c)
        if m * beta >= 1:
            return math.inf
        return alpha * c / (1 - m * beta)

    c0 = 1.0 / essinf_outside if essinf_outside else 1.0
    if feasible(c0):
        hi = c0
        lo = c0 / 2
        steps = 0
        while feasible(lo) and steps < 60:
            hi, lo = lo, lo / 2
            steps += 1
        if steps == 60:
            c_lo = lo
        else:
            c_lo = _feasibility_edge(feasible, lo, hi)
    else:
        lo, hi = c0, c0 * 2
        steps = 0
        while not feasible(hi):
            lo, hi = hi, hi * 2
            steps += 1
            if steps >= 60:
                raise InfeasibleError(
                    f"no constant g achieves mu(Omega_g)*beta < 1 (beta={beta:.6g})"
                )
        c_lo = _feasibility_edge(feasible, lo, hi)

    if alpha == 0:
        m = mu(c_lo)
        return GOptimum(
            g_star=c_lo, bound=0.0, omega_measure=m, feasible_from=c_lo, evaluations=evaluations
        )

    if r_inf is not None and r_inf > 0:
        c_hi = max(c_lo, 1.0 / r_inf)
    else:
        c_hi = c_lo * 2**10

    candidates = [(magnitude(math.log(c_lo)), c_lo), (magnitude(math.log(c_hi)), c_hi)]
    if c_hi > c_lo * (1 + 1e-12):
        result = minimize_scalar(
            magnitude,
            bounds=(math.log(c_lo), math.log(c_hi)),
            method="bounded",
            options={"xatol": 1e-10},
        )
        candidates.append((float(result.fun), math.exp(float(result.x))))
    best_value, g_star = min(candidates)
    if not math.isfinite(best_value):
        raise InfeasibleError("no feasible constant g found in the search interval")

    logger.info(
        f"optimal constant g={g_star:.6g} (feasible from {c_lo:.6g}), bound={-best_value:.6g}"
    )
    return GOptimum(
        g_star=g_star,
        bound=-best_value + 0.0,
        omega_measure=mu(g_star),
        feasible_from=c_lo,
        evaluations=evaluations,
    )


def _feasibility_edge(feasible, infeasible_c: float, feasible_c: float) -> float:
    """Bisect in log c for the smallest feasible constant; returns a feasible point."""
    lo, hi = math.log(infeasible_c), math.log(feasible_c)
    while hi - lo > 1e-10:
        mid = 0.5 * (lo + hi)
        if feasible(math.exp(mid)):
            hi = mid
        else:
            lo = mid
    return math.exp(hi)


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------


@dataclass
class ProblemNorms:
    """Every norm the calculators consume, computed once per problem."""

    q_s: Dict[float, NormValue] = field(default_factory=dict)
    q_minus_s: Dict[float, NormValue] = field(default_factory=dict)
    inv_p_eta: Dict[float, NormValue] = field(default_factory=dict)
    q_minus_u: Optional[NormValue] = None
    inv_r_sup: Optional[NormValue] = None
    unit_coefficients: bool = False
    r_essinf_outside: Optional[float] = None
    r_inf: Optional[float] = None


def collect_norms(
    prob: Problem,
    s_grid: Sequence[float],
    eta_grid: Sequence[float],
    report: HypothesisReport,
    tol: Optional[float] = None,
) -> ProblemNorms:
    common = dict(tol=tol, start=prob.start, half_line=prob.half_line)
    q_tail = prob.tail("q")
    norms = ProblemNorms(
        unit_coefficients=is_identically(prob.p, 1.0, prob.half_line)
        and is_identically(prob.r, 1.0, prob.half_line),
        r_essinf_outside=report.r_essinf,
    )
    for s in s_grid:
        norms.q_minus_s[s] = lp_norm(prob.q_minus, s, tail=q_tail, **common)
        if norms.unit_coefficients:
            norms.q_s[s] = lp_norm(prob.q, s, tail=q_tail, **common)
    norms.q_minus_s.setdefault(1.0, lp_norm(prob.q_minus, 1.0, tail=q_tail, **common))
    for eta in set(eta_grid) | {1.0, math.inf}:
        norms.inv_p_eta[eta] = lp_norm(prob.inv_p, eta, tail=prob.tail("1/p"), **common)
    norms.q_minus_u = uniform_local_norm(
        prob.q_minus, tol=tol, tail=q_tail, start=prob.start, half_line=prob.half_line
    )
    norms.inv_r_sup = lp_norm(prob.inv_r, math.inf, tail=prob.tail("1/r"), **common)

    lo = 0.0 if prob.half_line else -math.inf
    r_inf, _, _ = essential_extremum(prob.r, region_pieces(lo, math.inf, prob.start), mode="inf")
    norms.r_inf = r_inf
    return norms


def _g_choices(g_strategy: GChoice, norms: ProblemNorms) -> List[GChoice]:
    if g_strategy == "auto":
        choices: List[GChoice] = [OPTIMIZE]
        if _finite(norms.inv_r_sup):
            choices.insert(0, INVERSE_R)
        return choices
    if g_strategy in ("inv_r", INVERSE_R):
        return [INVERSE_R]
    return [float(g_strategy)]


def _with_g(
    theorem: TheoremTag,
    alpha: float,
    beta: float,
    g: GChoice,
    prob: Problem,
    norms: ProblemNorms,
    **params,
) -> BoundResult:
    """Resolve the g choice (optimizing the constant when asked) and apply the theorem."""
    omega = None
    if g == OPTIMIZE:
        try:
            optimum = optimize_constant_g(
                alpha,
                beta,
                prob.r,
                compact=prob.compact_ab,
                essinf_outside=norms.r_essinf_outside,
                r_inf=norms.r_inf,
                half_line=prob.half_line,
            )
        except InfeasibleError as exc:
            return BoundResult.inapplicable(theorem, exc.detail, alpha=alpha, beta=beta, **params)
        g = optimum.g_star
    if g != INVERSE_R:
        omega = omega_measure(
            prob.r, float(g), prob.compact_ab, norms.r_essinf_outside, prob.half_line
        )
    return _theorem_bound(theorem, alpha, beta, g, omega, norms.inv_r_sup, **params)


def evaluate_bounds(
    prob: Problem,
    s_grid: Sequence[float] = DEFAULT_S_GRID,
    eta_grid: Sequence[float] = DEFAULT_ETA_GRID,
    g_strategy: GChoice = "auto",
    tol: Optional[float] = None,
    report: Optional[HypothesisReport] = None,
    norms: Optional[ProblemNorms] = None,
) -> List[BoundResult]:
    """Every calculator over the exponent grid, applicable or not."""
    report = report or check_hypotheses(prob)
    if not report.passed:
        raise HypothesisError(report)
    norms = norms or collect_norms(prob, s_grid, eta_grid, report, tol)
    results: List[BoundResult] = []

    results.append(nonnegativity_test(norms.inv_p_eta[1.0], norms.q_minus_s[1.0]))
    for s in s_grid:
        if norms.unit_coefficients:
            results.append(warmup_bound(norms.q_s[s], s))
        else:
            results.append(warmup_bound(norms.q_minus_s[s], s, unit_coefficients=False))

    inv_p_sup = norms.inv_p_eta[math.inf]
    for g in _g_choices(g_strategy, norms):
        if norms.q_minus_u.finite and inv_p_sup.finite:
            alpha, beta = thm1_parameters(norms.q_minus_u.inflated, inv_p_sup.inflated)
            results.append(_with_g(TheoremTag.THM1, alpha, beta, g, prob, norms))
        else:
            results.append(thm1_bound(norms.q_minus_u, inv_p_sup, INVERSE_R))

        for s in s_grid:
            q_minus_s = norms.q_minus_s[s]
            if q_minus_s.finite and inv_p_sup.finite:
                alpha, beta = thm2_parameters(q_minus_s.inflated, inv_p_sup.inflated, s)
                results.append(_with_g(TheoremTag.THM2, alpha, beta, g, prob, norms, s=s))
            else:
                results.append(thm2_bound(q_minus_s, inv_p_sup, s, INVERSE_R))

            for eta in eta_grid:
                inv_p_eta = norms.inv_p_eta[eta]
                if thm3_gate(q_minus_s, inv_p_eta, eta, s) is not None:
                    results.append(thm3_bound(q_minus_s, inv_p_eta, eta, s, INVERSE_R))
                    continue
                alpha, beta = thm3_parameters(q_minus_s.inflated, inv_p_eta.inflated, eta, s)
                results.append(
                    _with_g(TheoremTag.THM3, alpha, beta, g, prob, norms, s=s, eta=eta)
                )

    logger.info(
        f"{prob.identifier}: {sum(r.applicable for r in results)} of {len(results)} "
        "bounds applicable"
    )
    return results


def select_best(results: Sequence[BoundResult]) -> BoundResult:
    """Closest-to-zero applicable bound; near-equal bounds go by theorem rank."""
    applicable = [r for r in results if r.applicable]
    if not applicable:
        return BoundResult.inapplicable(None, NO_CERTIFIED_BOUND)
    top = max(r.bound for r in applicable)
    tied = [r for r in applicable if top - r.bound <= 1e-12 * max(1.0, abs(top))]
    return min(tied, key=lambda r: TIE_RANK[r.theorem])


def best_bound(
    prob: Problem,
    s_grid: Sequence[float] = DEFAULT_S_GRID,
    eta_grid: Sequence[float] = DEFAULT_ETA_GRID,
    g_strategy: GChoice = "auto",
    tol: Optional[float] = None,
) -> BoundResult:
    if not s_grid:
        return BoundResult.inapplicable(None, NO_CERTIFIED_BOUND)
    return select_best(evaluate_bounds(prob, s_grid, eta_grid, g_strategy, tol))


def remark_comparison_table(s_list: Sequence[float]) -> List[RemarkRow]:
    rows = []
    for s in s_list:
        if not (s >= 1 and math.isfinite(s)):
            raise InvalidExponentError(f"comparison table needs 1 <= s < inf, got {s}")
        rows.append(
            RemarkRow(
                s=s,
                thm2_constant=thm2_constant(s),
                warmup_constant=warmup_constant(s),
                lieb_thirring_constant=LIEB_THIRRING_ONE_PARTICLE if s == 1.5 else None,
            )
        )
    return rows
