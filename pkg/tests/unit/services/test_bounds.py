import math

import pytest
from pydantic import ValidationError

from app.core.errors import HypothesisError, InfeasibleError, InvalidExponentError
from app.schemas.bounds import INVERSE_R, BoundResult, TheoremTag
from app.schemas.norms import NormKind, NormValue
from app.services.bounds import (
    LIEB_THIRRING_ONE_PARTICLE,
    best_bound,
    evaluate_bounds,
    nonnegativity_test,
    optimize_constant_g,
    remark_comparison_table,
    select_best,
    thm1_bound,
    thm1_closed_form,
    thm1_parameters,
    thm2_bound,
    thm2_closed_form,
    thm3_bound,
    thm3_closed_form,
    thm3_gate,
    warmup_bound,
    warmup_constant,
)
from app.services.expressions import parse_coefficient_expr


def norm(value: float, s: float = 1.0) -> NormValue:
    return NormValue(value=value, kind=NormKind.LP, s=s)


INFINITE = NormValue.infinite(NormKind.LP, s=1.0)


def test_warmup_constant_at_three_halves():
    """Test 2^(-1) 3^(-1/2) = 0.28867 at s = 3/2"""
    assert warmup_constant(1.5) == pytest.approx(0.28867, abs=1e-5)
    assert warmup_constant(1.5) == pytest.approx(0.5 / math.sqrt(3), rel=1e-12)
    assert warmup_constant(1) == 0.25
    assert warmup_constant(math.inf) == 1.0


def test_warmup_bound():
    """Test the warm-up bound at s = 1 and s = inf"""
    assert warmup_bound(norm(4.0), 1.0).bound == pytest.approx(-4.0)
    assert warmup_bound(norm(2.0, math.inf), math.inf).bound == pytest.approx(-2.0)

    result = warmup_bound(norm(4.0), 1.0, unit_coefficients=False)
    assert not result.applicable
    assert result.bound is None

    assert not warmup_bound(INFINITE, 1.0).applicable


def test_remark_comparison_table():
    """Test 4 vs 1/4 at s = 1 and the strict ordering on the grid"""
    rows = remark_comparison_table([1, 1.5, 2])

    assert rows[0].thm2_constant == pytest.approx(4.0)
    assert rows[0].warmup_constant == pytest.approx(0.25)
    for row in rows:
        assert row.thm2_constant > row.warmup_constant
    assert rows[1].lieb_thirring_constant == pytest.approx(LIEB_THIRRING_ONE_PARTICLE)
    assert rows[1].lieb_thirring_constant == pytest.approx(0.24503, abs=1e-5)
    assert rows[0].lieb_thirring_constant is None

    with pytest.raises(InvalidExponentError):
        remark_comparison_table([math.inf])


@pytest.mark.parametrize("s", [1.0, 1.25, 1.5, 2.0, 3.0, math.inf])
def test_general_formula_matches_closed_forms(s):
    """Test the g = 1/r specialisation against the closed-form displays"""
    q_s, inv_p_sup, inv_p_eta, inv_r_sup = 0.7, 1.3, 2.1, 1.7
    r_norm = norm(inv_r_sup, math.inf)

    thm1 = thm1_bound(norm(q_s), norm(inv_p_sup, math.inf), INVERSE_R, inv_r_sup=r_norm)
    assert thm1.bound == pytest.approx(thm1_closed_form(q_s, inv_p_sup, inv_r_sup), rel=1e-12)
    assert thm1.omega_measure == 0.0

    thm2 = thm2_bound(norm(q_s, s), norm(inv_p_sup, math.inf), s, INVERSE_R, inv_r_sup=r_norm)
    assert thm2.bound == pytest.approx(
        thm2_closed_form(q_s, inv_p_sup, inv_r_sup, s), rel=1e-12
    )

    eta = 2.0
    thm3 = thm3_bound(norm(q_s, s), norm(inv_p_eta, eta), eta, s, INVERSE_R, inv_r_sup=r_norm)
    assert thm3.bound == pytest.approx(
        thm3_closed_form(q_s, inv_p_eta, inv_r_sup, eta, s), rel=1e-12
    )


def test_thm2_constant_display():
    """Test -4^(1/(2s-1)) ||q_-||_s^(2s/(2s-1)) for p = r = 1"""
    result = thm2_bound(norm(1.0), norm(1.0, math.inf), 1.0, INVERSE_R, inv_r_sup=norm(1.0))
    assert result.bound == pytest.approx(-4.0)


def test_thm3_gate():
    """Test the eta + s > 2 condition and infinite norms"""
    assert thm3_gate(norm(1.0), norm(1.0), 1.0, 1.0) == "requires eta + s > 2"
    assert thm3_gate(norm(1.0), norm(1.0), 1.0, 1.5) is None
    assert thm3_gate(norm(1.0), norm(1.0), 1.0, math.inf) is None
    assert thm3_gate(norm(1.0), INFINITE, 2.0, 2.0) is not None

    result = thm3_bound(norm(1.0), norm(1.0), 1.0, 1.0, INVERSE_R, inv_r_sup=norm(1.0))
    assert not result.applicable
    assert result.reason == "requires eta + s > 2"


def test_theorem_inapplicable_without_bounded_inverse_weight():
    """Test g = 1/r when 1/r is unbounded"""
    result = thm1_bound(norm(1.0), norm(1.0, math.inf), INVERSE_R, inv_r_sup=INFINITE)
    assert not result.applicable
    assert "1/r" in result.reason


def test_nonnegativity_test():
    """Test the product condition ||1/p||_1 ||q_-||_1 < 1"""
    result = nonnegativity_test(norm(math.pi), norm(0.2))
    assert result.applicable
    assert result.bound == 0.0
    assert result.verdict == "nonnegative"

    assert not nonnegativity_test(norm(math.pi), norm(0.5)).applicable
    assert nonnegativity_test(INFINITE, norm(0.0)).applicable
    assert not nonnegativity_test(INFINITE, norm(0.1)).applicable


def test_bound_result_invariants():
    """Test that results are never positive and inapplicable ones carry a reason"""
    with pytest.raises(ValidationError):
        BoundResult(theorem=TheoremTag.WARMUP, bound=0.5, applicable=True)
    with pytest.raises(ValidationError):
        BoundResult(theorem=TheoremTag.WARMUP, bound=-1.0, applicable=False, reason="x")
    with pytest.raises(ValidationError):
        BoundResult(theorem=TheoremTag.WARMUP, applicable=False)


def test_select_best_prefers_rank_on_ties():
    """Test tie-breaking between equal bounds"""
    warmup = BoundResult(theorem=TheoremTag.WARMUP, s=math.inf, bound=-2.0, applicable=True)
    thm2 = BoundResult(theorem=TheoremTag.THM2, s=math.inf, bound=-2.0, applicable=True)
    thm1 = BoundResult(theorem=TheoremTag.THM1, bound=-1.0, applicable=True)

    assert select_best([thm2, warmup]).theorem == TheoremTag.WARMUP
    assert select_best([thm2, warmup, thm1]).theorem == TheoremTag.THM1

    empty = select_best([BoundResult.inapplicable(TheoremTag.THM3, "requires eta + s > 2")])
    assert not empty.applicable
    assert empty.reason == "no certified bound"


def test_optimize_constant_g_closed_form():
    """Test c* = 4 beta and bound -8 alpha beta for r = min(1, |x|)"""
    r = parse_coefficient_expr("min(1, abs(x))")
    alpha, beta = thm1_parameters(1.0, 1.0)

    optimum = optimize_constant_g(alpha, beta, r, compact=(-1.0, 1.0), essinf_outside=1.0)

    assert optimum.g_star == pytest.approx(4 * beta, rel=1e-2)
    assert optimum.bound == pytest.approx(-8 * alpha * beta, rel=1e-2)
    assert optimum.feasible_from == pytest.approx(2 * beta, rel=1e-6)
    assert optimum.omega_measure * beta < 1


def test_optimize_constant_g_infeasible():
    """Test that a weight tiny on a fixed interval admits no constant"""
    r = parse_coefficient_expr("1 - (1 - 1e-30)*indicator(0, 1)")
    with pytest.raises(InfeasibleError):
        optimize_constant_g(1.0, 2.0, r, compact=(-1.0, 1.0), essinf_outside=1.0)


def test_poschl_teller_bounds(poschl_teller):
    """Test -4 at s = 1, -2 at s = inf, best -2 from the warm-up"""
    results = evaluate_bounds(poschl_teller, s_grid=[1.0, math.inf], eta_grid=[1.0, 2.0])
    warmups = {r.s: r.bound for r in results if r.theorem == TheoremTag.WARMUP}

    assert warmups[1.0] == pytest.approx(-4.0, rel=1e-6)
    assert warmups[math.inf] == pytest.approx(-2.0, rel=1e-6)

    best = select_best(results)
    assert best.theorem == TheoremTag.WARMUP
    assert best.bound == pytest.approx(-2.0, rel=1e-6)


def test_square_well_bound(square_well):
    """Test -||q||_1^2 / 4 = -0.25 for the unit square well"""
    results = evaluate_bounds(square_well, s_grid=[1.0], eta_grid=[2.0])
    warmup = next(r for r in results if r.theorem == TheoremTag.WARMUP)
    assert warmup.bound == pytest.approx(-0.25, rel=1e-6)


def test_growing_p_is_nonnegative(growing_p):
    """Test the certified nonnegativity for p = 1 + x^2"""
    best = best_bound(growing_p, s_grid=[1.0, 2.0])
    assert best.theorem == TheoremTag.PROP
    assert best.bound == 0.0
    assert best.verdict == "nonnegative"


def test_vanishing_weight_uses_constant_g(vanishing_weight):
    """Test that only optimized constants apply when 1/r is unbounded"""
    results = evaluate_bounds(vanishing_weight, s_grid=[1.0], eta_grid=[2.0])
    thm1 = [r for r in results if r.theorem == TheoremTag.THM1]

    assert len(thm1) == 1
    assert thm1[0].applicable
    assert isinstance(thm1[0].g, float)
    assert thm1[0].bound == pytest.approx(-8 * thm1[0].alpha * thm1[0].beta, rel=1e-2)


def test_evaluate_bounds_requires_hypotheses(make_problem):
    """Test that a failing hypothesis report stops evaluation"""
    with pytest.raises(HypothesisError) as exc_info:
        evaluate_bounds(make_problem(p="x"))
    assert not exc_info.value.report.passed


def test_best_bound_of_empty_grid(square_well):
    """Test an empty s grid yields no certified bound"""
    result = best_bound(square_well, s_grid=[])
    assert not result.applicable
    assert result.reason == "no certified bound"


def test_far_off_well_is_not_certified_nonnegative(make_problem):
    """Test a well far outside [a, b]"""
    prob = make_problem(q="-indicator(40, 41)")
    assert prob.start == 42.0

    best = best_bound(prob, s_grid=[1.0], eta_grid=[2.0])

    assert best.theorem != TheoremTag.PROP
    assert best.bound == pytest.approx(-0.25, rel=1e-6)


def test_bounds_decrease_with_well_depth(make_problem):
    """Test that a deeper well never gets a higher bound"""
    bounds = [
        best_bound(
            make_problem(q=f"-{depth}*indicator(0, 1)", ab=(0.0, 1.0)),
            s_grid=[1.0, 2.0, math.inf],
            eta_grid=[1.0, 2.0],
        ).bound
        for depth in (1, 2, 4, 8)
    ]
    assert bounds == sorted(bounds, reverse=True)
