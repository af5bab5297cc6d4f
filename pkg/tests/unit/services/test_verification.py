import math

import numpy as np
import pytest

from app.core.config import settings
from app.core.errors import HypothesisError, SLBoundsError
from app.schemas.bounds import BoundResult, TheoremTag
from app.schemas.verification import OracleAgreement
from app.services.verification import (
    TestFunction,
    check_lemma_A6,
    check_quadratic_form_identity,
    fuzz_rows,
    fuzz_sobolev_inequalities,
    quadratic_form_terms,
    validate_bounds,
)


def test_test_function_validation():
    """Test the support and shape rules of piecewise-linear test functions"""
    with pytest.raises(SLBoundsError):
        TestFunction(np.array([0.0, 1.0]), np.array([0.0, 0.0]))
    with pytest.raises(SLBoundsError):
        TestFunction(np.array([0.0, 1.0, 2.0]), np.array([0.0, 1.0, 1.0]))
    with pytest.raises(SLBoundsError):
        TestFunction(np.array([0.0, 2.0, 1.0]), np.array([0.0, 1.0, 0.0]))
    with pytest.raises(SLBoundsError):
        TestFunction(np.array([0.0, 1.0, 2.0]), np.array([0.0, math.nan, 0.0]))


def test_hat_function_norms():
    """Test exact sup, L2 and slopes of a hat"""
    f = TestFunction.hat(-1.0, 1.0)

    assert f.support == (-1.0, 1.0)
    assert f.sup_abs() == 1.0
    assert f.l2_squared() == pytest.approx(2 / 3)
    assert f.l2_squared(0.0, 1.0) == pytest.approx(1 / 3)
    assert f.sup_abs(0.5, 3.0) == 0.5
    np.testing.assert_array_equal(f.derivative(np.array([-2.0, -0.5, 0.5, 2.0])), [0, 1, -1, 0])


def test_random_test_functions_stay_in_window():
    """Test the seeded generator"""
    rng = np.random.default_rng(7)
    for _ in range(50):
        f = TestFunction.random(rng, (-4.0, 4.0))
        lo, hi = f.support
        assert -4.0 <= lo < hi <= 4.0
        assert hi - lo >= 0.5
        assert f.values[0] == 0.0 and f.values[-1] == 0.0

    a = TestFunction.random(np.random.default_rng(3), (-4.0, 4.0))
    b = TestFunction.random(np.random.default_rng(3), (-4.0, 4.0))
    np.testing.assert_array_equal(a.values, b.values)


def test_quadratic_form_terms_for_hat(make_problem):
    """Test the kinetic and potential terms against hand integrals"""
    f = TestFunction.hat(-1.0, 1.0)

    free = quadratic_form_terms(make_problem(), f)
    assert free.energy == pytest.approx(2.0, rel=1e-10)
    assert free.form == pytest.approx(2.0, rel=1e-10)

    well = quadratic_form_terms(make_problem(q="-indicator(0, 1)"), f)
    assert well.q_minus == pytest.approx(1 / 3, rel=1e-10)
    assert well.q_plus == 0.0
    assert well.form == pytest.approx(2 - 1 / 3, rel=1e-10)

    growing = quadratic_form_terms(make_problem(p="1 + x^2"), f)
    assert growing.energy == pytest.approx(8 / 3, rel=1e-10)


def test_quadratic_form_identity(poschl_teller):
    """Test the split of the form into its three norms"""
    assert check_quadratic_form_identity(TestFunction.hat(-1.0, 1.0), poschl_teller) < 1e-8

    zero = TestFunction(np.array([0.0, 1.0, 2.0]), np.zeros(3))
    assert check_quadratic_form_identity(zero, poschl_teller) == 0.0


def test_form_negative_functions_are_controlled(make_problem):
    """Test the kinetic and |q| bounds on a deep well"""
    prob = make_problem(q="-50*indicator(-1, 1)")
    f = TestFunction.hat(-1.0, 1.0)

    verdict = check_lemma_A6(prob, f)
    assert verdict.qualifies
    assert verdict.passed
    assert verdict.form < 0
    assert verdict.energy <= verdict.q_minus
    assert verdict.kinetic_vanishes is None

    scaled = check_lemma_A6(prob, f.scaled(7.0))
    assert scaled.qualifies and scaled.passed
    assert scaled.form == pytest.approx(49 * verdict.form, rel=1e-9)


def test_positive_form_is_skipped(free_problem):
    """Test that a function with positive form value does not qualify"""
    verdict = check_lemma_A6(free_problem, TestFunction.hat(-1.0, 1.0))
    assert not verdict.qualifies
    assert verdict.passed
    assert verdict.energy is None


def test_fuzz_free_problem(free_problem):
    """Test the inequality fuzz on the free operator"""
    counts = fuzz_sobolev_inequalities(free_problem, eta=[1.0, 2.0, math.inf], trials=40)

    assert counts.trials == 40
    assert counts.violations == 0
    assert counts.form_identity_failures == 0
    assert counts.lemma_a6_qualifying == 0
    assert {"sup_norm", "sup_norm_eta=1", "sup_norm_eta=2", "local_eps=1"} <= set(
        counts.inequalities
    )
    assert counts.inequalities["sup_norm"].trials == 40
    assert counts.worst_slack >= 0


def test_fuzz_at_full_trial_count(free_problem):
    """Test a thousand seeded trials of the free operator"""
    counts = fuzz_sobolev_inequalities(free_problem, trials=1000)

    assert counts.trials == 1000
    assert counts.violations == 0
    assert counts.form_identity_failures == 0


def test_steep_test_function(free_problem):
    """Test the form of a function rising by 10 over 1e-8"""
    f = TestFunction(np.array([1.7976, 1.7976 + 1e-8, 5.1054]), np.array([0.0, 10.0, 0.0]))
    expected = float(np.sum(f.slopes**2 * np.diff(f.breakpoints)))

    terms = quadratic_form_terms(free_problem, f)

    assert terms.energy == pytest.approx(expected, rel=1e-9)
    assert terms.form == pytest.approx(expected, rel=1e-9)
    assert check_quadratic_form_identity(f, free_problem) < 1e-8 * (1 + terms.magnitude)


def test_fuzz_deep_well(make_problem):
    """Test zero violations with form-nonpositive functions around"""
    prob = make_problem(q="-50*indicator(-1, 1)")
    counts = fuzz_sobolev_inequalities(prob, trials=40, seed=11)

    assert counts.violations == 0
    assert counts.form_identity_failures == 0
    assert counts.form_identity_max_slack < 1e-6


def test_fuzz_is_reproducible(square_well):
    """Test that the same seed gives the same worst cases"""
    first = fuzz_sobolev_inequalities(square_well, trials=10, seed=5)
    second = fuzz_sobolev_inequalities(square_well, trials=10, seed=5)

    assert fuzz_rows(first) == fuzz_rows(second)
    assert all(row[0] in range(5, 15) for row in fuzz_rows(first))


def test_fuzz_rejects_zero_trials(free_problem):
    """Test the trial count"""
    with pytest.raises(SLBoundsError):
        fuzz_sobolev_inequalities(free_problem, trials=0)


def test_validate_poschl_teller(poschl_teller):
    """Test that every certified bound lies below the oracle"""
    report = validate_bounds(poschl_teller, s_grid=[1.0, math.inf], trials=20)

    assert report.oracle_converged
    assert report.all_bounds_below_oracle
    assert report.passed
    assert report.best.bound == pytest.approx(-2.0, rel=1e-6)
    assert report.oracle.lambda_min == pytest.approx(-1.0, abs=1e-3)
    assert report.lemma_fuzz.trials == 20


def test_validate_vanishing_weight(vanishing_weight):
    """Test the validation of an optimized constant g"""
    report = validate_bounds(vanishing_weight, s_grid=[1.0], eta_grid=[2.0], trials=0)

    assert report.passed
    assert report.lemma_fuzz is None
    assert report.best.bound <= report.oracle.lambda_min + report.margin


def test_validate_without_oracle_convergence(free_problem, mocker):
    """Test that bounds under an unsettled estimate are reported consistent"""
    mocker.patch.object(settings, "ORACLE_MAX_L", 8.0)

    report = validate_bounds(free_problem, s_grid=[1.0], eta_grid=[2.0], trials=0)

    assert not report.oracle_converged
    assert report.all_bounds_below_oracle
    assert report.agreement == OracleAgreement.CONSISTENT_UNCONVERGED
    assert report.passed


def test_validate_bound_above_unconverged_oracle(square_well, mocker):
    """Test that a bound over the last estimate fails even without convergence"""
    mocker.patch.object(settings, "ORACLE_MAX_L", 8.0)
    too_high = BoundResult(
        theorem=TheoremTag.PROP, bound=0.0, verdict="nonnegative", applicable=True
    )
    mocker.patch("app.services.verification.evaluate_bounds", return_value=[too_high])

    report = validate_bounds(square_well, trials=0)

    assert not report.oracle_converged
    assert report.all_bounds_below_oracle is False
    assert report.agreement == OracleAgreement.ABOVE
    assert not report.passed


def test_validate_growing_p(growing_p):
    """Test that the slowly settling p = 1 + x^2 problem passes"""
    report = validate_bounds(growing_p, s_grid=[1.0, 2.0], eta_grid=[1.0, 2.0], trials=0)

    assert report.best.theorem == TheoremTag.PROP
    assert report.agreement in (OracleAgreement.BELOW, OracleAgreement.CONSISTENT_UNCONVERGED)
    assert report.oracle.lambda_min > 0
    assert report.passed


def test_validate_requires_hypotheses(make_problem):
    """Test a failing hypothesis report"""
    with pytest.raises(HypothesisError):
        validate_bounds(make_problem(r="sech(x)"), trials=0)
