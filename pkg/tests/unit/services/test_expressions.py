import math

import numpy as np
import pytest

from app.core.errors import (
    ArityError,
    CoefficientEvaluationError,
    ExpressionSyntaxError,
    PoleEvaluationError,
    UnknownIdentifierError,
)
from app.services.expressions import (
    evaluate_expr,
    negative_part,
    parse_coefficient_expr,
    positive_part,
    reciprocal,
)


def test_arithmetic_and_precedence():
    """Test operator precedence and right-associative powers"""
    e = parse_coefficient_expr("1 + 2*x^2 - x/4")
    assert evaluate_expr(e, 2.0) == pytest.approx(1 + 8 - 0.5)

    assert evaluate_expr(parse_coefficient_expr("2^3^2"), 0.0) == 512.0
    assert evaluate_expr(parse_coefficient_expr("-x^2"), 3.0) == -9.0


def test_named_functions():
    """Test the built-in functions"""
    e = parse_coefficient_expr("-2*sech(x)^2")
    assert evaluate_expr(e, 0.0) == pytest.approx(-2.0)
    assert evaluate_expr(e, 1.0) == pytest.approx(-2 / math.cosh(1.0) ** 2)

    assert evaluate_expr(parse_coefficient_expr("min(1, abs(x))"), -0.5) == 0.5
    assert evaluate_expr(parse_coefficient_expr("max(x, 0, 2)"), 1.0) == 2.0
    assert evaluate_expr(parse_coefficient_expr("exp(tanh(0))"), 5.0) == 1.0


def test_indicator_is_half_open():
    """Test that indicator(lo, hi) includes lo and excludes hi"""
    e = parse_coefficient_expr("indicator(0, 1)")
    values = e.evaluate_array(np.array([-0.1, 0.0, 0.5, 1.0]))
    assert values.tolist() == [0.0, 1.0, 1.0, 0.0]


def test_piecewise_covers_line():
    """Test piecewise evaluation and its coverage check"""
    e = parse_coefficient_expr("piecewise((-inf, 0, 1), (0, inf, 1 + x))")
    assert evaluate_expr(e, -3.0) == 1.0
    assert evaluate_expr(e, 2.0) == 3.0
    assert e.breakpoints() == (0.0,)

    with pytest.raises(ExpressionSyntaxError):
        parse_coefficient_expr("piecewise((-inf, 0, 1), (1, inf, x))")


def test_syntax_errors_carry_byte_offset():
    """Test parse errors report the byte offset of the fault"""
    with pytest.raises(ExpressionSyntaxError) as exc_info:
        parse_coefficient_expr("x + 2 * é")
    assert exc_info.value.offset == 8

    with pytest.raises(ExpressionSyntaxError) as exc_info:
        parse_coefficient_expr("(x + 1")
    assert exc_info.value.offset == 6


def test_unknown_identifier_and_arity():
    """Test unknown names and wrong argument counts"""
    with pytest.raises(UnknownIdentifierError) as exc_info:
        parse_coefficient_expr("2*y")
    assert exc_info.value.name == "y"

    with pytest.raises(UnknownIdentifierError):
        parse_coefficient_expr("sinh(x)")

    with pytest.raises(ArityError):
        parse_coefficient_expr("exp(x, 1)")

    with pytest.raises(ArityError):
        parse_coefficient_expr("min(x)")


def test_pole_evaluation():
    """Test that evaluation at a pole raises instead of returning inf"""
    e = parse_coefficient_expr("1/x")
    with pytest.raises(PoleEvaluationError) as exc_info:
        evaluate_expr(e, 0.0)
    assert exc_info.value.x == 0.0

    values = e.evaluate_safe(np.array([-1.0, 0.0, 2.0]))
    assert values[0] == -1.0
    assert math.isnan(values[1])
    assert values[2] == 0.5


def test_overflow_is_not_finite():
    """Test that overflow becomes a coefficient evaluation error"""
    e = parse_coefficient_expr("exp(x)")
    with pytest.raises(CoefficientEvaluationError):
        evaluate_expr(e, 1000.0)


def test_singular_points():
    """Test pole detection for crossing and touching denominators"""
    assert parse_coefficient_expr("1/x").singular_points(-1, 1) == (0.0,)
    assert parse_coefficient_expr("x^(-2)").singular_points(-1, 1) == (0.0,)

    touching = parse_coefficient_expr("1/(x - 0.3)^2").singular_points(-2, 2)
    assert len(touching) == 1
    assert touching[0] == pytest.approx(0.3, abs=1e-9)

    assert parse_coefficient_expr("1/(1 + x^2)").singular_points(-5, 5) == ()


def test_text_round_trip_preserves_values():
    """Test that printing and re-parsing gives the same function"""
    xs = np.linspace(-3, 3, 101)
    for text in [
        "-2*sech(x)^2",
        "1 + x^2",
        "-(x - 1)^2 / (2 + abs(x))",
        "min(1, abs(x))",
        "-0.2*indicator(0, 1)",
        "2^-x",
    ]:
        e = parse_coefficient_expr(text)
        again = parse_coefficient_expr(e.to_text())
        np.testing.assert_allclose(again.evaluate_array(xs), e.evaluate_array(xs))


def test_parts_of_q():
    """Test the positive/negative part split and the reciprocal helper"""
    q = parse_coefficient_expr("x")
    xs = np.array([-2.0, 0.0, 3.0])
    np.testing.assert_array_equal(positive_part(q).evaluate_array(xs), [0.0, 0.0, 3.0])
    np.testing.assert_array_equal(negative_part(q).evaluate_array(xs), [2.0, 0.0, 0.0])
    np.testing.assert_allclose(
        reciprocal(parse_coefficient_expr("1 + x^2")).evaluate_array(xs), [0.2, 1.0, 0.1]
    )


def test_nesting_depth_is_capped():
    """Test that deeply nested input is a syntax error, not a crash"""
    with pytest.raises(ExpressionSyntaxError) as exc_info:
        parse_coefficient_expr("(" * 500 + "x" + ")" * 500)
    assert exc_info.value.offset == 100
    assert "byte offset 100" in exc_info.value.detail

    with pytest.raises(ExpressionSyntaxError):
        parse_coefficient_expr("-" * 500 + "x")
    with pytest.raises(ExpressionSyntaxError):
        parse_coefficient_expr("+".join(["x"] * 500))

    nested = parse_coefficient_expr("(" * 40 + "x" + ")" * 40)
    assert evaluate_expr(nested, 2.5) == 2.5
