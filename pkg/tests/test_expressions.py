"""Parser and evaluator tests, including the 200-case golden file.

The golden file was produced by tests/make_expression_golden.py, which
evaluates each expression with an independent interpreter (Python eval on
a textual translation), so the values asserted here were never computed
by the code under test.
"""

import json
import math
import pathlib

import numpy as np
import pytest

from lorwave.errors import ExpressionEvalError, ExpressionSyntaxError
from lorwave.expressions import parse_expression

DATA = pathlib.Path(__file__).parent / "data"


def test_basic_arithmetic():
    e = parse_expression("1 + 0.5*sin(x)")
    assert e(0.0, 0.0) == 1.0
    assert e(0.0, math.pi / 2) == pytest.approx(1.5, rel=1e-15)


def test_power_right_associative():
    assert parse_expression("2^3^2")(0.0, 0.0) == 512.0


def test_unary_minus_binds_tighter_than_subtraction():
    assert parse_expression("-2^2")(0.0, 0.0) == -4.0
    assert parse_expression("3--2")(0.0, 0.0) == 5.0


def test_pi_and_functions():
    e = parse_expression("cos(pi*t) + sqrt(abs(x))")
    assert e(1.0, 4.0) == pytest.approx(-1.0 + 2.0)


def test_syntax_error_offset():
    with pytest.raises(ExpressionSyntaxError) as ei:
        parse_expression("sin(")
    assert ei.value.offset == 4


def test_unknown_identifier():
    with pytest.raises(ExpressionSyntaxError):
        parse_expression("2*y")


def test_trailing_garbage():
    with pytest.raises(ExpressionSyntaxError) as ei:
        parse_expression("1 + 2 )")
    assert ei.value.offset == 6


def test_division_by_zero_reports_offset():
    e = parse_expression("1 + t/x")
    with pytest.raises(ExpressionEvalError) as ei:
        e(1.0, 0.0)
    assert ei.value.offset == 5


def test_sqrt_of_negative_reports_error():
    e = parse_expression("sqrt(x)")
    with pytest.raises(ExpressionEvalError):
        e(0.0, -1.0)


def test_vectorized_evaluation():
    e = parse_expression("sin(x)*cos(t)")
    x = np.linspace(0, 1, 7)
    out = e(0.5, x)
    assert out.shape == x.shape
    np.testing.assert_allclose(out, np.sin(x) * math.cos(0.5), rtol=1e-15)


def test_golden_file_200_cases():
    cases = json.loads((DATA / "expression_golden.json").read_text())
    assert len(cases) == 200
    for case in cases:
        e = parse_expression(case["src"])
        got = float(e(case["t"], case["x"]))
        want = case["value"]
        assert got == pytest.approx(want, rel=1e-15, abs=1e-300), case["src"]


def test_parse_is_deterministic():
    src = "1 + 2*sin(x)^2 - t/(3+x)"
    a, b = parse_expression(src), parse_expression(src)
    xs = np.linspace(-2, 2, 11)
    assert np.array_equal(a(0.3, xs), b(0.3, xs))


# --- symbolic derivative (checked against central differences) -----------

@pytest.mark.parametrize("src", [
    "1 + 0.5*sin(x)",
    "sin(2*x)*cos(3*t)",
    "exp(tanh(x) - t^2)",
    "sqrt(2 + sin(x))",
    "(1 + 0.1*sin(t)*cos(x))^2",
    "x/(2 + cos(t))",
    "2^x",
])
@pytest.mark.parametrize("var", ["t", "x"])
def test_diff_matches_central_differences(src, var):
    e = parse_expression(src)
    de = e.diff(var)
    rng = np.random.default_rng(20240601)
    pts = rng.uniform(-1.5, 1.5, size=(20, 2))
    h = 1e-5
    for t0, x0 in pts:
        if var == "t":
            fd = (e(t0 + h, x0) - e(t0 - h, x0)) / (2 * h)
        else:
            fd = (e(t0, x0 + h) - e(t0, x0 - h)) / (2 * h)
        assert de(t0, x0) == pytest.approx(fd, rel=2e-9, abs=2e-9)


def test_diff_of_constant_is_zero():
    e = parse_expression("3*pi^2")
    assert e.diff("t")(1.0, 1.0) == 0.0
    assert e.is_constant()
    assert e.constant_value() == pytest.approx(3 * math.pi**2)


def test_depends_on():
    e = parse_expression("1 + sin(x)")
    assert e.depends_on("x") and not e.depends_on("t")
