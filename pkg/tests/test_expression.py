import math

import pytest
from hypothesis import given, strategies as st

from bpve.expression import ExpressionError, parse_expression


@pytest.mark.parametrize("text,k,value", [
    ("1/(2)", 3, 0.5),
    ("1-1/k", 4, 0.75),
    ("k+2", 5, 7),
    ("1/k^2", 3, 1 / 9),
    ("2^3^2", 1, 512),          # right associative
    ("-k^2", 3, -9),            # power binds tighter than unary minus
    ("2*-k", 3, -6),
    ("(1+k)*(k-1)/2", 5, 12),
    ("exp(log(k))", 7, 7),
    ("sqrt(k)", 16, 4),
    ("min(0.5, 1/k, 2)", 4, 0.25),
    ("max(k, 3)", 1, 3),
    ("1.5e-1 + .5", 0, 0.65),
    ("  k  ", 2, 2),
])
def test_evaluation(text, k, value):
    assert parse_expression(text)(k) == pytest.approx(value)


def test_plain_numbers_and_constant_flag():
    assert parse_expression(0.25)(9) == 0.25
    assert parse_expression("1/(2)").is_constant
    assert not parse_expression("1/k").is_constant


@pytest.mark.parametrize("text,column", [
    ("1 +", 4),
    ("2 * (k", 7),
    ("n + 1", 1),
    ("foo(k)", 1),
    ("k $ 2", 3),
    ("log(1, 2)", 1),
    ("min(1)", 1),
    ("1 2", 3),
])
def test_errors_carry_columns(text, column):
    with pytest.raises(ExpressionError) as info:
        parse_expression(text)
    assert info.value.column == column


def test_evaluation_errors_are_arithmetic():
    with pytest.raises(ArithmeticError):
        parse_expression("1/(k-1)")(1)
    with pytest.raises(ArithmeticError):
        parse_expression("log(k-1)")(1)


@given(st.integers(1, 10**6), st.floats(-100, 100, allow_nan=False), st.floats(0.1, 100))
def test_matches_python_arithmetic(k, a, b):
    e = parse_expression(f"({a!r}) * k - k / ({b!r}) + ({a!r})^2")
    assert e(k) == pytest.approx(a * k - k / b + a**2, rel=1e-12, abs=1e-9)
