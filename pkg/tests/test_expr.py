import math

import pytest

from distode import expr
from distode.expr import (ArityError, BinOp, EvalError, ExprSyntaxError, FastTimeContextError,
                          Num, UnboundVariableError, Var, parse)


def test_subtraction_tree():
    e = parse("x1 - 1", 1)
    assert e.root == BinOp("-", Var("x1"), Num(1.0))


def test_half_minus_state_parses():
    e = parse("0.5 - x1", 1)
    assert e.eval(0.0, [0.25]) == 0.25


def test_out_of_range_state_index():
    with pytest.raises(UnboundVariableError) as info:
        parse("x3 + 1", 2)
    assert info.value.col == 1


@pytest.mark.parametrize("src", ["x0", "y", "x1 +", "(x1", "x1 x1", "2 ** 3", "", "   ", "1.2.3"])
def test_syntax_and_binding_errors(src):
    with pytest.raises(expr.ExprError):
        parse(src, 1)


def test_error_position_reported():
    with pytest.raises(ExprSyntaxError) as info:
        parse("x1 +\n  * 2", 1)
    assert (info.value.line, info.value.col) == (2, 3)


@pytest.mark.parametrize("src", ["sin(x1, x1)", "min(x1)", "exp()"])
def test_arity(src):
    with pytest.raises(ArityError):
        parse(src, 1)


def test_eval_basic():
    assert parse("x1 - 1", 1).eval(0.0, [3.0]) == 2.0
    assert parse("exp(t)", 0).eval(1.0, []) == pytest.approx(math.e, abs=1e-12)


def test_precedence_and_associativity():
    assert parse("2^3^2", 0).eval(0, []) == 512.0
    assert parse("-2^2", 0).eval(0, []) == -4.0
    assert parse("2^-1", 0).eval(0, []) == 0.5
    assert parse("1 - 2 - 3", 0).eval(0, []) == -4.0
    assert parse("8 / 2 / 2", 0).eval(0, []) == 2.0
    assert parse("1 + 2 * 3", 0).eval(0, []) == 7.0
    assert parse("max(1, min(x1, 3)) + abs(-2) + sqrt(4) + ln(1) + cos(0)", 1).eval(0, [5.0]) == 8.0


@pytest.mark.parametrize("src,x", [("1/x1", 0.0), ("ln(x1)", 0.0), ("ln(x1)", -1.0),
                                   ("sqrt(x1)", -1.0), ("x1^0.5", -4.0), ("x1^-1", 0.0),
                                   ("exp(x1)", 1000.0)])
def test_domain_errors(src, x):
    with pytest.raises(EvalError):
        parse(src, 1).eval(0.0, [x])


def test_fast_time_outside_jump():
    e = parse("s * x1", 1)
    with pytest.raises(FastTimeContextError, match="fast-time variable outside jump context"):
        e.eval(0.0, [1.0])
    assert e.eval(0.0, [2.0], 0.25) == 0.5


def test_wrong_state_length():
    with pytest.raises(ValueError):
        parse("x1", 1).eval(0.0, [1.0, 2.0])


def test_gradients():
    g = expr.grad(parse("(x1-0.5)^2 - 0.25", 1), [1.0])
    assert g[0] == pytest.approx(1.0, abs=1e-6)
    g = expr.grad(parse("x1^2 - 1", 1), [-1.0])
    assert g[0] == pytest.approx(-2.0, abs=1e-6)
    g = parse("x1 + x2", 2).grad([0.0, 0.0])
    assert g == pytest.approx([1.0, 1.0], abs=1e-9)


def test_gradient_probe_failure_names_location():
    with pytest.raises(EvalError, match="gradient probe failed"):
        expr.grad(parse("ln(x1)", 1), [0.0])


def test_printout_roundtrip():
    src = "-x1^2 + sin(t)*max(x2, 3) / (1 - s)"
    e = parse(src, 2)
    again = parse(str(e), 2)
    assert again.root == e.root
    assert parse(str(again), 2).root == again.root


def test_variables_and_flags():
    e = parse("t + s * x2", 2)
    assert e.variables == {"t", "s", "x2"}
    assert e.uses_s and e.uses_t and not e.is_constant
    assert parse("3", 0).is_constant
