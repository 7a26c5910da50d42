import numpy as np
import pytest

from distode import Box, Shape, SystemSpec, frobenius_check, lie_bracket, shape_sensitivity
from distode.frobenius import column_jacobian


def test_constant_columns_have_zero_jacobian():
    sys_ = SystemSpec.from_expressions(2, ["0", "0"], [["1", "2"], ["3", "4"]])
    assert np.max(np.abs(column_jacobian(sys_, 1, 0.0, [0.3, -0.2]))) <= 1e-9


def test_jacobian_of_state_column(twisted):
    jac = column_jacobian(twisted, 1, 0.0, [0.4, 0.7])
    assert jac == pytest.approx(np.array([[0.0, 0.0], [1.0, 0.0]]), abs=1e-6)


def test_scalar_jacobian(exp_jump):
    assert column_jacobian(exp_jump, 0, 0.0, [0.7])[0, 0] == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("x", [[0.0, 0.0], [1.5, -3.0], [-2.0, 0.5]])
def test_bracket_value(twisted, x):
    assert lie_bracket(twisted, 0, 1, 0.0, x) == pytest.approx([0.0, 1.0], abs=1e-5)
    assert lie_bracket(twisted, 1, 0, 0.0, x) == pytest.approx([0.0, -1.0], abs=1e-5)


def test_bracket_diagonal_exact(twisted):
    assert np.all(lie_bracket(twisted, 1, 1, 0.0, [0.3, 0.3]) == 0.0)


def test_scalar_system_bracket_vanishes(exp_jump):
    assert np.all(lie_bracket(exp_jump, 0, 0, 0.0, [1.0]) == 0.0)
    rep = frobenius_check(exp_jump, box=([-2.0], [2.0]))
    assert rep.passed and rep.max_norm == 0.0


def test_check_passes_for_diagonal_constant():
    sys_ = SystemSpec.from_expressions(2, ["0", "0"], [["1", "0"], ["0", "2"]])
    rep = frobenius_check(sys_, N=128, box=([-1.0, -1.0], [1.0, 1.0]))
    assert rep.passed and rep.samples == 128


def test_check_fails_for_twisted(twisted):
    rep = frobenius_check(twisted, N=256, box=([-2.0, -2.0], [2.0, 2.0]))
    assert not rep.passed
    assert rep.max_norm == pytest.approx(1.0, abs=1e-5)
    d = rep.to_dict()
    assert set(d) == {"pass", "tol", "max_norm", "argmax_point"}
    assert d["argmax_point"]["columns"] == [1, 2]


def test_check_needs_finite_box_and_samples(twisted):
    with pytest.raises(ValueError):
        frobenius_check(twisted)
    with pytest.raises(ValueError):
        frobenius_check(twisted, N=50, box=([-1, -1], [1, 1]))


def test_explicit_points(twisted):
    rep = frobenius_check(twisted, points=[[0.0, 1.0, 2.0]])
    assert rep.samples == 1 and not rep.passed


def test_fast_time_columns_checked_on_s_grid():
    # column 2 = (0, s*x1): the bracket (0, s) vanishes only at s = 0
    sys_ = SystemSpec.from_expressions(2, ["0", "0"], [["1", "0"], ["0", "s*x1"]])
    rep = frobenius_check(sys_, N=100, box=([-1.0, -1.0], [1.0, 1.0]))
    assert not rep.passed
    assert rep.max_norm == pytest.approx(0.5, abs=1e-5)


def test_scalar_shape_sensitivity(exp_jump):
    skewed = Shape.from_expr("1 + 1.5*s")
    val = shape_sensitivity(exp_jump, 0.0, [1.3], [1.0], ["flat", "tent", skewed])
    assert val <= 1e-8


def test_constant_matrix_shape_sensitivity():
    sys_ = SystemSpec.from_expressions(2, ["0", "0"], [["1", "2"], ["-1", "0.5"]])
    val = shape_sensitivity(sys_, 0.0, [0.0, 1.0], [0.5, 2.0],
                            [("front", "back"), ("back", "front"), "tent"])
    assert val <= 1e-8


def test_twisted_shape_sensitivity(twisted):
    val = shape_sensitivity(twisted, 0.0, [0.0, 0.0], [1.0, 1.0],
                            [("front", "back"), ("back", "front")])
    assert val == pytest.approx(2.0 / 3.0, abs=1e-8)


def test_sensitivity_needs_two(exp_jump):
    with pytest.raises(ValueError):
        shape_sensitivity(exp_jump, 0.0, [1.0], [1.0], ["flat"])
