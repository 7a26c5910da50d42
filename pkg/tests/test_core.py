import math
import warnings

import numpy as np
import pytest

from distode import (Box, ConstraintSet, ImpulseAtom, ImpulseControl, Shape, ShapeError,
                     SystemSpec, check_admissible, control_integral, heaviside_delta_product,
                     validate_shape)
from distode.core import BoundaryAtomWarning, adaptive_simpson


@pytest.mark.parametrize("name", ["flat", "tent", "front", "back"])
def test_presets_are_normalised(name):
    rep = validate_shape(Shape.preset(name))
    assert rep.passed
    assert abs(rep.integral - 1.0) <= 1e-8
    assert rep.min >= 0.0


def test_linear_profile_report():
    rep = validate_shape(Shape.from_expr("1 + s"))
    assert rep.passed
    assert rep.integral == pytest.approx(1.0, abs=1e-12)
    assert rep.min == pytest.approx(0.5)
    assert rep.max == pytest.approx(1.5)


def test_tent_expression_matches_preset():
    rep = validate_shape(Shape.from_expr("2 - 4*abs(s)"))
    assert rep.passed and rep.max == pytest.approx(2.0)


def test_unnormalised_shape_fails_validation():
    rep = validate_shape(Shape.from_expr("2"))
    assert not rep.passed
    with pytest.raises(ShapeError):
        ImpulseAtom(0.0, [1.0], (Shape.from_expr("2"),))


def test_nonfinite_profile_reports_location():
    with pytest.raises((ShapeError, ZeroDivisionError)):
        validate_shape(Shape.from_samples([1.0] * 15 + [math.inf]))
    with pytest.raises(ShapeError) as info:
        validate_shape(Shape.from_function(lambda s: math.nan if s > 0.3 else 1.0))
    assert info.value.s is not None and info.value.s > 0.3


def test_sampled_shape_trapezoid():
    sh = Shape.from_samples(np.ones(17))
    assert sh.integral == pytest.approx(1.0, abs=1e-15)
    assert sh.cumulative(0.0) == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(ShapeError):
        Shape.from_samples(np.ones(8))


def test_shape_expression_rejects_state():
    with pytest.raises(ShapeError):
        Shape.from_expr("t + s")


def test_unknown_preset():
    with pytest.raises(ShapeError, match="unknown shape preset"):
        Shape.preset("spike")


def test_cumulative_front():
    sh = Shape.preset("front")
    # integral of 1 - 2s from -1/2 to s is (s + 1/2) - (s^2 - 1/4)
    for s in (-0.5, -0.2, 0.0, 0.3, 0.5):
        assert sh.cumulative(s) == pytest.approx((s + 0.5) - (s * s - 0.25), abs=1e-12)


def test_adaptive_simpson():
    assert adaptive_simpson(math.sin, 0.0, math.pi) == pytest.approx(2.0, abs=1e-10)


def test_atom_invariants():
    with pytest.raises(ValueError):
        ImpulseAtom.with_shape(0.0, [0.0])
    with pytest.raises(ValueError):
        ImpulseAtom.with_shape(0.0, [math.nan])
    with pytest.raises(ValueError):
        ImpulseAtom(0.0, [1.0, 1.0], (Shape.preset("flat"),))
    atom = ImpulseAtom.with_shape(0.0, [2.0, 3.0], "tent")
    w = atom.weights(np.array([0.0, 0.5]))
    assert w.shape == (2, 2)
    assert w[0] == pytest.approx([4.0, 6.0])
    assert w[1] == pytest.approx([0.0, 0.0])


def test_control_requires_increasing_atoms():
    a, b = ImpulseAtom.with_shape(1.0, [1.0]), ImpulseAtom.with_shape(0.5, [1.0])
    with pytest.raises(ValueError):
        ImpulseControl(1, atoms=(a, b))
    with pytest.raises(ValueError):
        ImpulseControl(1, atoms=(a, a))


def test_control_integral_single_atom():
    ctl = ImpulseControl(1, atoms=(ImpulseAtom.with_shape(0.0, [0.5]),))
    ci = control_integral(ctl, -1.0, 1.0)
    assert np.asarray(ci) == pytest.approx([0.5])
    assert not ci.ambiguous


def test_control_integral_empty():
    assert control_integral(ImpulseControl.zero(1), 0.0, 1.0).value == pytest.approx([0.0])


def test_control_integral_density_and_atom():
    ctl = ImpulseControl(1, w=lambda t: [1.0], atoms=(ImpulseAtom.with_shape(1.0, [3.0]),))
    assert control_integral(ctl, 0.0, 2.0).value == pytest.approx([5.0], abs=1e-10)


def test_control_integral_endpoint_atom_flagged():
    ctl = ImpulseControl(1, atoms=(ImpulseAtom.with_shape(0.0, [0.5]),))
    with pytest.warns(BoundaryAtomWarning):
        ci = control_integral(ctl, 0.0, 1.0)
    assert ci.ambiguous
    assert ci.value == pytest.approx([0.0])


def test_admissible_half_delta():
    ctl = ImpulseControl(1, atoms=(ImpulseAtom.with_shape(0.0, [0.5], "tent"),))
    rep = check_admissible(ctl, 0.5, (0.0, 1.0))
    assert rep.admissible and bool(rep)
    assert rep.integral == pytest.approx([0.5])


def test_negative_atom_inadmissible():
    ctl = ImpulseControl(1, atoms=(ImpulseAtom.with_shape(0.5, [-1.0]),))
    rep = check_admissible(ctl, 10.0, (0.0, 1.0))
    assert not rep
    assert any(v.startswith("negative atom") for v in rep.violations)


def test_density_over_budget():
    ctl = ImpulseControl(1, w=lambda t: [1.0])
    rep = check_admissible(ctl, 0.5, (0.0, 1.0))
    assert rep.violations == ["budget exceeded component 1"]


def test_negative_density_and_shape():
    neg = Shape.from_expr("1 + 3*s")
    ctl = ImpulseControl(1, w=lambda t: [t - 0.5], atoms=(ImpulseAtom(0.2, [0.1], (neg,)),))
    rep = check_admissible(ctl, 10.0, (0.0, 1.0))
    kinds = {v.split(" at")[0] for v in rep.violations}
    assert kinds == {"negative density", "negative shape"}


def test_heaviside_product_flat():
    res = heaviside_delta_product(lambda s: s + 0.5, Shape.preset("flat"))
    assert res.coefficient == pytest.approx(0.5, abs=1e-12)
    assert res.defined and validate_shape(res.shape).passed


def test_heaviside_product_identity():
    res = heaviside_delta_product(lambda s: 1.0, Shape.preset("flat"))
    assert res.coefficient == pytest.approx(1.0)
    assert res.shape(np.array([0.3])) == pytest.approx([1.0])


def test_heaviside_product_tent():
    res = heaviside_delta_product(lambda s: s + 0.5, Shape.preset("tent"))
    # symmetric tent: int (s + 1/2)(2 - 4|s|) ds = 1/2
    assert res.coefficient == pytest.approx(0.5, abs=1e-10)
    assert abs(validate_shape(res.shape).integral - 1.0) <= 1e-8


def test_heaviside_product_undefined():
    res = heaviside_delta_product(lambda s: s, Shape.preset("flat"))
    assert not res.defined and res.shape is None


def test_heaviside_product_sampled():
    sh = Shape.from_samples(np.ones(33))
    res = heaviside_delta_product(lambda s: s + 0.5, sh)
    assert res.coefficient == pytest.approx(0.5, abs=1e-12)
    assert res.shape.is_sampled and validate_shape(res.shape).passed


def test_box_and_constraints():
    box = Box(0.0, 1.0, [-1.0], [1.0])
    assert box.contains(0.5, [0.0]) and not box.contains(1.5, [0.0])
    assert not box.contains_x([2.0]) and box.finite
    M = ConstraintSet.from_expressions(1, ["x1^2 - 1"], grads=[["2*x1"]])
    assert M.gradient(0, [0.5]) == pytest.approx([1.0])
    assert M.contains([0.9]) and not M.contains([1.1])
    fd = ConstraintSet.from_expressions(1, ["x1^2 - 1"])
    assert fd.gradients([0.5]) == pytest.approx(np.array([[1.0]]), abs=1e-8)


def test_system_check_lipschitz():
    sys_ = SystemSpec.from_expressions(1, ["sin(x1)"], [["2*x1"]], Box(0, 1, [-1.0], [1.0]),
                                       lipschitz_hint=(1.0, 2.0))
    rep = sys_.check()
    assert rep["consistent_with_hint"]
    assert rep["K_f"] <= 1.0 + 1e-9 and rep["K_g"] == pytest.approx(2.0)
    bad = SystemSpec.from_expressions(1, ["100*x1"], [["0"]], Box(0, 1, [-1.0], [1.0]),
                                      lipschitz_hint=(1.0, 1.0))
    assert not bad.check()["consistent_with_hint"]


def test_system_rejects_fast_time_in_f():
    with pytest.raises(Exception):
        SystemSpec.from_expressions(1, ["s"], [["1"]])


def test_fast_time_g():
    sys_ = SystemSpec.from_expressions(1, ["0"], [["s"]])
    assert sys_.g_uses_s
    assert sys_.G(0.0, [1.0], 0.25) == pytest.approx(np.array([[0.25]]))


def test_integral_additive_over_adjacent_windows():
    ctl = ImpulseControl(1, w=lambda t: [t * t],
                         atoms=(ImpulseAtom.with_shape(0.3, [1.0]), ImpulseAtom.with_shape(1.4, [2.0])))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        whole = control_integral(ctl, 0.0, 2.0).value
        parts = control_integral(ctl, 0.0, 1.0).value + control_integral(ctl, 1.0, 2.0).value
    assert whole == pytest.approx(parts, abs=1e-10)
