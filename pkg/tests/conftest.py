import math

import numpy as np
import pytest

from distode import Box, ConstraintSet, ImpulseAtom, ImpulseControl, SystemSpec

LN2 = math.log(2.0)
E = math.e


@pytest.fixture
def exp_jump():
    """x' = x v on (-1, 1): a unit atom multiplies the state by e."""
    return SystemSpec.from_expressions(1, ["0"], [["x1"]], Box(-1.0, 1.0, [-np.inf], [np.inf]),
                                       lipschitz_hint=(0.0, 1.0))


@pytest.fixture
def avoid_sys():
    """x' = x - v with M = [-1, 1]."""
    return SystemSpec.from_expressions(1, ["x1"], [["-1"]], lipschitz_hint=(1.0, 0.0))


@pytest.fixture
def unit_interval():
    return ConstraintSet.from_expressions(1, ["x1^2 - 1"])


@pytest.fixture
def viab_sys():
    """x' = -x + (1/2 - x) v on the domain x in (-1, 2)."""
    return SystemSpec.from_expressions(1, ["-x1"], [["0.5 - x1"]],
                                       Box(-1.0, np.inf, [-1.0], [2.0]),
                                       lipschitz_hint=(1.0, 1.0))


@pytest.fixture
def zero_one():
    return ConstraintSet.from_expressions(1, ["(x1 - 0.5)^2 - 0.25"])


@pytest.fixture
def twisted():
    """Input columns (1, 0) and (0, x1): their bracket is (0, 1)."""
    return SystemSpec.from_expressions(2, ["0", "0"], [["1", "0"], ["0", "x1"]],
                                       lipschitz_hint=(0.0, 1.0))


def one_atom(tau, c, shape="flat", n=1):
    return ImpulseControl(n, atoms=(ImpulseAtom.with_shape(tau, np.full(n, c) if np.ndim(c) == 0
                                                           else c, shape),))
