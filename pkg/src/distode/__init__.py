"""Ordinary differential equations driven by shaped delta-function inputs.

The state of ``x' = f(t, x) + g(t, x) v`` jumps at every atom of ``v``; the
jump is resolved by a fast-time limit system whose solution depends on the
shape of the delta-function unless the input columns commute.
"""
from .core import (J, Box, ConstraintSet, DynamicTrajectory, FastCurve, ImpulseAtom,
                   ImpulseControl, PRESET_SHAPES, Shape, ShapeError, SystemSpec,
                   check_admissible, control_integral, heaviside_delta_product,
                   validate_shape)
from .expr import parse
from .jumps import jump_endpoint, solve_limit_system
from .solver import (contraction_solve, continuous_dependence_probe, representation_residual,
                     solve_ivp)
from .regularization import convergence_report, delta_sequence_term, regularized_solve
from .frobenius import frobenius_check, lie_bracket, shape_sensitivity
from .viability import (active_set, contingent_membership, impulse_viability_check,
                        nagumo_check, sample_boundary, stability_check,
                        trajectory_viability_audit)
from .avoidance import (min_budget_single_atom, search_multi_atom, search_regular_controls,
                        search_single_atom, viability_time)

__version__ = "0.1.0"
