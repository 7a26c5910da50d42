"""Certify that impulses cannot push x' = -x + (1/2 - x) v out of [0, 1].

The certificate checks the slow field and every fast-time direction on
sampled boundary points.  A shape that goes negative breaks it, and the
counterexample says where.
"""
import numpy as np

from distode import (Box, ConstraintSet, ImpulseAtom, ImpulseControl, Shape, SystemSpec,
                     impulse_viability_check, sample_boundary, solve_ivp,
                     trajectory_viability_audit)

system = SystemSpec.from_expressions(1, ["-x1"], [["0.5 - x1"]], Box(-1.0, np.inf, [-1.0], [2.0]))
M = ConstraintSet.from_expressions(1, ["(x1 - 0.5)^2 - 0.25"])
boundary = sample_boundary(M, ([-0.5], [1.5]))
print(f"boundary sample: {sorted({round(float(v), 9) + 0.0 for v in boundary[:, 0]})}")

good = ImpulseControl(1, atoms=(ImpulseAtom.with_shape(0.5, [3.0], "tent"),
                                ImpulseAtom.with_shape(1.5, [8.0], "front")))
cert = impulse_viability_check(system, good, M, boundary, t_grid=np.linspace(0, 2, 5))
print(f"nonnegative shapes: certified={cert.certified}")

bent = Shape.from_expr("1 + 3*s")
bad = ImpulseControl(1, atoms=(ImpulseAtom(0.5, [3.0], (bent,)),))
cert = impulse_viability_check(system, bad, M, boundary)
print(f"shape 1 + 3s:      certified={cert.certified} witness={cert.counterexample}")

rng = np.random.default_rng(3)
for x0 in rng.uniform(0, 1, 3):
    traj = solve_ivp(system, good, 0.0, [x0], (0.0, 2.0))
    audit = trajectory_viability_audit(traj, M)
    print(f"x0={x0:.3f}: viable={audit.viable} x(2)={traj.x_end[0]:.6f}")
