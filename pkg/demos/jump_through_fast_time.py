"""Walk through a single shaped impulse on x' = x * v.

The jump is resolved in fast time: the state travels along a curve gamma(s)
for s in [-1/2, 1/2] and lands on x0 * e regardless of the profile.  The
curve itself does depend on the profile, which is what this script prints.
"""
import math

import numpy as np

from distode import (ImpulseAtom, ImpulseControl, SystemSpec, delta_sequence_term,
                     regularized_solve, solve_ivp)

system = SystemSpec.from_expressions(1, ["0"], [["x1"]], lipschitz_hint=(0.0, 1.0))

print("shape   gamma(-1/4)  gamma(0)   gamma(1/4)  landing")
for name in ("flat", "tent", "front", "back"):
    ctl = ImpulseControl(1, atoms=(ImpulseAtom.with_shape(0.0, [1.0], name),))
    traj = solve_ivp(system, ctl, -0.5, [1.0], (-0.5, 0.5))
    curve = traj.jumps[0]
    mid = [float(np.interp(s, curve.s, curve.gamma[:, 0])) for s in (-0.25, 0.0, 0.25)]
    print(f"{name:<7} " + "  ".join(f"{v:10.6f}" for v in mid) + f"  {traj.x_end[0]:.10f}")
print(f"e = {math.e:.10f}")

# With drift the landing depends on how fast the mollified kick acts.
# Under x' = x - v the kick v = delta/2 at t = 0 gives x(t) = e^t / 2.
drift = SystemSpec.from_expressions(1, ["x1"], [["-1"]])
ctl = ImpulseControl(1, atoms=(ImpulseAtom.with_shape(0.0, [0.5], "tent"),))
exact = 0.5 * math.exp(0.5)
print("\nn      x_n(1/2) - e^(1/2)/2   support")
for n in (10, 40, 160, 640):
    lo, hi = delta_sequence_term(ctl.atoms[0], n, anchor="right").support
    x_n = regularized_solve(drift, ctl, n, 0.0, [1.0], (0.0, 1.0))(0.5)[0]
    print(f"{n:<6} {x_n - exact:+.3e}             ({lo:.5f}, {hi:.5f})")
