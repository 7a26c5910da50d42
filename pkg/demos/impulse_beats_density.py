"""Stay in [-1, 1] as long as possible under x' = x - v with a budget of 1/2.

An immediate kick of size 1/2 buys ln 2 time units.  Spreading the same
mass as a piecewise-constant density always does worse, because the state
drifts out of the interval before the density has acted.
"""
import math

import numpy as np

from distode import (ConstraintSet, SystemSpec, search_regular_controls, search_single_atom)

system = SystemSpec.from_expressions(1, ["x1"], [["-1"]], lipschitz_hint=(1.0, 0.0))
M = ConstraintSet.from_expressions(1, ["x1^2 - 1"])

taus = np.round(np.linspace(0.0, 0.5, 6), 12)
cs = np.round(np.linspace(0.1, 0.5, 5), 12)
impulse = search_single_atom(system, 0.0, [1.0], M, 0.5, taus, cs)
print(f"best impulse: tau={impulse.best.tau} c={impulse.best.c[0]} T={impulse.best.T:.6f}"
      f" (ln 2 = {math.log(2):.6f})")
print("x0 = 1 sits on the boundary and drifts out, so a kick after t = 0 comes too late:")
for cand in impulse.table:
    if cand.taus and abs(cand.c[0] - 0.5) < 1e-12:
        print(f"  tau={cand.tau:.1f}: T={cand.T:.6f}")

regular = search_regular_controls(system, 0.0, [1.0], M, 0.5, k=4, levels=8)
masses = ", ".join(f"{m:.4f}" for m in regular.best.masses)
print(f"best 4-bin density: masses [{masses}] T={regular.best.T:.6f}")
print(f"impulse advantage: {impulse.best.T - regular.best.T:.6f}")
