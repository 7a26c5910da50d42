"""When input columns do not commute, the shape of an impulse is part of the control.

g has columns (1, 0) and (0, x1).  Their Lie bracket is (0, 1), so pushing
first along x1 and then along x2 differs from the reverse order.  A pair of
shapes that front-loads one channel and back-loads the other picks an order.
"""
import numpy as np

from distode import ImpulseAtom, Shape, SystemSpec, frobenius_check, jump_endpoint, shape_sensitivity

planar = SystemSpec.from_expressions(2, ["0", "0"], [["1", "0"], ["0", "x1"]])
scalar = SystemSpec.from_expressions(1, ["0"], [["1 + x1^2"]])

box = ([-2.0, -2.0], [2.0, 2.0])
rep = frobenius_check(planar, box=box)
print(f"planar bracket check: pass={rep.passed} max |[g1, g2]| = {rep.max_norm:.6f}")
print(f"scalar bracket check: pass={frobenius_check(scalar, box=([-2.0], [2.0])).passed}")

families = {
    "x1 first (front, back)": ("front", "back"),
    "x2 first (back, front)": ("back", "front"),
    "together (flat, flat)": ("flat", "flat"),
}
for label, pair in families.items():
    atom = ImpulseAtom(0.0, [1.0, 1.0], tuple(Shape.preset(s) for s in pair))
    end = jump_endpoint(planar, 0.0, [0.0, 0.0], atom)
    print(f"{label:<24} lands at {np.round(end, 6)}")

spread = shape_sensitivity(planar, 0.0, [0.0, 0.0], [1.0, 1.0], list(families.values()))
print(f"largest gap between landings: {spread:.6f}")
print(f"scalar system gap: {shape_sensitivity(scalar, 0.0, [0.3], [0.8], ['flat', 'front', 'back']):.2e}")
