"""Lie brackets of the input-matrix columns and shape sensitivity of jumps.

When every bracket ``[g^m, g^l]`` vanishes, the post-jump state does not
depend on the shapes of the delta-functions; otherwise different shapes of
the same impulse can land in different places.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.stats import qmc

from .core import J, ImpulseAtom, Shape, SystemSpec
from .jumps import jump_endpoint

__all__ = ["column_jacobian", "lie_bracket", "FrobeniusReport", "frobenius_check",
           "shape_sensitivity"]


def column_jacobian(system: SystemSpec, m: int, t: float, x, h: float = 1e-6,
                    s: Optional[float] = None) -> np.ndarray:
    """Central-difference Jacobian of the ``m``-th column of ``g`` (0-based)."""
    x = np.asarray(x, dtype=float)
    jac = np.empty((system.n, system.n))
    for j in range(system.n):
        xp, xm = x.copy(), x.copy()
        xp[j] += h
        xm[j] -= h
        jac[:, j] = (system.g_column(m, t, xp, s) - system.g_column(m, t, xm, s)) / (2 * h)
    return jac


def lie_bracket(system: SystemSpec, m: int, l: int, t: float, x, h: float = 1e-6,
                s: Optional[float] = None) -> np.ndarray:
    """``[g^m, g^l](x) = Dg^l g^m - Dg^m g^l``."""
    if m == l:
        return np.zeros(system.n)
    x = np.asarray(x, dtype=float)
    gm = system.g_column(m, t, x, s)
    gl = system.g_column(l, t, x, s)
    return (column_jacobian(system, l, t, x, h, s) @ gm
            - column_jacobian(system, m, t, x, h, s) @ gl)


@dataclass
class FrobeniusReport:
    passed: bool
    tol: float
    max_norm: float
    argmax_point: Optional[dict]
    samples: int

    def to_dict(self) -> dict:
        return {"pass": self.passed, "tol": self.tol, "max_norm": self.max_norm,
                "argmax_point": self.argmax_point}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def frobenius_check(system: SystemSpec, N: int = 256, tol: float = 1e-5, box=None,
                    t_range=None, points=None, s_points: int = 9, h: float = 1e-6,
                    seed: int = 0) -> FrobeniusReport:
    """Sampled check that all column brackets vanish.

    Samples ``N`` Halton points in ``box = (x_lo, x_hi)`` (default: the
    system domain, which must then be finite) and ``t_range``; alternatively
    evaluate at explicit ``points`` (rows ``(t, x_1..x_n)``).  Fast-time
    dependent fields are also checked on ``s_points`` values of ``s``.
    """
    n = system.n
    if points is None:
        if N < 100:
            raise ValueError("frobenius_check needs at least 100 samples")
        lo, hi = box if box is not None else (system.domain.x_lo, system.domain.x_hi)
        lo, hi = np.asarray(lo, float), np.asarray(hi, float)
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("frobenius_check needs a finite sampling box")
        if t_range is None:
            t_range = (system.domain.t_lo, system.domain.t_hi)
            if not all(map(math.isfinite, t_range)):
                t_range = (0.0, 0.0)
        margin = 10 * h
        unit = qmc.Halton(d=n + 1, scramble=False, seed=seed).random(N + 1)[1:]
        ts = t_range[0] + unit[:, 0] * (t_range[1] - t_range[0])
        xs = (lo + margin) + unit[:, 1:] * ((hi - margin) - (lo + margin))
        points = np.column_stack([ts, xs])
    points = np.atleast_2d(np.asarray(points, dtype=float))
    s_values = list(np.linspace(J[0], J[1], s_points)) if system.g_uses_s else [None]
    worst, where = 0.0, None
    if n > 1:
        for row in points:
            t, x = row[0], row[1:]
            for s in s_values:
                for m, l in itertools.combinations(range(n), 2):
                    norm = float(np.max(np.abs(lie_bracket(system, m, l, t, x, h, s))))
                    if norm > worst or where is None:
                        worst = norm
                        where = {"t": float(t), "x": x.tolist(), "s": s, "columns": [m + 1, l + 1]}
    return FrobeniusReport(worst <= tol, tol, worst, where, len(points))


def _as_shapes(member, n):
    if isinstance(member, Shape):
        return (member,) * n
    if isinstance(member, str):
        return (Shape.preset(member),) * n
    shapes = tuple(Shape.preset(m) if isinstance(m, str) else m for m in member)
    if len(shapes) != n:
        raise ValueError(f"shape family member needs {n} component shapes")
    return shapes


def shape_sensitivity(system: SystemSpec, tau: float, x_minus, c, shapes: Sequence,
                      steps: int = 128) -> float:
    """Largest pairwise distance between post-jump states over a shape family.

    Each family member is a :class:`Shape` (shared by all components), a
    preset name, or a sequence of per-component shapes.
    """
    if len(shapes) < 2:
        raise ValueError("shape_sensitivity needs at least two shapes")
    c = np.atleast_1d(np.asarray(c, dtype=float))
    ends = [jump_endpoint(system, tau, x_minus, ImpulseAtom(tau, c, _as_shapes(m, system.n)), steps)
            for m in shapes]
    return max(float(np.max(np.abs(a - b))) for a, b in itertools.combinations(ends, 2))
