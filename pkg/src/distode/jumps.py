"""Fast-time limit system at an atom.

At an atom ``(tau, c, alpha)`` the state transits along

    gamma'(s) = g(tau, gamma(s))(s) <c, alpha(s)>,   gamma(-1/2) = x(tau-),

for ``s`` in ``J``; the post-jump state is ``gamma(1/2)``.
"""
from __future__ import annotations

import math

import numpy as np

from .core import J, FastCurve, ImpulseAtom, SystemSpec

__all__ = ["JumpError", "JumpEscapeError", "JumpNotConvergedError",
           "solve_limit_system", "jump_endpoint"]


class JumpError(RuntimeError):
    pass


class JumpEscapeError(JumpError):
    """The fast curve left the domain box."""

    def __init__(self, tau, s, x, curve=None):
        self.tau, self.s, self.x, self.curve = tau, s, np.asarray(x), curve
        super().__init__(f"jump escapes domain at tau={tau:g}, s={s:.6g}, x={self.x.tolist()}")


class JumpNotConvergedError(JumpError):
    pass


def _aligned_steps(atom: ImpulseAtom, steps: int) -> int:
    # sampled shapes are piecewise linear: put every shape node on the RK grid
    for sh in atom.shapes:
        if sh.is_sampled:
            cells = sh.samples.size - 1
            steps = cells * math.ceil(steps / cells)
    if steps % 2:
        steps += 1  # keep s = 0 (kink of the tent preset) on the grid
    return steps


def solve_limit_system(system: SystemSpec, tau: float, x_minus, atom: ImpulseAtom,
                       steps: int = 128) -> FastCurve:
    """Classical RK4 on a uniform ``s``-grid over ``J``; every node is returned."""
    if steps < 64:
        raise ValueError("limit system needs at least 64 steps")
    x_minus = np.asarray(x_minus, dtype=float).reshape(system.n)
    steps = _aligned_steps(atom, steps)
    s = np.linspace(J[0], J[1], steps + 1)
    h = s[1] - s[0]
    mids = s[:-1] + 0.5 * h
    w_nodes = atom.weights(s)
    w_mids = atom.weights(mids)
    box = system.domain
    if not np.all(np.isfinite(w_nodes)) or not np.all(np.isfinite(w_mids)):
        raise JumpError(f"non-finite shape value in atom at tau={tau:g}")

    def rhs(sk, y, wk):
        dy = system.G(tau, y, sk) @ wk
        if not np.all(np.isfinite(dy)):
            raise JumpError(f"non-finite limit-system field at tau={tau:g}, s={sk:.6g}")
        return dy

    gamma = np.empty((steps + 1, system.n))
    gamma[0] = x_minus
    y = x_minus.copy()
    for k in range(steps):
        sk, wm = s[k], w_mids[k]
        k1 = rhs(sk, y, w_nodes[k])
        k2 = rhs(sk + 0.5 * h, y + 0.5 * h * k1, wm)
        k3 = rhs(sk + 0.5 * h, y + 0.5 * h * k2, wm)
        k4 = rhs(s[k + 1], y + h * k3, w_nodes[k + 1])
        y = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        gamma[k + 1] = y
        if not box.contains_x(y):
            partial = FastCurve(tau, s[:k + 2].copy(), gamma[:k + 2].copy())
            raise JumpEscapeError(tau, float(s[k + 1]), y, partial)
    gamma[0] = x_minus
    return FastCurve(float(tau), s, gamma)


def jump_endpoint(system: SystemSpec, tau: float, x_minus, atom: ImpulseAtom,
                  steps: int = 128, tol: float = 1e-8, return_curve: bool = False):
    """Post-jump state ``gamma(1/2)`` with a step-doubling convergence check.

    The refined (doubled-step) solution is returned; if it differs from the
    coarse one by ``tol`` or more in max-norm, :class:`JumpNotConvergedError`
    is raised.
    """
    coarse = solve_limit_system(system, tau, x_minus, atom, steps)
    fine = solve_limit_system(system, tau, x_minus, atom, 2 * (coarse.s.size - 1))
    diff = float(np.max(np.abs(fine.x_plus - coarse.x_plus)))
    if not diff < tol:
        raise JumpNotConvergedError(
            f"jump at tau={tau:g} not converged: doubling steps changed the endpoint by {diff:.3g}")
    if return_curve:
        return fine.x_plus.copy(), fine
    return fine.x_plus.copy()
