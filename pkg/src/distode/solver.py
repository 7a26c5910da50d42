"""Initial value problems with impulse controls.

The ordinary solution is integrated piecewise: between atoms it solves
``x' = f(t, x) + g(t, x) w(t)`` with an embedded Runge-Kutta 4(5) pair, and
at each atom the state is carried across by the fast-time limit system.
A Picard iteration over the integral form of the problem is provided as an
independent cross-check (:func:`contraction_solve`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.polynomial import chebyshev as cheb
import scipy.integrate

from .core import (DynamicTrajectory, ExitRecord, FastCurve, ImpulseControl, Segment,
                   SystemSpec, adaptive_simpson)
from .jumps import JumpEscapeError, jump_endpoint

__all__ = [
    "SolverError",
    "NoContractionWindowError",
    "solve_ivp",
    "integrate_segment",
    "representation_residual",
    "ContractionResult",
    "contraction_solve",
    "DependenceReport",
    "continuous_dependence_probe",
]


class SolverError(RuntimeError):
    pass


class NoContractionWindowError(SolverError):
    pass


def _box_events(box, n):
    events = []
    for i in range(n):
        if math.isfinite(box.x_lo[i]):
            ev = (lambda t, x, i=i: x[i] - box.x_lo[i])
            ev.terminal, ev.direction = True, -1
            events.append(ev)
        if math.isfinite(box.x_hi[i]):
            ev = (lambda t, x, i=i: box.x_hi[i] - x[i])
            ev.terminal, ev.direction = True, -1
            events.append(ev)
    return events


def integrate_segment(rhs, ta: float, tb: float, xa, tol: float, box, t_eval=None,
                      first_step=None, max_step=np.inf):
    """Integrate one continuous stretch; returns ``(Segment, ExitRecord or None)``."""
    xa = np.asarray(xa, dtype=float)
    if tb <= ta:
        return Segment(np.array([ta]), xa[None, :].copy()), None
    kwargs = {}
    if first_step is not None:
        kwargs["first_step"] = min(first_step, tb - ta)
    sol = scipy.integrate.solve_ivp(
        rhs, (ta, tb), xa, method="RK45", rtol=tol, atol=tol, dense_output=True,
        events=_box_events(box, xa.size) or None, max_step=max_step, **kwargs)
    if sol.status == -1:
        t_fail = float(sol.t[-1]) if sol.t.size else ta
        raise SolverError(f"integrator failed at t={t_fail:.10g}: {sol.message}")
    ts, xs = sol.t, sol.y.T
    if t_eval is not None:
        extra = np.asarray([t for t in t_eval if ts[0] < t < ts[-1]], dtype=float)
        if extra.size:
            t_all = np.concatenate([ts, extra])
            order = np.argsort(t_all, kind="stable")
            x_extra = sol.sol(extra).T
            ts = t_all[order]
            xs = np.concatenate([xs, x_extra])[order]
            keep = np.concatenate([[True], np.diff(ts) > 0])
            ts, xs = ts[keep], xs[keep]
    seg = Segment(ts, xs, sol.sol)
    exit_rec = None
    if sol.status == 1:
        exit_rec = ExitRecord("slow", float(ts[-1]), xs[-1].copy(), reason="left domain")
    return seg, exit_rec


def _slow_rhs(system: SystemSpec, control: ImpulseControl):
    if control.w is None:
        return lambda t, x: system.F(t, x)
    return lambda t, x: system.F(t, x) + system.G(t, x) @ control.density(t)


def solve_ivp(system: SystemSpec, control: ImpulseControl, t0: float, x0, horizon,
              tol: float = 1e-8, steps: int = 128, t_eval=None, first_step=None,
              max_step: float = np.inf, jump_tol: float = 1e-8) -> DynamicTrajectory:
    """Solve ``x' = f + g v`` with ``x(t0-) = x0`` on ``horizon = (t0, T)``.

    Atoms in ``[t0, T)`` fire in order (an atom at ``t0`` fires before any
    slow motion).  A domain exit ends the computation early; the partial
    trajectory carries an :class:`ExitRecord`.
    """
    T = horizon[1] if isinstance(horizon, (tuple, list)) else float(horizon)
    if T <= t0:
        raise ValueError(f"horizon end {T} must exceed t0={t0}")
    x = np.asarray(x0, dtype=float).reshape(system.n)
    if not system.domain.contains(t0, x):
        raise ValueError(f"initial state {x.tolist()} at t0={t0} outside the domain")
    if not (system.domain.t_lo <= t0 and T <= system.domain.t_hi):
        raise ValueError(f"horizon ({t0}, {T}) leaves the domain time range")
    rhs = _slow_rhs(system, control)
    atoms = {a.tau: a for a in control.atoms if t0 <= a.tau < T}
    knots = sorted({t0, T, *atoms, *(b for b in control.breakpoints if t0 < b < T)})
    traj = DynamicTrajectory(system.n, float(t0), x.copy(), horizon=(float(t0), float(T)))
    for a, b in zip(knots, knots[1:]):
        atom = atoms.get(a)
        if atom is not None:
            try:
                _, curve = jump_endpoint(system, a, x, atom, steps, jump_tol, return_curve=True)
            except JumpEscapeError as exc:
                traj.exit = ExitRecord("fast", a, exc.x, s=exc.s, reason="jump escapes domain")
                traj.partial_jump = exc.curve
                return traj
            if traj.segments and traj.segments[-1].t_end == a:
                traj.segments[-1].ends_at_atom = True
            traj.jumps.append(curve)
            x = curve.x_plus.copy()
        seg, exit_rec = integrate_segment(rhs, a, b, x, tol, system.domain, t_eval,
                                          first_step, max_step)
        seg.starts_at_atom = atom is not None
        traj.segments.append(seg)
        if exit_rec is not None:
            traj.exit = exit_rec
            return traj
        x = seg.x[-1].copy()
    return traj


# integral-equation audit ----------------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


def _segment_integral(F, seg: Segment, a: float, b: float) -> np.ndarray:
    half, mid = 0.5 * (b - a), 0.5 * (a + b)
    total = 0.0
    for u, wgt in zip(_GL_NODES, _GL_WEIGHTS):
        r = mid + half * u
        total = total + wgt * F(r, seg(r))
    return half * total


def representation_residual(traj: DynamicTrajectory, system: SystemSpec,
                            control: ImpulseControl) -> np.ndarray:
    """Defect of the integral representation at every trajectory sample.

    Returns ``|x(t) - x0 - int (f + g w) - sum of jumps before t|`` (max-norm)
    for each row of :meth:`DynamicTrajectory.rows`.
    """
    F = _slow_rhs(system, control)
    acc = np.asarray(traj.x0, dtype=float).copy()
    out = []
    for item in traj.events():
        if isinstance(item, FastCurve):
            out.append(np.max(np.abs(item.x_minus - acc)))
            acc = acc + (item.x_plus - item.x_minus)
            out.append(np.max(np.abs(item.x_plus - acc)))
            continue
        seg = item
        out.append(np.max(np.abs(seg.x[0] - acc)))
        for k in range(len(seg.t) - 1):
            acc = acc + _segment_integral(F, seg, seg.t[k], seg.t[k + 1])
            out.append(np.max(np.abs(seg.x[k + 1] - acc)))
    return np.asarray(out)


# Picard iteration --------------------------------------------------------------------

def _cheb_tools(nodes: int):
    u = cheb.chebpts2(nodes)
    V = cheb.chebvander(u, nodes - 1)
    Vinv = np.linalg.inv(V)
    Q = np.empty((nodes, nodes))
    for j in range(nodes):
        Q[:, j] = cheb.chebval(u, cheb.chebint(Vinv[:, j], lbnd=-1))
    return u, Vinv, Q


@dataclass
class ContractionResult:
    """Fixed point of the integral operator on ``[t0, t0 + h)``."""

    h: float
    lam: float
    iterations: int
    knots: list
    nodes: list                  # per-segment time nodes
    values: list                 # per-segment state values at the nodes
    jumps: list
    diffs: list = field(default_factory=list)
    _vinv: Optional[np.ndarray] = None

    @property
    def observed_ratio(self) -> float:
        ratios = [b / a for a, b in zip(self.diffs, self.diffs[1:]) if a > 1e-12]
        return max(ratios) if ratios else 0.0

    def __call__(self, t: float, side: str = "+") -> np.ndarray:
        for k, (a, b) in enumerate(zip(self.knots, self.knots[1:])):
            inside = a <= t < b if side == "+" else a < t <= b
            if inside or (k == len(self.knots) - 2 and t == b):
                u = (2.0 * t - a - b) / (b - a)
                coef = self._vinv @ self.values[k]
                return cheb.chebval(u, coef)
        raise ValueError(f"t={t} outside the contraction window")


def _variation_density(control, a, b) -> float:
    if control.w is None or b <= a:
        return 0.0
    knots = [a] + [p for p in control.breakpoints if a < p < b] + [b]
    dens = lambda t: float(np.max(np.abs(control.density(t))))
    return sum(adaptive_simpson(dens, lo, hi, 1e-12) for lo, hi in zip(knots, knots[1:]))


def contraction_solve(system: SystemSpec, control: ImpulseControl, t0: float, x0,
                      N_bound: float, h_max: float = 1.0, nodes: int = 32, steps: int = 128,
                      tol: float = 1e-10, max_iter: int = 200) -> ContractionResult:
    """Solve the integral form on ``[t0, t0 + h)`` by Picard iteration.

    The window ``h`` is halved from ``h_max`` until the contraction constant
    ``lam = K_f h + K_g var(w) h + K_g var(w)^2`` drops below one and the
    iterates stay within ``N_bound`` of ``x0``.  Atoms are handled inside
    each pass by re-solving the limit system from the current iterate's
    left limit; their contribution is triangular in time and does not enter
    ``lam``.
    """
    if system.lipschitz_hint is None:
        raise ValueError("contraction_solve needs lipschitz_hint=(K_f, K_g)")
    Kf, Kg = system.lipschitz_hint
    x0 = np.asarray(x0, dtype=float).reshape(system.n)
    u, Vinv, Q = _cheb_tools(nodes)
    box = system.domain
    h = float(h_max)
    while h > 1e-9:
        var = _variation_density(control, t0, t0 + h)
        lam = Kf * h + Kg * var * h + Kg * var * var
        room = (box.contains_x(x0 - N_bound) and box.contains_x(x0 + N_bound)
                and box.t_lo <= t0 and t0 + h <= box.t_hi)
        if lam < 1 and room:
            res = _picard(system, control, t0, x0, h, u, Vinv, Q, steps, tol, max_iter)
            if res is not None:
                drift = max(np.max(np.abs(v - x0)) for v in res.values)
                drift = max([drift] + [np.max(np.abs(j.gamma - x0)) for j in res.jumps])
                if drift <= N_bound:
                    res.lam = lam
                    return res
        h *= 0.5
    raise NoContractionWindowError(f"no contraction window around t0={t0} within margin {N_bound}")


def _picard(system, control, t0, x0, h, u, Vinv, Q, steps, tol, max_iter):
    T = t0 + h
    atoms = {a.tau: a for a in control.atoms if t0 <= a.tau < T}
    knots = sorted({t0, T, *atoms})
    times = [0.5 * (a + b) + 0.5 * (b - a) * u for a, b in zip(knots, knots[1:])]
    F = _slow_rhs(system, control)
    X = [np.tile(x0, (u.size, 1)) for _ in times]
    diffs = []
    first_jump = None
    if t0 in atoms:
        first_jump = jump_endpoint(system, t0, x0, atoms[t0], steps, return_curve=True)[1]
    for it in range(1, max_iter + 1):
        newX, jumps = [], []
        start = x0 if first_jump is None else first_jump.x_plus
        if first_jump is not None:
            jumps.append(first_jump)
        for k, (a, b) in enumerate(zip(knots, knots[1:])):
            vals = np.array([F(t, x) for t, x in zip(times[k], X[k])])
            seg = start + 0.5 * (b - a) * (Q @ vals)
            newX.append(seg)
            if b in atoms:
                left = X[k][-1]
                curve = jump_endpoint(system, b, left, atoms[b], steps, return_curve=True)[1]
                jumps.append(curve)
                start = seg[-1] + (curve.x_plus - left)
        d = max(np.max(np.abs(n_ - o_)) for n_, o_ in zip(newX, X))
        diffs.append(float(d))
        X = newX
        if not np.all([np.all(np.isfinite(v)) for v in X]):
            return None
        if d < tol:
            return ContractionResult(h, float("nan"), it, knots, times, X, jumps, diffs, Vinv)
    return None


# continuous dependence ------------------------------------------------------------------

@dataclass
class DependenceReport:
    slow: float
    fast: float

    @property
    def total(self) -> float:
        return max(self.slow, self.fast)


def continuous_dependence_probe(system: SystemSpec, control: ImpulseControl,
                                perturbed: ImpulseControl, t0: float, x0, horizon,
                                tol: float = 1e-10, samples: int = 201,
                                steps: int = 128) -> DependenceReport:
    """Sup-norm distance between the solutions driven by two controls.

    Atom times must coincide; magnitudes and shapes may differ.  Slow
    distances include left and right limits at every atom; fast distances
    compare the transit curves on a common ``s`` grid.
    """
    taus = [a.tau for a in control.atoms]
    if taus != [a.tau for a in perturbed.atoms]:
        raise ValueError("controls must share atom times")
    T = horizon[1]
    a = solve_ivp(system, control, t0, x0, horizon, tol=tol, steps=steps)
    b = solve_ivp(system, perturbed, t0, x0, horizon, tol=tol, steps=steps)
    if a.exit is not None or b.exit is not None:
        raise SolverError("a probed solution left the domain")
    grid = [t for t in np.linspace(t0, T, samples) if t not in taus]
    slow = max(float(np.max(np.abs(a(t) - b(t)))) for t in grid)
    fast = 0.0
    for ja, jb in zip(a.jumps, b.jumps):
        slow = max(slow, float(np.max(np.abs(ja.x_minus - jb.x_minus))),
                   float(np.max(np.abs(ja.x_plus - jb.x_plus))))
        s = np.union1d(ja.s, jb.s)
        ga = np.column_stack([np.interp(s, ja.s, ja.gamma[:, i]) for i in range(system.n)])
        gb = np.column_stack([np.interp(s, jb.s, jb.gamma[:, i]) for i in range(system.n)])
        fast = max(fast, float(np.max(np.abs(ga - gb))))
    return DependenceReport(slow, fast)
