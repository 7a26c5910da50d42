"""Viability and stability certificates for systems with impulses.

For ``M = {x : eta_i(x) <= 0}`` with independent active gradients, the
contingent cone at a boundary point is ``{y : (grad eta_i(x), y) <= 0}`` over
the active constraints.  Impulse viability is certified pointwise: the slow
field ``f + g w`` must point into the cone for all sampled times, and the
fast-time field ``g(tau_k, x)(s) <c_k, alpha_k(s)>`` must do so for every
atom and every sampled ``s``.

Certificates are sampling-based: a pass means no violation was found at the
sampled resolution, a failure carries an exact witness.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.stats import qmc

from .core import J, ConstraintSet, DynamicTrajectory, FastCurve, ImpulseControl, SystemSpec

__all__ = [
    "ActiveSet",
    "active_set",
    "ConeMembership",
    "contingent_membership",
    "sample_boundary",
    "EmptyBoundaryError",
    "EquilibriumError",
    "ViabilityCertificate",
    "nagumo_check",
    "impulse_viability_check",
    "stability_check",
    "sphere_points",
    "AuditResult",
    "trajectory_viability_audit",
]

SLACK = 1e-9


class EmptyBoundaryError(ValueError):
    pass


class EquilibriumError(ValueError):
    def __init__(self, message, residuals):
        self.residuals = residuals
        super().__init__(f"{message}: {residuals}")


@dataclass
class ActiveSet:
    indices: list
    sigma_min: float
    independent: bool
    note: str = ""


def active_set(M: ConstraintSet, x, eps: float = 1e-7) -> ActiveSet:
    """Indices of constraints with ``|eta_i(x)| <= eps`` plus a gradient-independence check."""
    vals = M.values(x)
    idx = [i for i, v in enumerate(vals) if abs(v) <= eps]
    if not idx:
        return ActiveSet([], math.inf, True)
    grads = np.array([M.gradient(i, x) for i in idx])
    sigma = float(np.linalg.svd(grads, compute_uv=False).min())
    if len(idx) > np.asarray(x).size:
        sigma = 0.0
    ok = sigma > 1e-8
    note = "" if ok else "active gradients are linearly dependent"
    return ActiveSet(idx, sigma, ok, note)


@dataclass(frozen=True)
class ConeMembership:
    inside: bool
    note: str = ""

    def __bool__(self):
        return self.inside


def contingent_membership(M: ConstraintSet, x, y, eps: float = 1e-7,
                          slack: float = SLACK) -> ConeMembership:
    """``y`` lies in the contingent cone of ``M`` at ``x`` (gradient formula).

    Truthiness carries the answer; with an empty active set it is True and
    ``note`` says so.
    """
    act = active_set(M, x, eps)
    if not act.indices:
        return ConeMembership(True, "interior direction test vacuous")
    y = np.asarray(y, dtype=float)
    return ConeMembership(all(float(M.gradient(i, x) @ y) <= slack for i in act.indices),
                          act.note)


def sample_boundary(M: ConstraintSet, box, count: Optional[int] = None, seed: int = 0,
                    newton_steps: int = 40, eps: float = 1e-7) -> np.ndarray:
    """Points of ``dM`` from quasi-random seeds projected by damped Newton steps.

    Each seed is pushed onto the constraint closest to zero; points that end
    up outside ``M`` or off the boundary are discarded, duplicates removed.
    """
    lo, hi = (np.asarray(b, dtype=float) for b in box)
    n = lo.size
    if count is None:
        count = 256 if n <= 2 else 1024
    unit = qmc.Halton(d=n, scramble=False, seed=seed).random(count + 1)[1:]
    seeds = lo + unit * (hi - lo)
    out = []
    for x in seeds:
        vals = M.values(x)
        i = int(np.argmin(np.abs(vals)))
        for _ in range(newton_steps):
            v = M.etas[i](x)
            if abs(v) <= 1e-12:
                break
            g = M.gradient(i, x)
            gg = float(g @ g)
            if gg < 1e-14:
                break
            step, lam = v / gg * g, 1.0
            while lam > 1e-4 and abs(M.etas[i](x - lam * step)) >= abs(v):
                lam *= 0.5
            x = x - lam * step
        vals = M.values(x)
        if abs(vals[i]) <= eps and vals.max() <= eps:
            out.append(x)
    if not out:
        raise EmptyBoundaryError("empty boundary sample")
    return np.unique(np.round(np.array(out), 12), axis=0)


@dataclass
class ViabilityCertificate:
    mode: str
    points: list
    active_sets: list
    worst: list                      # per boundary point, max inner product found
    passed: bool
    hypothesis_ok: bool = True
    counterexample: Optional[dict] = None
    slack: float = SLACK
    metadata: dict = field(default_factory=dict)

    @property
    def certified(self) -> bool:
        return self.passed and self.hypothesis_ok

    def to_dict(self) -> dict:
        d = asdict(self)
        d["certified"] = self.certified
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), default=_json_default, **kw)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(type(o))


class _Tally:
    """Running worst inner product and first witness per certificate."""

    def __init__(self, points, slack):
        self.worst = [-math.inf] * len(points)
        self.slack = slack
        self.witness = None
        self.witness_value = -math.inf

    def add(self, k, value, witness):
        if value > self.worst[k]:
            self.worst[k] = value
        if value > self.slack and value > self.witness_value:
            self.witness_value = value
            self.witness = dict(witness, value=value)


def _finish(mode, points, active, independent, tally, metadata):
    worst = [w if w != -math.inf else None for w in tally.worst]
    passed = all(w is None or w <= tally.slack for w in worst)
    return ViabilityCertificate(
        mode, [np.asarray(p).tolist() for p in points], active, worst, passed,
        independent, tally.witness, tally.slack, metadata)


def _field(fn):
    # accept a SystemSpec (its f) or a bare callable f(t, x)
    return fn.F if isinstance(fn, SystemSpec) else fn


def nagumo_check(system, M: ConstraintSet, boundary, t_grid: Sequence[float] = (0.0,),
                 eps: float = 1e-7, slack: float = SLACK) -> ViabilityCertificate:
    """Tangency of an ordinary field to ``M`` at sampled boundary points and times."""
    f = _field(system)
    points = np.atleast_2d(np.asarray(boundary, dtype=float))
    if points.size == 0:
        raise EmptyBoundaryError("empty boundary sample")
    acts = [active_set(M, x, eps) for x in points]
    tally = _Tally(points, slack)
    for k, (x, act) in enumerate(zip(points, acts)):
        for t in t_grid:
            fx = np.asarray(f(t, x), dtype=float)
            for i in act.indices:
                tally.add(k, float(M.gradient(i, x) @ fx),
                          {"x": x.tolist(), "i": i + 1, "t": float(t)})
    return _finish("nagumo", points, [a.indices for a in acts],
                   all(a.independent for a in acts), tally,
                   {"boundary_points": len(points), "t_grid": len(t_grid)})


def impulse_viability_check(system: SystemSpec, control: ImpulseControl, M: ConstraintSet,
                            boundary, t_grid: Sequence[float] = (0.0,), s_points: int = 65,
                            eps: float = 1e-7, slack: float = SLACK) -> ViabilityCertificate:
    """Pointwise impulse viability conditions on sampled boundary points.

    Slow condition on ``(t, x)``: ``(grad eta_i, f + g w) <= 0``; fast
    condition on ``(k, s, x)``: ``(grad eta_i, g(tau_k, x)(s) <c_k, alpha_k(s)>) <= 0``.
    """
    points = np.atleast_2d(np.asarray(boundary, dtype=float))
    if points.size == 0:
        raise EmptyBoundaryError("empty boundary sample")
    acts = [active_set(M, x, eps) for x in points]
    tally = _Tally(points, slack)
    s_grid = np.linspace(J[0], J[1], s_points)
    weights = [atom.weights(s_grid) for atom in control.atoms]
    for k, (x, act) in enumerate(zip(points, acts)):
        if not act.indices:
            continue
        grads = {i: M.gradient(i, x) for i in act.indices}
        for t in t_grid:
            v = system.F(t, x)
            if control.w is not None:
                v = v + system.G(t, x) @ control.density(t)
            for i, gi in grads.items():
                tally.add(k, float(gi @ v), {"x": x.tolist(), "i": i + 1, "t": float(t)})
        for atom, wts in zip(control.atoms, weights):
            for s, wk in zip(s_grid, wts):
                direction = system.G(atom.tau, x, s) @ wk
                for i, gi in grads.items():
                    tally.add(k, float(gi @ direction),
                              {"x": x.tolist(), "i": i + 1, "tau": atom.tau, "s": float(s)})
    return _finish("impulse", points, [a.indices for a in acts],
                   all(a.independent for a in acts), tally,
                   {"boundary_points": len(points), "t_grid": len(t_grid),
                    "s_points": s_points, "atoms": len(control.atoms)})


def sphere_points(center, radius: float, count: int = 64, seed: int = 0) -> np.ndarray:
    """Points on the Euclidean sphere: endpoints (n=1), a circle (n=2), Halton directions otherwise."""
    center = np.asarray(center, dtype=float)
    n = center.size
    if n == 1:
        return np.array([center - radius, center + radius])
    if n == 2:
        th = 2 * np.pi * np.arange(count) / count
        return center + radius * np.column_stack([np.cos(th), np.sin(th)])
    gauss = qmc.MultivariateNormalQMC(np.zeros(n), seed=seed).random(count)
    return center + radius * gauss / np.linalg.norm(gauss, axis=1, keepdims=True)


def stability_check(system: SystemSpec, x_star, control: ImpulseControl,
                    l_list: Sequence[int], t_grid: Sequence[float] = (0.0,),
                    s_points: int = 65, sphere_count: int = 64,
                    slack: float = SLACK) -> list:
    """Sphere conditions for uniform stability of an equilibrium, one certificate per ``l``.

    On ``|x - x*|_2 = 1/l`` checks ``(x - x*, f + g w) <= 0`` over ``t_grid`` and
    ``(x - x*, g(x)(s) <c_k, alpha_k(s)>) <= 0`` for every atom and sampled ``s``.
    """
    x_star = np.asarray(x_star, dtype=float).reshape(system.n)
    s_grid = np.linspace(J[0], J[1], s_points)
    t_ref = t_grid[0]
    f_res = float(np.max(np.abs(system.F(t_ref, x_star))))
    g_vals = [system.G(t_ref, x_star, s) for s in (s_grid if system.g_uses_s else [None])]
    g_res = float(max(np.max(np.abs(gv)) for gv in g_vals))
    if f_res > 1e-9 or g_res > 1e-9:
        raise EquilibriumError("x_star is not an equilibrium", {"f": f_res, "g": g_res})
    weights = [atom.weights(s_grid) for atom in control.atoms]
    certs = []
    for l in l_list:
        points = sphere_points(x_star, 1.0 / l, sphere_count)
        tally = _Tally(points, slack)
        for k, x in enumerate(points):
            d = x - x_star
            for t in t_grid:
                v = system.F(t, x)
                if control.w is not None:
                    v = v + system.G(t, x) @ control.density(t)
                tally.add(k, float(d @ v), {"x": x.tolist(), "t": float(t)})
            for atom, wts in zip(control.atoms, weights):
                for s, wk in zip(s_grid, wts):
                    tally.add(k, float(d @ (system.G(atom.tau, x, s) @ wk)),
                              {"x": x.tolist(), "tau": atom.tau, "s": float(s)})
        cert = _finish("stability", points, [[] for _ in points], True, tally,
                       {"l": int(l), "radius": 1.0 / l, "sphere_points": len(points),
                        "s_points": s_points})
        certs.append(cert)
    return certs


@dataclass
class AuditResult:
    viable: bool
    exit: Optional[dict] = None
    checked: int = 0


def trajectory_viability_audit(traj: DynamicTrajectory, M: ConstraintSet,
                               tol: float = 1e-6) -> AuditResult:
    """Check ``eta_i <= tol`` at every slow sample and every fast-curve sample.

    Returns the first violation in time order; a violation inside a jump is
    reported as ``{"kind": "fast", "tau", "s"}``, otherwise ``{"kind": "slow", "t"}``.
    """
    checked = 0
    for item in traj.events():
        if isinstance(item, FastCurve):
            for s, x in zip(item.s, item.gamma):
                checked += 1
                if M.values(x).max() > tol:
                    return AuditResult(False, {"kind": "fast", "tau": item.tau,
                                               "s": float(s), "x": x.tolist()}, checked)
            continue
        for t, x in zip(item.t, item.x):
            checked += 1
            if M.values(x).max() > tol:
                return AuditResult(False, {"kind": "slow", "t": float(t), "x": x.tolist()},
                                   checked)
    partial = getattr(traj, "partial_jump", None)
    if partial is not None:
        for s, x in zip(partial.s, partial.gamma):
            checked += 1
            if M.values(x).max() > tol:
                return AuditResult(False, {"kind": "fast", "tau": partial.tau,
                                           "s": float(s), "x": x.tolist()}, checked)
    return AuditResult(True, None, checked)
