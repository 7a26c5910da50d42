"""Avoidance of encounters: first exit time from ``M`` and grid searches over controls.

The viability time of a trajectory is the first instant at which it leaves
``M``; a transit that leaves ``M`` in fast time counts as an exit at the atom
time.  Searches evaluate it over finite grids of admissible controls and
reduce deterministically (larger ``T``, then smaller ``tau``, then smaller
``|c|``).
"""
from __future__ import annotations

import bisect
import csv
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .core import (ConstraintSet, DynamicTrajectory, FastCurve, ImpulseAtom, ImpulseControl,
                   Shape, SystemSpec, check_admissible)
from .solver import solve_ivp

__all__ = [
    "ViabilityTime",
    "viability_time",
    "Candidate",
    "SearchResult",
    "search_single_atom",
    "search_multi_atom",
    "RegularCandidate",
    "RegularSearchResult",
    "search_regular_controls",
    "MinBudgetResult",
    "min_budget_single_atom",
]

SURVIVED = "survived to T_max"


@dataclass
class ViabilityTime:
    T: float
    exit: object                     # dict with the exit location, or SURVIVED
    trajectory: Optional[DynamicTrajectory] = field(default=None, repr=False)

    @property
    def survived(self) -> bool:
        return self.exit == SURVIVED


def _first_slow_exit(seg, M: ConstraintSet, eta_tol: float, tol: float, refine: int = 8):
    def excess(t):
        return float(M.values(seg(t)).max()) - eta_tol

    ts = seg.t
    prev = ts[0]
    if excess(prev) > 0:
        return float(prev)
    for a, b in zip(ts, ts[1:]):
        for t in np.linspace(a, b, refine + 1)[1:]:
            if excess(t) > 0:
                lo, hi = prev, t
                while hi - lo > tol:
                    mid = 0.5 * (lo + hi)
                    if excess(mid) > 0:
                        hi = mid
                    else:
                        lo = mid
                return float(0.5 * (lo + hi))
            prev = t
    return None


def viability_time(system: SystemSpec, control: ImpulseControl, t0: float, x0,
                   M: ConstraintSet, T_max: float, tol: float = 1e-6,
                   solve_tol: float = 1e-10, eta_tol: float = 1e-9,
                   steps: int = 128) -> ViabilityTime:
    """First exit time from ``M`` on ``(t0, T_max)``.

    Slow exits are located by bisection on the dense output to ``tol``; an
    exit during a jump is reported with ``T = tau`` and the fast time ``s``.
    A point counts as outside when some ``eta_i`` exceeds ``eta_tol``.
    """
    x0 = np.asarray(x0, dtype=float).reshape(system.n)
    if not M.contains(x0, eta_tol):
        raise ValueError(f"initial state {x0.tolist()} is not in M")
    traj = solve_ivp(system, control, t0, x0, (t0, T_max), tol=solve_tol, steps=steps)
    for item in traj.events():
        if isinstance(item, FastCurve):
            bad = np.flatnonzero([M.values(x).max() > eta_tol for x in item.gamma])
            if bad.size:
                k = int(bad[0])
                return ViabilityTime(item.tau, {"kind": "fast", "tau": item.tau,
                                                "s": float(item.s[k]),
                                                "x": item.gamma[k].tolist()}, traj)
            continue
        t_exit = _first_slow_exit(item, M, eta_tol, tol)
        if t_exit is not None:
            return ViabilityTime(t_exit, {"kind": "slow", "t": t_exit,
                                          "x": item(t_exit).tolist()}, traj)
    partial = getattr(traj, "partial_jump", None)
    if partial is not None:
        bad = [k for k, x in enumerate(partial.gamma) if M.values(x).max() > eta_tol]
        k = bad[0] if bad else len(partial.s) - 1
        return ViabilityTime(partial.tau, {"kind": "fast", "tau": partial.tau,
                                           "s": float(partial.s[k]),
                                           "x": partial.gamma[k].tolist()}, traj)
    if traj.exit is not None:
        # left the domain box while still inside M
        return ViabilityTime(traj.exit.t, {"kind": "domain", **traj.exit.to_dict()}, traj)
    return ViabilityTime(float(T_max), SURVIVED, traj)


# single / multi atom search ----------------------------------------------------------

@dataclass
class Candidate:
    taus: tuple
    cs: tuple                        # one c vector per atom
    T: float
    exit: object
    control: ImpulseControl = field(repr=False, default=None)

    @property
    def tau(self) -> Optional[float]:
        return self.taus[0] if self.taus else None

    @property
    def c(self) -> np.ndarray:
        return np.asarray(self.cs[0]) if self.cs else np.zeros(0)

    @property
    def norm_c(self) -> float:
        return float(sum(np.abs(c).sum() for c in self.cs))

    def key(self):
        # larger T, then earlier tau, then smaller |c|; the null control has no tau
        return (-round(self.T, 9), tuple(self.taus) or (-math.inf,), self.norm_c)

    def to_dict(self) -> dict:
        return {"tau": list(self.taus), "c": [np.asarray(c).tolist() for c in self.cs],
                "T": self.T, "exit": self.exit}


@dataclass
class SearchResult:
    best: Candidate
    table: list
    skipped: int = 0

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["tau", "c", "T"])
            for cand in self.table:
                tau = ";".join(repr(t) for t in cand.taus) or "none"
                c = ";".join(" ".join(repr(float(v)) for v in np.ravel(ci)) for ci in cand.cs) or "0"
                out.writerow([tau, c, repr(cand.T)])

    def best_json(self, **kw) -> str:
        return json.dumps(self.best.to_dict(), **kw)


def _as_vec(c, n):
    return np.broadcast_to(np.atleast_1d(np.asarray(c, dtype=float)), (n,)).copy()


def _shape_tuple(shape, n):
    if isinstance(shape, (Shape, str)):
        shape = Shape.preset(shape) if isinstance(shape, str) else shape
        return (shape,) * n
    return tuple(Shape.preset(s) if isinstance(s, str) else s for s in shape)


def _evaluate(system, t0, x0, M, budget, T_max, taus, cs, shapes, tol):
    atoms = tuple(ImpulseAtom(t, c, shapes) for t, c in zip(taus, cs))
    control = ImpulseControl(system.n, atoms=atoms)
    if not check_admissible(control, budget, (t0, T_max)).admissible:
        return None
    vt = viability_time(system, control, t0, x0, M, T_max, tol)
    return Candidate(tuple(taus), tuple(cs), vt.T, vt.exit, control)


def _reduce(cands, skipped):
    if not cands:
        raise ValueError("empty admissible grid")
    cands.sort(key=Candidate.key)
    return SearchResult(cands[0], cands, skipped)


def search_single_atom(system: SystemSpec, t0: float, x0, M: ConstraintSet, budget: float,
                       tau_grid: Sequence[float], c_grid: Sequence, shape="flat",
                       T_max: float = 1.0, tol: float = 1e-6,
                       include_null: bool = True) -> SearchResult:
    """Exhaustive search over one atom ``c delta_tau^alpha`` with ``tau`` and ``c`` on grids.

    Scalar ``c`` values are broadcast to all components.  Inadmissible
    candidates (budget or sign) are skipped; the null control is evaluated
    too unless ``include_null`` is false.
    """
    return search_multi_atom(system, t0, x0, M, budget, tau_grid, c_grid, 1, shape,
                             T_max, tol, include_null)


def search_multi_atom(system: SystemSpec, t0: float, x0, M: ConstraintSet, budget: float,
                      tau_grid: Sequence[float], c_grid: Sequence, max_atoms: int = 2,
                      shape="flat", T_max: float = 1.0, tol: float = 1e-6,
                      include_null: bool = True) -> SearchResult:
    """Search over controls with up to ``max_atoms`` (at most 3) atoms on the grids."""
    if not 1 <= max_atoms <= 3:
        raise ValueError("multi-atom search supports 1 to 3 atoms")
    shapes = _shape_tuple(shape, system.n)
    taus_all = sorted({float(t) for t in tau_grid if t0 <= t < T_max})
    c_vecs = [_as_vec(c, system.n) for c in c_grid]
    c_vecs = [c for c in c_vecs if np.any(c != 0)]
    cands, skipped = [], 0
    if include_null:
        vt = viability_time(system, ImpulseControl(system.n), t0, x0, M, T_max, tol)
        cands.append(Candidate((), (), vt.T, vt.exit, ImpulseControl(system.n)))
    for k in range(1, max_atoms + 1):
        for taus in itertools.combinations(taus_all, k):
            for cs in itertools.product(c_vecs, repeat=k):
                cand = _evaluate(system, t0, x0, M, budget, T_max, taus, cs, shapes, tol)
                if cand is None:
                    skipped += 1
                else:
                    cands.append(cand)
    return _reduce(cands, skipped)


# regular controls --------------------------------------------------------------------

@dataclass
class RegularCandidate:
    masses: tuple
    edges: tuple
    T: float
    exit: object

    def density(self, t: float) -> float:
        for a, b, m in zip(self.edges, self.edges[1:], self.masses):
            if a <= t < b:
                return m / (b - a)
        return 0.0

    def to_dict(self) -> dict:
        return {"edges": list(self.edges), "masses": list(self.masses), "T": self.T,
                "exit": self.exit}


@dataclass
class RegularSearchResult:
    best: RegularCandidate
    table: list

    def to_csv(self, path):
        k = len(self.best.masses)
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow([f"m{j + 1}" for j in range(k)] + ["T"])
            for cand in self.table:
                out.writerow([repr(m) for m in cand.masses] + [repr(cand.T)])


def _simplex(k: int, levels: int):
    for combo in itertools.product(range(levels + 1), repeat=k):
        if sum(combo) <= levels:
            yield combo


def search_regular_controls(system: SystemSpec, t0: float, x0, M: ConstraintSet,
                            budget: float, k: int = 4, T_max: float = 1.0, levels: int = 8,
                            span: Optional[float] = None, direction=None,
                            tol: float = 1e-6, solve_tol: float = 1e-8) -> RegularSearchResult:
    """Best piecewise-constant density on ``k`` equal bins of ``(t0, t0 + span)``.

    Bin masses run over the simplex grid ``V i_j / levels`` with
    ``sum i_j <= levels``; the density acts along ``direction`` (all ones by
    default).  Ties go to the smaller total mass.
    """
    if not 1 <= k <= 8:
        raise ValueError("regular search supports 1 to 8 bins")
    span = (T_max - t0) if span is None else span
    edges = tuple(float(e) for e in np.linspace(t0, t0 + span, k + 1))
    direction = np.ones(system.n) if direction is None else _as_vec(direction, system.n)
    table = []
    for combo in _simplex(k, levels):
        masses = tuple(budget * i / levels for i in combo)
        dens = [m / (b - a) for a, b, m in zip(edges, edges[1:], masses)]

        def w(t, dens=dens):
            j = min(max(bisect.bisect_right(edges, t) - 1, 0), k - 1)
            return direction * (dens[j] if edges[0] <= t < edges[-1] else 0.0)

        control = ImpulseControl(system.n, w=w if any(masses) else None,
                                 breakpoints=edges[1:])
        vt = viability_time(system, control, t0, x0, M, T_max, tol, solve_tol)
        table.append(RegularCandidate(masses, edges, vt.T, vt.exit))
    table.sort(key=lambda c: (-round(c.T, 9), sum(c.masses)))
    return RegularSearchResult(table[0], table)


# minimal budget ----------------------------------------------------------------------

@dataclass
class MinBudgetResult:
    tau: float
    c: float
    value: float                     # reached state component at t_target-
    table: list                      # (tau, minimal c or None)
    claimed: Optional[dict] = None

    def to_dict(self) -> dict:
        return {"tau": self.tau, "c": self.c, "value": self.value,
                "table": [{"tau": t, "c": c} for t, c in self.table],
                "claimed": self.claimed}


def min_budget_single_atom(system: SystemSpec, t0: float, x0, t_target: float,
                           target: float, tau_grid: Sequence[float], shape="flat",
                           component: int = 0, c_max: float = 10.0, tol: float = 1e-10,
                           claimed_c: Optional[float] = None,
                           claimed_tau: Optional[float] = None) -> MinBudgetResult:
    """Smallest atom weight ``c >= 0`` reaching ``x_i(t_target-) = target``, per ``tau``.

    For each ``tau`` the reached value is assumed monotone in ``c`` and the
    equation is solved by Brent's method on ``(0, c_max)``.  When
    ``claimed_c`` is given, the state it actually produces is reported
    alongside so that a mismatch is visible in the output.
    """
    shapes = _shape_tuple(shape, system.n)
    x0 = np.asarray(x0, dtype=float).reshape(system.n)
    unit = np.zeros(system.n)
    unit[component] = 1.0

    def reached(tau, c):
        atoms = (ImpulseAtom(tau, c * unit, shapes),) if c > 0 else ()
        traj = solve_ivp(system, ImpulseControl(system.n, atoms=atoms), t0, x0,
                         (t0, t_target), tol=tol)
        if traj.exit is not None:
            return math.inf
        return float(traj.x_end[component])

    table = []
    for tau in sorted(float(t) for t in tau_grid if t0 <= t < t_target):
        lo_v, hi_v = reached(tau, 0.0) - target, reached(tau, c_max) - target
        if lo_v >= 0:
            table.append((tau, 0.0))
        elif hi_v < 0:
            table.append((tau, None))
        else:
            table.append((tau, brentq(lambda c: reached(tau, c) - target, 0.0, c_max,
                                      xtol=tol, rtol=4 * np.finfo(float).eps)))
    feasible = [(c, tau) for tau, c in table if c is not None]
    if not feasible:
        raise ValueError("no tau on the grid reaches the target with c <= c_max")
    c_best, tau_best = min(feasible)
    claimed = None
    if claimed_c is not None:
        tau_c = tau_best if claimed_tau is None else claimed_tau
        got = reached(tau_c, claimed_c)
        claimed = {"tau": tau_c, "c": claimed_c, "reached": got, "target": target,
                   "consistent": abs(got - target) <= 1e-6}
    return MinBudgetResult(tau_best, c_best, reached(tau_best, c_best), table, claimed)
