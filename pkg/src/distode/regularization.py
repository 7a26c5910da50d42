"""Delta-sequence approximations of impulse controls.

Each atom ``<c, delta_tau^alpha>`` is replaced by the ordinary function
``t -> <c, n alpha(n (t - tau))>`` supported on an interval of width ``1/n``;
the resulting classical ODE is solved with no jumps and compared with the
impulse solution.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass, field

import numpy as np

from .core import DynamicTrajectory, ImpulseAtom, ImpulseControl, SystemSpec
from .solver import integrate_segment, solve_ivp

__all__ = ["RegularizationError", "DeltaSequenceTerm", "delta_sequence_term",
           "regularized_solve", "ConvergenceReport", "convergence_report"]


class RegularizationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DeltaSequenceTerm:
    """``n``-th term of the delta-sequence of one atom.

    ``anchor='center'`` gives support ``(tau - 1/2n, tau + 1/2n)``;
    ``anchor='right'`` shifts it to ``(tau, tau + 1/n)`` for atoms that fire
    at the initial instant.
    """

    atom: ImpulseAtom
    n: int
    anchor: str = "center"

    @property
    def support(self) -> tuple:
        tau, half = self.atom.tau, 0.5 / self.n
        if self.anchor == "right":
            return tau, tau + 2 * half
        return tau - half, tau + half

    def fast_time(self, t: float) -> float:
        lo, hi = self.support
        return self.n * (t - lo) - 0.5

    def __call__(self, t: float) -> np.ndarray:
        lo, hi = self.support
        if not lo < t < hi:
            return np.zeros(self.atom.n)
        return self.n * self.atom.weights(self.fast_time(t))


def delta_sequence_term(atom: ImpulseAtom, n: int, anchor: str = "center") -> DeltaSequenceTerm:
    if n < 1:
        raise ValueError("delta-sequence index must be >= 1")
    if anchor not in ("center", "right"):
        raise ValueError(f"unknown anchor {anchor!r}")
    return DeltaSequenceTerm(atom, int(n), anchor)


def _terms(control: ImpulseControl, n: int, t0: float, T: float):
    terms = [delta_sequence_term(a, n, "right" if a.tau == t0 else "center")
             for a in control.atoms if t0 <= a.tau < T]
    for term in terms:
        lo, hi = term.support
        if lo < t0 or hi > T:
            raise RegularizationError(
                f"n too small: support ({lo:g}, {hi:g}) of atom at {term.atom.tau:g} "
                f"leaves the horizon ({t0:g}, {T:g})")
    for a, b in zip(terms, terms[1:]):
        if a.support[1] > b.support[0]:
            raise RegularizationError(
                f"n too small: supports of atoms at {a.atom.tau:g} and {b.atom.tau:g} overlap")
    return terms


def regularized_solve(system: SystemSpec, control: ImpulseControl, n: int, t0: float, x0,
                      horizon, tol: float = 1e-8, t_eval=None) -> DynamicTrajectory:
    """Classical solve with every atom replaced by its ``n``-th delta-sequence term.

    The integrator tolerance is tightened to ``tol / n``.
    """
    T = horizon[1]
    terms = _terms(control, n, t0, T)
    starts = [term.support[0] for term in terms]
    x = np.asarray(x0, dtype=float).reshape(system.n)

    def active(t):
        k = bisect.bisect_right(starts, t) - 1
        if k >= 0 and t < terms[k].support[1]:
            return terms[k]
        return None

    def rhs(t, y):
        v = control.density(t)
        term = active(t)
        if term is None:
            if control.w is None:
                return system.F(t, y)
            return system.F(t, y) + system.G(t, y) @ v
        s = term.fast_time(t) if system.g_uses_s else None
        return system.F(t, y) + system.G(t, y, s) @ (v + term(t))

    edges = {t0, T, *(b for b in control.breakpoints if t0 < b < T)}
    for term in terms:
        edges.update(term.support)
    knots = sorted(edges)
    traj = DynamicTrajectory(system.n, float(t0), x.copy(), horizon=(float(t0), float(T)))
    for a, b in zip(knots, knots[1:]):
        seg, exit_rec = integrate_segment(rhs, a, b, x, tol / n, system.domain, t_eval)
        traj.segments.append(seg)
        if exit_rec is not None:
            traj.exit = exit_rec
            break
        x = seg.x[-1].copy()
    return traj


@dataclass
class ConvergenceReport:
    n_list: list
    probes: list
    distances: np.ndarray          # shape (len(n_list), len(probes))
    rows: list = field(default_factory=list)
    noise_floor: float = 0.0

    @property
    def sup(self) -> np.ndarray:
        return self.distances.max(axis=1)

    @property
    def decreasing(self) -> bool:
        # distances under the integrator noise floor count as converged
        tail = self.sup[-3:]
        return bool(all(b < a or b <= self.noise_floor for a, b in zip(tail, tail[1:])))

    @property
    def converged(self) -> bool:
        return bool(self.sup[-1] < 1e-3 and self.decreasing)

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("n,t,distance\n")
            for n, t, d in self.rows:
                fh.write(f"{n},{t!r},{d!r}\n")


def convergence_report(system: SystemSpec, control: ImpulseControl, t0: float, x0, horizon,
                       n_list, probes, tol: float = 1e-8, reference=None) -> ConvergenceReport:
    """Distances ``|x_n(t) - x(t)|`` at probe times for each ``n`` in ``n_list``.

    ``reference`` defaults to the impulse solution from :func:`solve_ivp`.
    Probes must lie outside every delta-sequence support at the smallest ``n``.
    Distances at or below ``10 * tol`` are treated as integrator noise when
    judging monotone decrease.
    """
    T = horizon[1]
    n_list = [int(n) for n in n_list]
    for term in _terms(control, min(n_list), t0, T):
        lo, hi = term.support
        bad = [p for p in probes if lo <= p <= hi]
        if bad:
            raise RegularizationError(f"probe times {bad} inside the support ({lo:g}, {hi:g})")
    if reference is None:
        reference = solve_ivp(system, control, t0, x0, horizon, tol=tol * 1e-2)
    ref = [np.asarray(reference(p)) for p in probes]
    dist = np.empty((len(n_list), len(probes)))
    rows = []
    for i, n in enumerate(n_list):
        approx = regularized_solve(system, control, n, t0, x0, horizon, tol)
        for j, p in enumerate(probes):
            dist[i, j] = float(np.max(np.abs(approx(p) - ref[j])))
            rows.append((n, float(p), dist[i, j]))
    return ConvergenceReport(n_list, list(probes), dist, rows, 10 * tol)
