"""Domain types and distribution-calculus utilities.

Impulse controls are represented as a continuous density ``w`` plus finitely
many atoms ``(tau, c, alpha)``; each atom is a vector delta-function whose
per-component *shape* ``alpha`` is a profile on the fast interval
``J = [-1/2, 1/2]`` with unit integral.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np

from . import expr as _expr

__all__ = [
    "J",
    "adaptive_simpson",
    "ShapeError",
    "Shape",
    "ShapeReport",
    "validate_shape",
    "PRESET_SHAPES",
    "ImpulseAtom",
    "ImpulseControl",
    "Box",
    "SystemSpec",
    "ConstraintSet",
    "FastCurve",
    "Segment",
    "ExitRecord",
    "DynamicTrajectory",
    "BoundaryAtomWarning",
    "control_integral",
    "AdmissibilityReport",
    "check_admissible",
    "HeavisideDeltaProduct",
    "heaviside_delta_product",
]

J = (-0.5, 0.5)


def adaptive_simpson(func: Callable[[float], float], a: float, b: float,
                     tol: float = 1e-10, max_depth: int = 48) -> float:
    """Adaptive Simpson quadrature of a scalar function on ``[a, b]``."""
    if a == b:
        return 0.0
    fa, fm, fb = func(a), func(0.5 * (a + b)), func(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    total = 0.0
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    while stack:
        lo, hi, flo, fmid, fhi, est, eps, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = func(lm), func(rm)
        left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid)
        right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi)
        delta = left + right - est
        if depth >= max_depth or abs(delta) <= 15.0 * eps:
            total += left + right + delta / 15.0
        else:
            stack.append((lo, mid, flo, flm, fmid, left, eps / 2, depth + 1))
            stack.append((mid, hi, fmid, frm, fhi, right, eps / 2, depth + 1))
    return total


# shapes -----------------------------------------------------------------------

class ShapeError(ValueError):
    """Raised for invalid shapes; ``s`` is the offending fast time if any."""

    def __init__(self, message: str, s: Optional[float] = None):
        self.s = s
        super().__init__(message if s is None else f"{message} at s={s!r}")


def _as_vectorized(func):
    def profile(s):
        arr = np.asarray(s, dtype=float)
        try:
            out = np.asarray(func(arr), dtype=float)
            if out.shape == arr.shape:
                return out
            if out.ndim == 0:
                return np.full(arr.shape, float(out))
        except (TypeError, ValueError, _expr.ExprError):
            pass
        flat = [float(func(float(v))) for v in arr.ravel()]
        return np.asarray(flat, dtype=float).reshape(arr.shape)
    return profile


@dataclass(frozen=True, eq=False)
class Shape:
    """Normalised profile on ``J``.

    Either a callable (evaluated exactly) or uniform samples on ``J``
    (linearly interpolated).  Use the ``from_*`` constructors.
    """

    profile: Callable[[np.ndarray], np.ndarray]
    samples: Optional[np.ndarray] = None
    name: str = ""

    @classmethod
    def from_samples(cls, values: Sequence[float], name: str = "sampled") -> "Shape":
        values = np.asarray(values, dtype=float)
        if values.ndim != 1 or values.size < 16:
            raise ShapeError("sampled shapes need at least 16 grid values")
        grid = np.linspace(J[0], J[1], values.size)
        bad = ~np.isfinite(values)
        if bad.any():
            raise ShapeError("non-finite shape sample", float(grid[np.argmax(bad)]))
        values = values.copy()
        values.setflags(write=False)
        return cls(lambda s: np.interp(s, grid, values), values, name)

    @classmethod
    def from_function(cls, func: Callable, name: str = "function") -> "Shape":
        return cls(_as_vectorized(func), None, name)

    @classmethod
    def from_expr(cls, source: str) -> "Shape":
        e = _expr.parse(source, 0)
        if e.variables - {"s"}:
            raise ShapeError(f"shape expression may only reference s: {source!r}")
        return cls(_as_vectorized(lambda s: e.eval(0.0, (), s)), None, source)

    @classmethod
    def preset(cls, name: str) -> "Shape":
        try:
            func = PRESET_SHAPES[name]
        except KeyError:
            raise ShapeError(f"unknown shape preset {name!r}; "
                             f"choose from {sorted(PRESET_SHAPES)}") from None
        return cls(func, None, name)

    @property
    def is_sampled(self) -> bool:
        return self.samples is not None

    @property
    def grid(self) -> Optional[np.ndarray]:
        if self.samples is None:
            return None
        return np.linspace(J[0], J[1], self.samples.size)

    def __call__(self, s):
        return self.profile(s)

    def _scalar(self, s: float) -> float:
        v = float(self.profile(np.asarray(s, dtype=float)))
        if not math.isfinite(v):
            raise ShapeError("non-finite shape value", s)
        return v

    def cumulative(self, s: float) -> float:
        """Integral of the profile from -1/2 to ``s``."""
        if self.samples is not None:
            grid = self.grid
            s = float(np.clip(s, *J))
            k = int(np.searchsorted(grid, s, side="right"))
            full = np.concatenate([grid[:k], [s]])
            vals = self.profile(full)
            return float(np.trapezoid(vals, full))
        return adaptive_simpson(self._scalar, J[0], float(s))

    @cached_property
    def integral(self) -> float:
        if self.samples is not None:
            return float(np.trapezoid(self.samples, self.grid))
        # split at 0 so symmetric kinks land on a node
        return (adaptive_simpson(self._scalar, J[0], 0.0)
                + adaptive_simpson(self._scalar, 0.0, J[1]))

    @cached_property
    def report(self) -> "ShapeReport":
        return validate_shape(self)


PRESET_SHAPES = {
    "flat": lambda s: np.ones_like(np.asarray(s, dtype=float)),
    "tent": lambda s: 2.0 - 4.0 * np.abs(np.asarray(s, dtype=float)),
    # linear ramps carrying their mass near one end of J
    "front": lambda s: 1.0 - 2.0 * np.asarray(s, dtype=float),
    "back": lambda s: 1.0 + 2.0 * np.asarray(s, dtype=float),
}


@dataclass(frozen=True)
class ShapeReport:
    integral: float
    passed: bool
    min: float
    max: float
    tol: float


def validate_shape(shape: Shape, tol: float = 1e-8) -> ShapeReport:
    """Check the unit-mass normalisation of ``shape`` and report its range."""
    grid = shape.grid if shape.is_sampled else np.linspace(J[0], J[1], 1025)
    vals = np.asarray(shape(grid), dtype=float)
    bad = ~np.isfinite(vals)
    if bad.any():
        raise ShapeError("non-finite shape value", float(grid[np.argmax(bad)]))
    total = shape.integral
    if not math.isfinite(total):
        raise ShapeError("non-finite shape integral")
    return ShapeReport(total, abs(total - 1.0) <= tol, float(vals.min()),
                       float(vals.max()), tol)


# controls -----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ImpulseAtom:
    """A vector delta-function ``<c, delta_tau^alpha>`` with per-component shapes."""

    tau: float
    c: np.ndarray
    shapes: tuple

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        if not np.all(np.isfinite(c)):
            raise ValueError("atom magnitude must be finite")
        if not np.any(c != 0):
            raise ValueError(f"atom at tau={self.tau} has zero magnitude")
        shapes = tuple(self.shapes)
        if len(shapes) != c.size:
            raise ValueError(f"atom needs {c.size} shapes, got {len(shapes)}")
        for k, sh in enumerate(shapes):
            rep = sh.report
            if not rep.passed:
                raise ShapeError(f"shape {k + 1} of atom at tau={self.tau} integrates to "
                                 f"{rep.integral!r}, not 1")
        c.setflags(write=False)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "shapes", shapes)
        object.__setattr__(self, "tau", float(self.tau))

    @classmethod
    def with_shape(cls, tau: float, c, shape: Shape | str = "flat") -> "ImpulseAtom":
        """Atom whose components all share one profile."""
        if isinstance(shape, str):
            shape = Shape.preset(shape)
        c = np.atleast_1d(np.asarray(c, dtype=float))
        return cls(tau, c, (shape,) * c.size)

    @property
    def n(self) -> int:
        return self.c.size

    def weights(self, s) -> np.ndarray:
        """Componentwise product ``<c, alpha(s)>``; shape ``(len(s), n)`` for arrays."""
        s = np.asarray(s, dtype=float)
        cols = [ci * np.asarray(sh(s), dtype=float) for ci, sh in zip(self.c, self.shapes)]
        return np.stack(cols, axis=-1)


@dataclass(frozen=True, eq=False)
class ImpulseControl:
    """Continuous density ``w`` plus a finite, time-ordered list of atoms.

    ``breakpoints`` lists instants where ``w`` may jump (piecewise-continuous
    densities); integrators restart there.
    """

    n: int
    w: Optional[Callable[[float], np.ndarray]] = None
    atoms: tuple = ()
    breakpoints: tuple = ()

    def __post_init__(self):
        atoms = tuple(self.atoms)
        taus = [a.tau for a in atoms]
        if any(b <= a for a, b in zip(taus, taus[1:])):
            raise ValueError(f"atom times must be strictly increasing: {taus}")
        for a in atoms:
            if a.n != self.n:
                raise ValueError(f"atom at tau={a.tau} has dimension {a.n}, expected {self.n}")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "breakpoints", tuple(sorted(float(b) for b in self.breakpoints)))

    @classmethod
    def zero(cls, n: int) -> "ImpulseControl":
        return cls(n)

    @property
    def has_density(self) -> bool:
        return self.w is not None

    def density(self, t: float) -> np.ndarray:
        if self.w is None:
            return np.zeros(self.n)
        return np.atleast_1d(np.asarray(self.w(t), dtype=float))

    def atoms_between(self, a: float, b: float, closed: bool = False) -> list:
        if closed:
            return [at for at in self.atoms if a <= at.tau <= b]
        return [at for at in self.atoms if a < at.tau < b]

    def with_atoms(self, atoms) -> "ImpulseControl":
        return ImpulseControl(self.n, self.w, tuple(atoms), self.breakpoints)


class BoundaryAtomWarning(UserWarning):
    """An atom sits exactly on an integration-window endpoint."""


@dataclass(frozen=True)
class ControlIntegral:
    value: np.ndarray
    boundary_atoms: tuple = ()

    @property
    def ambiguous(self) -> bool:
        return bool(self.boundary_atoms)

    def __array__(self, dtype=None):
        return np.asarray(self.value, dtype=dtype)


def _density_integral(control: ImpulseControl, t0: float, T: float) -> np.ndarray:
    if control.w is None or T <= t0:
        return np.zeros(control.n)
    knots = [t0] + [b for b in control.breakpoints if t0 < b < T] + [T]
    total = np.zeros(control.n)
    for i in range(control.n):
        comp = lambda t, i=i: float(control.density(t)[i])
        total[i] = sum(adaptive_simpson(comp, a, b, 1e-12) for a, b in zip(knots, knots[1:]))
    return total


def control_integral(control: ImpulseControl, t0: float, T: float) -> ControlIntegral:
    """Integral of the control over the open window ``(t0, T)``.

    Atoms strictly inside the window contribute ``c``; atoms exactly on an
    endpoint are excluded from ``value`` but listed in ``boundary_atoms``
    and a :class:`BoundaryAtomWarning` is emitted.
    """
    if not t0 < T:
        raise ValueError(f"empty window ({t0}, {T})")
    total = _density_integral(control, t0, T)
    for atom in control.atoms_between(t0, T):
        total = total + atom.c
    edge = tuple(a for a in control.atoms if a.tau in (t0, T))
    if edge:
        warnings.warn(f"atoms on window endpoints {[a.tau for a in edge]} are "
                      "excluded from the open-window integral", BoundaryAtomWarning,
                      stacklevel=2)
    return ControlIntegral(total, edge)


@dataclass
class AdmissibilityReport:
    admissible: bool
    violations: list
    integral: np.ndarray

    def __bool__(self):
        return self.admissible


def check_admissible(control: ImpulseControl, budget: float, window: tuple,
                     samples: int = 257) -> AdmissibilityReport:
    """Nonnegativity and componentwise budget check for an impulse control.

    Atoms on a window endpoint are counted against the budget (the
    conservative reading of an ambiguous integral).
    """
    t0, T = window
    violations = []
    if control.w is not None:
        grid = np.unique(np.concatenate([
            np.linspace(t0, T, samples),
            [b for b in control.breakpoints if t0 <= b <= T]]))
        for t in grid:
            wt = control.density(t)
            if np.any(wt < 0):
                violations.append(f"negative density at t={t:g} component "
                                  f"{int(np.argmax(wt < 0)) + 1}")
                break
    for atom in control.atoms:
        if np.any(atom.c < 0):
            violations.append(f"negative atom at tau={atom.tau:g}")
        for k, sh in enumerate(atom.shapes):
            if sh.report.min < 0:
                violations.append(f"negative shape at tau={atom.tau:g} component {k + 1}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryAtomWarning)
        ci = control_integral(control, t0, T)
    total = ci.value + sum((a.c for a in ci.boundary_atoms), np.zeros(control.n))
    for i, v in enumerate(total):
        if v > budget + 1e-12:
            violations.append(f"budget exceeded component {i + 1}")
    return AdmissibilityReport(not violations, violations, total)


@dataclass(frozen=True)
class HeavisideDeltaProduct:
    coefficient: float
    shape: Optional[Shape]

    @property
    def defined(self) -> bool:
        return self.shape is not None


def heaviside_delta_product(beta: Callable, alpha: Shape) -> HeavisideDeltaProduct:
    """Product of a Heaviside function with fast-time value ``beta`` and a delta-function of shape ``alpha``.

    The result is ``coefficient * delta^gamma`` with ``gamma = alpha*beta/coefficient``;
    the shape is ``None`` when the coefficient vanishes.
    """
    beta = _as_vectorized(beta)
    product = lambda s: float(beta(np.asarray(s)) * alpha(np.asarray(s)))
    if alpha.is_sampled:
        grid = alpha.grid
        coef = float(np.trapezoid(beta(grid) * alpha.samples, grid))
    else:
        coef = adaptive_simpson(product, J[0], 0.0) + adaptive_simpson(product, 0.0, J[1])
    if abs(coef) < 1e-12:
        return HeavisideDeltaProduct(coef, None)
    if alpha.is_sampled:
        gamma = Shape.from_samples(beta(alpha.grid) * alpha.samples / coef, "product")
    else:
        gamma = Shape.from_function(lambda s: beta(s) * alpha(s) / coef, "product")
    return HeavisideDeltaProduct(coef, gamma)


# systems ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Box:
    """Axis-aligned domain ``[t_lo, t_hi] x prod [x_lo, x_hi]``; bounds may be infinite."""

    t_lo: float
    t_hi: float
    x_lo: np.ndarray
    x_hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x_lo", np.asarray(self.x_lo, dtype=float))
        object.__setattr__(self, "x_hi", np.asarray(self.x_hi, dtype=float))

    @classmethod
    def unbounded(cls, n: int) -> "Box":
        return cls(-np.inf, np.inf, np.full(n, -np.inf), np.full(n, np.inf))

    def contains(self, t: float, x) -> bool:
        x = np.asarray(x)
        return bool(self.t_lo <= t <= self.t_hi and np.all(x >= self.x_lo)
                    and np.all(x <= self.x_hi))

    def contains_x(self, x) -> bool:
        x = np.asarray(x)
        return bool(np.all(x >= self.x_lo) and np.all(x <= self.x_hi))

    @property
    def finite(self) -> bool:
        return bool(np.all(np.isfinite(self.x_lo)) and np.all(np.isfinite(self.x_hi)))


@dataclass(frozen=True, eq=False)
class SystemSpec:
    """``x' = f(t, x) + g(t, x) v`` with an ``n x n`` input matrix ``g``.

    ``g(t, x, s)`` may depend on fast time ``s`` when ``g_uses_s`` is set; the
    argument is ``None`` outside jumps.
    """

    n: int
    f: Callable[[float, np.ndarray], np.ndarray]
    g: Callable[..., np.ndarray]
    domain: Box = None
    lipschitz_hint: Optional[tuple] = None
    g_uses_s: bool = False
    name: str = ""

    def __post_init__(self):
        if self.domain is None:
            object.__setattr__(self, "domain", Box.unbounded(self.n))

    @classmethod
    def from_expressions(cls, n: int, f: Sequence[str], g: Sequence[Sequence[str]],
                         domain: Box = None, lipschitz_hint=None, name: str = "") -> "SystemSpec":
        if len(f) != n or len(g) != n or any(len(row) != n for row in g):
            raise ValueError(f"need {n} entries for f and an {n}x{n} matrix for g")
        fe = [_expr.parse(src, n) for src in f]
        ge = [[_expr.parse(src, n) for src in row] for row in g]
        uses_s = any(e.uses_s for row in ge for e in row)
        if any(e.uses_s for e in fe):
            raise _expr.UnboundVariableError("f may not reference fast time s")

        def f_fn(t, x):
            return np.array([e.eval(t, x) for e in fe])

        def g_fn(t, x, s=None):
            return np.array([[e.eval(t, x, s) for e in row] for row in ge])

        spec = cls(n, f_fn, g_fn, domain, lipschitz_hint, uses_s, name)
        object.__setattr__(spec, "expressions", {"f": fe, "g": ge})
        return spec

    def F(self, t, x):
        return np.asarray(self.f(t, x), dtype=float).reshape(self.n)

    def G(self, t, x, s=None):
        if self.g_uses_s:
            return np.asarray(self.g(t, x, s), dtype=float).reshape(self.n, self.n)
        return np.asarray(self.g(t, x), dtype=float).reshape(self.n, self.n)

    def g_column(self, m: int, t, x, s=None) -> np.ndarray:
        return self.G(t, x, s)[:, m]

    def check(self, samples: int = 64, seed: int = 0, box: Optional[tuple] = None) -> dict:
        """Finite-value and empirical Lipschitz check on random domain samples."""
        rng = np.random.default_rng(seed)
        lo, hi = box if box is not None else (self.domain.x_lo, self.domain.x_hi)
        lo = np.where(np.isfinite(lo), lo, -10.0)
        hi = np.where(np.isfinite(hi), hi, 10.0)
        t_lo = self.domain.t_lo if math.isfinite(self.domain.t_lo) else -1.0
        t_hi = self.domain.t_hi if math.isfinite(self.domain.t_hi) else 1.0
        s_val = 0.0 if self.g_uses_s else None
        kf = kg = 0.0
        for _ in range(samples):
            t = rng.uniform(t_lo, t_hi)
            x, y = rng.uniform(lo, hi), rng.uniform(lo, hi)
            fx, fy = self.F(t, x), self.F(t, y)
            gx, gy = self.G(t, x, s_val), self.G(t, y, s_val)
            if not (np.all(np.isfinite(fx)) and np.all(np.isfinite(gx))):
                raise ValueError(f"non-finite field value at t={t}, x={x}")
            d = np.max(np.abs(x - y))
            if d > 0:
                kf = max(kf, np.max(np.abs(fx - fy)) / d)
                kg = max(kg, np.max(np.abs(gx - gy)) / d)
        ok = True
        if self.lipschitz_hint is not None:
            hf, hg = self.lipschitz_hint
            ok = kf <= 10 * hf and kg <= 10 * hg
        return {"K_f": kf, "K_g": kg, "consistent_with_hint": ok}


@dataclass(frozen=True, eq=False)
class ConstraintSet:
    """``M = {x : eta_i(x) <= 0}`` with gradients (analytic or central differences)."""

    etas: tuple
    grads: Optional[tuple] = None
    h: float = 1e-6

    @classmethod
    def from_expressions(cls, n: int, etas: Sequence[str],
                         grads: Optional[Sequence[Sequence[str]]] = None) -> "ConstraintSet":
        ee = [_expr.parse(src, n) for src in etas]
        eta_fns = tuple((lambda x, e=e: e.eval(0.0, x)) for e in ee)
        grad_fns = None
        if grads is not None:
            ge = [[_expr.parse(src, n) for src in row] for row in grads]
            grad_fns = tuple((lambda x, row=row: np.array([e.eval(0.0, x) for e in row]))
                             for row in ge)
        return cls(eta_fns, grad_fns)

    @property
    def m(self) -> int:
        return len(self.etas)

    def values(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.array([float(eta(x)) for eta in self.etas])

    def gradient(self, i: int, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.grads is not None:
            return np.asarray(self.grads[i](x), dtype=float)
        out = np.empty(x.size)
        for j in range(x.size):
            xp, xm = x.copy(), x.copy()
            xp[j] += self.h
            xm[j] -= self.h
            out[j] = (self.etas[i](xp) - self.etas[i](xm)) / (2 * self.h)
        return out

    def gradients(self, x) -> np.ndarray:
        return np.array([self.gradient(i, x) for i in range(self.m)])

    def contains(self, x, tol: float = 0.0) -> bool:
        return bool(np.all(self.values(x) <= tol))


# trajectories ----------------------------------------------------------------------

@dataclass
class FastCurve:
    """Fast-time transit ``gamma_tau(s)`` sampled on a uniform grid of ``J``."""

    tau: float
    s: np.ndarray
    gamma: np.ndarray

    @property
    def x_minus(self) -> np.ndarray:
        return self.gamma[0]

    @property
    def x_plus(self) -> np.ndarray:
        return self.gamma[-1]

    def to_csv(self, path):
        n = self.gamma.shape[1]
        header = "s," + ",".join(f"gamma_{i + 1}" for i in range(n))
        np.savetxt(path, np.column_stack([self.s, self.gamma]), delimiter=",",
                   header=header, comments="", fmt="%.17g")


@dataclass
class Segment:
    """Continuous stretch of the ordinary solution between restarts."""

    t: np.ndarray
    x: np.ndarray
    dense: Optional[Callable] = None
    starts_at_atom: bool = False
    ends_at_atom: bool = False

    @property
    def t_start(self) -> float:
        return float(self.t[0])

    @property
    def t_end(self) -> float:
        return float(self.t[-1])

    def __call__(self, t):
        if self.dense is None:
            return np.array([np.interp(t, self.t, self.x[:, i]) for i in range(self.x.shape[1])])
        return self.dense(t)


@dataclass
class ExitRecord:
    kind: str                  # "slow" or "fast"
    t: float
    x: np.ndarray
    s: Optional[float] = None
    reason: str = ""

    def to_dict(self) -> dict:
        return {"kind": self.kind, "t": self.t, "s": self.s,
                "x": np.asarray(self.x).tolist(), "reason": self.reason}


@dataclass
class DynamicTrajectory:
    """Ordinary solution plus the fast-time transit at every atom.

    Segments and jumps alternate in time; ``jumps[k]`` joins the end of the
    segment before ``tau_k`` to the start of the one after it.
    """

    n: int
    t0: float
    x0: np.ndarray
    segments: list = field(default_factory=list)
    jumps: list = field(default_factory=list)
    exit: Optional[ExitRecord] = None
    horizon: Optional[tuple] = None

    @property
    def complete(self) -> bool:
        return self.exit is None

    def events(self):
        """Segments and jumps merged in time order (jumps before a segment starting at their tau)."""
        items = [(seg.t_start, 1, seg) for seg in self.segments]
        items += [(j.tau, 0, j) for j in self.jumps]
        items.sort(key=lambda it: (it[0], it[1]))
        return [it[2] for it in items]

    def rows(self):
        """Sample rows ``(t, side, x)`` with side in ``{'-', '+', ''}``."""
        rows = []
        pending_left = None
        for item in self.events():
            if isinstance(item, FastCurve):
                rows.append((item.tau, "-", item.x_minus))
                rows.append((item.tau, "+", item.x_plus))
                pending_left = item.tau
                continue
            seg = item
            for k, (t, x) in enumerate(zip(seg.t, seg.x)):
                if k == 0 and pending_left == t:
                    continue
                side = "-" if (k == len(seg.t) - 1 and seg.ends_at_atom) else ""
                if side == "-":
                    continue  # emitted with the jump
                rows.append((float(t), side, np.asarray(x)))
            pending_left = None
        if not rows:
            rows.append((self.t0, "", np.asarray(self.x0)))
        return rows

    def sample_arrays(self):
        rows = self.rows()
        t = np.array([r[0] for r in rows])
        side = [r[1] for r in rows]
        x = np.array([r[2] for r in rows])
        return t, side, x

    def _segment_at(self, t: float, side: str = "+"):
        cands = [seg for seg in self.segments if seg.t_start <= t <= seg.t_end]
        if not cands:
            raise ValueError(f"t={t} outside the computed trajectory")
        return cands[0] if side == "-" else cands[-1]

    def __call__(self, t: float, side: str = "+") -> np.ndarray:
        """State at ``t``; at an atom ``side`` selects the left or right limit."""
        for j in self.jumps:
            if j.tau == t:
                return np.array(j.x_minus if side == "-" else j.x_plus)
        return np.asarray(self._segment_at(t, side)(t))

    def left_limit(self, tau: float) -> np.ndarray:
        return self(tau, "-")

    def right_limit(self, tau: float) -> np.ndarray:
        return self(tau, "+")

    @property
    def t_end(self) -> float:
        ends = [seg.t_end for seg in self.segments] + [j.tau for j in self.jumps]
        return max(ends) if ends else self.t0

    @property
    def x_end(self) -> np.ndarray:
        ev = self.events()
        if not ev:
            return np.asarray(self.x0)
        last = ev[-1]
        return last.x_plus if isinstance(last, FastCurve) else last.x[-1]

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("t,side," + ",".join(f"x_{i + 1}" for i in range(self.n)) + "\n")
            for t, side, x in self.rows():
                side = side or "interior"
                fh.write(f"{t!r},{side}," + ",".join(repr(float(v)) for v in x) + "\n")
