"""Declarative JSON scenarios: validation, model construction and task dispatch.

A scenario names a system (DSL strings for ``f``, ``g`` and ``w``), a list of
atoms, optional constraints and a task block.  :func:`run_scenario` writes
CSV/JSON artifacts plus a ``manifest.json`` into an output directory and
returns the process exit code (0 ok, 2 failed check).
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import platform
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np
import scipy

from . import expr as _expr
from .avoidance import min_budget_single_atom, search_multi_atom, search_regular_controls
from .core import (Box, ConstraintSet, ImpulseAtom, ImpulseControl, PRESET_SHAPES, Shape,
                   ShapeError, SystemSpec)
from .frobenius import frobenius_check, shape_sensitivity
from .regularization import convergence_report
from .solver import contraction_solve, representation_residual, solve_ivp
from .viability import (impulse_viability_check, sample_boundary, stability_check,
                        trajectory_viability_audit)

__all__ = ["ScenarioError", "Scenario", "load_schema", "load_scenario", "build_scenario",
           "gallery_names", "gallery_path", "list_presets", "run_scenario"]

EXIT_OK, EXIT_ERROR, EXIT_CHECK_FAILED = 0, 1, 2
OUTPUT_ENV = "DISTODE_OUTPUT_DIR"


class ScenarioError(ValueError):
    """Invalid scenario; ``pointer`` is a JSON pointer to the offending field."""

    def __init__(self, pointer: str, message: str):
        self.pointer = pointer or "/"
        super().__init__(f"{self.pointer}: {message}")


def _data(name: str):
    return resources.files("distode").joinpath("data", name)


def load_schema() -> dict:
    return json.loads(_data("scenario.schema.json").read_text())


def gallery_names() -> list:
    return sorted(p.name[:-5] for p in _data("gallery").iterdir() if p.name.endswith(".json"))


def gallery_path(name: str):
    path = _data("gallery").joinpath(f"{name}.json")
    if not path.is_file():
        raise ScenarioError("/", f"no gallery scenario named {name!r}")
    return path


def list_presets() -> dict:
    return {"shapes": {name: Shape.preset(name).integral for name in PRESET_SHAPES},
            "scenarios": gallery_names()}


def _pointer(path) -> str:
    return "/" + "/".join(str(p) for p in path) if path else "/"


def _grid(spec):
    if isinstance(spec, dict):
        return [round(float(v), 12) for v in np.linspace(spec["start"], spec["stop"], spec["num"])]
    return [float(v) for v in spec]


def _num(v):
    return math.inf if v is None else float(v)


@dataclass
class Scenario:
    name: str
    raw: dict
    system: SystemSpec
    control: ImpulseControl
    t0: float
    x0: np.ndarray
    T: float
    constraints: Optional[ConstraintSet]
    tol: float = 1e-8
    steps: int = 128
    digest: str = ""
    task: dict = field(default_factory=dict)


def _parse(src, n, pointer):
    try:
        return _expr.parse(src, n)
    except _expr.ExprError as exc:
        raise ScenarioError(pointer, str(exc)) from None


def _shape(spec, pointer):
    try:
        if isinstance(spec, str):
            return Shape.preset(spec)
        if "expr" in spec:
            try:
                return Shape.from_expr(spec["expr"])
            except _expr.ExprError as exc:
                raise ScenarioError(pointer + "/expr", str(exc)) from None
        return Shape.from_samples(spec["samples"])
    except ShapeError as exc:
        raise ScenarioError(pointer, str(exc)) from None


def _shapes(spec, n, pointer):
    if isinstance(spec, list):
        if len(spec) != n:
            raise ScenarioError(pointer, f"expected {n} component shapes, got {len(spec)}")
        return tuple(_shape(s, f"{pointer}/{i}") for i, s in enumerate(spec))
    return (_shape(spec, pointer),) * n


def _vector(v, n, pointer):
    arr = np.broadcast_to(np.atleast_1d(np.asarray(v, dtype=float)), (n,)) if np.ndim(v) == 0 \
        else np.asarray(v, dtype=float)
    if arr.shape != (n,):
        raise ScenarioError(pointer, f"expected {n} entries, got {arr.size}")
    return arr.copy()


def build_scenario(doc: dict, digest: str = "") -> Scenario:
    """Validate ``doc`` against the schema and build the model objects."""
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        raise ScenarioError(_pointer(err.absolute_path), err.message)
    n = doc["n"]
    if len(doc["f"]) != n:
        raise ScenarioError("/f", f"expected {n} entries")
    if len(doc["g"]) != n or any(len(row) != n for row in doc["g"]):
        raise ScenarioError("/g", f"expected an {n}x{n} matrix")
    fe = [_parse(s, n, f"/f/{i}") for i, s in enumerate(doc["f"])]
    for i, e in enumerate(fe):
        if e.uses_s:
            raise ScenarioError(f"/f/{i}", "f may not reference fast time s")
    for i, row in enumerate(doc["g"]):
        for j, s in enumerate(row):
            _parse(s, n, f"/g/{i}/{j}")

    dom = doc.get("domain", {})
    t_lo, t_hi = dom.get("t", [None, None])
    box = Box(-_num(t_lo) if t_lo is None else float(t_lo), _num(t_hi),
              [-_num(v) if v is None else float(v) for v in dom.get("x_lo", [None] * n)],
              [_num(v) for v in dom.get("x_hi", [None] * n)])
    if box.x_lo.shape != (n,) or box.x_hi.shape != (n,):
        raise ScenarioError("/domain", f"x bounds need {n} entries")
    hint = tuple(doc["lipschitz_hint"]) if "lipschitz_hint" in doc else None
    system = SystemSpec.from_expressions(n, doc["f"], doc["g"], box, hint, doc.get("name", ""))

    w = None
    if "w" in doc:
        we = [_parse(s, n, f"/w/{i}") for i, s in enumerate(doc["w"])]
        if len(we) != n:
            raise ScenarioError("/w", f"expected {n} entries")
        for i, e in enumerate(we):
            if any(v not in ("t",) for v in e.variables):
                raise ScenarioError(f"/w/{i}", "density may only depend on t")
        zero = np.zeros(n)
        w = lambda t, we=we: np.array([e.eval(t, zero) for e in we])
    atoms = []
    for k, a in enumerate(doc.get("atoms", [])):
        p = f"/atoms/{k}"
        try:
            atoms.append(ImpulseAtom(float(a["tau"]), _vector(a["c"], n, p + "/c"),
                                     _shapes(a.get("shape", "flat"), n, p + "/shape")))
        except (ValueError, ShapeError) as exc:
            if isinstance(exc, ScenarioError):
                raise
            raise ScenarioError(p, str(exc)) from None
    taus = [a.tau for a in atoms]
    if any(b <= a for a, b in zip(taus, taus[1:])):
        raise ScenarioError("/atoms", f"atom times must be strictly increasing: {taus}")
    control = ImpulseControl(n, w, tuple(atoms), tuple(doc.get("w_breakpoints", ())))

    M = None
    if "constraints" in doc:
        for i, s in enumerate(doc["constraints"]):
            e = _parse(s, n, f"/constraints/{i}")
            if e.uses_s or e.uses_t:
                raise ScenarioError(f"/constraints/{i}", "constraints depend on x only")
        M = ConstraintSet.from_expressions(n, doc["constraints"])
    x0 = _vector(doc["x0"], n, "/x0")
    t0 = float(doc.get("t0", 0.0))
    T = float(doc["horizon"])
    if T <= t0:
        raise ScenarioError("/horizon", f"horizon end {T} must exceed t0={t0}")
    tols = doc.get("tolerances", {})
    return Scenario(doc.get("name", "scenario"), doc, system, control, t0, x0, T, M,
                    float(tols.get("tol", 1e-8)), int(tols.get("steps", 128)), digest,
                    doc["task"])


def load_scenario(path) -> Scenario:
    path = Path(str(path)) if not hasattr(path, "read_bytes") else path
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ScenarioError("/", f"cannot read scenario: {exc}") from None
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ScenarioError("/", f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ScenarioError("/", "scenario must be a JSON object")
    doc.setdefault("name", path.name.rsplit(".", 1)[0])
    return build_scenario(doc, hashlib.sha256(data).hexdigest())


# tasks -------------------------------------------------------------------------------

def _dump(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"not serializable: {type(o).__name__}")


def _require_constraints(sc: Scenario):
    if sc.constraints is None:
        raise ScenarioError("/constraints", f"task {sc.task['type']!r} needs constraints")
    return sc.constraints


def _write_trajectory(traj, out: Path, outputs: list):
    traj.to_csv(out / "trajectory.csv")
    outputs.append("trajectory.csv")
    for k, curve in enumerate(traj.jumps):
        name = f"fast_curve_{k + 1}.csv"
        curve.to_csv(out / name)
        outputs.append(name)


def _task_solve(sc: Scenario, out: Path, outputs: list) -> int:
    task = sc.task
    traj = solve_ivp(sc.system, sc.control, sc.t0, sc.x0, (sc.t0, sc.T), tol=sc.tol,
                     steps=sc.steps)
    _write_trajectory(traj, out, outputs)
    res = representation_residual(traj, sc.system, sc.control)
    report = {
        "x_end": traj.x_end,
        "t_end": traj.t_end,
        "exit": traj.exit.to_dict() if traj.exit else None,
        "jumps": [{"tau": j.tau, "x_minus": j.x_minus, "x_plus": j.x_plus} for j in traj.jumps],
        "residual_max": float(res.max()),
        "residual_ok": bool(res.max() <= 10 * sc.tol),
    }
    if "contraction" in task:
        c = task["contraction"]
        cr = contraction_solve(sc.system, sc.control, sc.t0, sc.x0, c["N_bound"],
                               c.get("h_max", 1.0), c.get("nodes", 32), sc.steps)
        report["contraction"] = {"h": cr.h, "lambda": cr.lam, "iterations": cr.iterations,
                                 "observed_ratio": cr.observed_ratio}
    _dump(out / "report.json", report)
    outputs.append("report.json")
    return EXIT_OK if report["residual_ok"] else EXIT_CHECK_FAILED


def _task_regularize(sc: Scenario, out: Path, outputs: list) -> int:
    task = sc.task
    rep = convergence_report(sc.system, sc.control, sc.t0, sc.x0, (sc.t0, sc.T),
                             task["n_list"], task["probes"], tol=sc.tol)
    rep.to_csv(out / "convergence.csv")
    _dump(out / "convergence.json", {"n_list": rep.n_list, "sup": rep.sup,
                                     "decreasing": rep.decreasing, "converged": rep.converged,
                                     "noise_floor": rep.noise_floor})
    outputs += ["convergence.csv", "convergence.json"]
    return EXIT_OK if rep.converged else EXIT_CHECK_FAILED


def _task_frobenius(sc: Scenario, out: Path, outputs: list) -> int:
    task = sc.task
    box = task.get("box")
    rep = frobenius_check(sc.system, task.get("N", 256), task.get("tol", 1e-5),
                          box=tuple(box) if box else None, t_range=task.get("t_range"))
    doc = rep.to_dict()
    if "sensitivity" in task:
        sens = task["sensitivity"]
        n = sc.system.n
        fam = [_shapes(s, n, f"/task/sensitivity/shapes/{i}")
               for i, s in enumerate(sens["shapes"])]
        value = shape_sensitivity(sc.system, sens["tau"], _vector(sens["x_minus"], n,
                                  "/task/sensitivity/x_minus"), _vector(sens["c"], n,
                                  "/task/sensitivity/c"), fam, sc.steps)
        doc["shape_sensitivity"] = value
    _dump(out / "frobenius.json", doc)
    outputs.append("frobenius.json")
    return EXIT_OK if rep.passed else EXIT_CHECK_FAILED


def _task_viability(sc: Scenario, out: Path, outputs: list) -> int:
    task = sc.task
    M = _require_constraints(sc)
    lo, hi = task["boundary_box"]
    boundary = sample_boundary(M, (lo, hi), task.get("count"), eps=task.get("eps", 1e-7))
    t_grid = _grid(task.get("t_grid", [sc.t0]))
    cert = impulse_viability_check(sc.system, sc.control, M, boundary, t_grid,
                                   task.get("s_points", 65), task.get("eps", 1e-7))
    (out / "certificate.json").write_text(cert.to_json(indent=2) + "\n")
    traj = solve_ivp(sc.system, sc.control, sc.t0, sc.x0, (sc.t0, sc.T), tol=sc.tol,
                     steps=sc.steps)
    _write_trajectory(traj, out, outputs)
    audit = trajectory_viability_audit(traj, M, task.get("audit_tol", 1e-6))
    _dump(out / "audit.json", {"viable": audit.viable, "exit": audit.exit,
                               "checked": audit.checked})
    outputs += ["certificate.json", "audit.json"]
    return EXIT_OK if cert.certified and audit.viable else EXIT_CHECK_FAILED


def _task_stability(sc: Scenario, out: Path, outputs: list) -> int:
    task = sc.task
    certs = stability_check(sc.system, _vector(task["x_star"], sc.system.n, "/task/x_star"),
                            sc.control, task["l_list"], _grid(task.get("t_grid", [sc.t0])),
                            task.get("s_points", 65), task.get("sphere_points", 64))
    _dump(out / "stability.json", {"passed": all(c.passed for c in certs),
                                   "radii": [c.to_dict() for c in certs]})
    outputs.append("stability.json")
    return EXIT_OK if all(c.passed for c in certs) else EXIT_CHECK_FAILED


def _task_avoid(sc: Scenario, out: Path, outputs: list) -> int:
    task = sc.task
    n = sc.system.n
    shape = _shapes(task.get("shape", "flat"), n, "/task/shape")
    if task["mode"] == "min_budget":
        comp = task.get("component", 1) - 1
        if comp >= n:
            raise ScenarioError("/task/component", f"component must be at most {n}")
        res = min_budget_single_atom(sc.system, sc.t0, sc.x0, task["t_target"], task["target"],
                                     _grid(task["tau_grid"]), shape, comp,
                                     task.get("c_max", 10.0), claimed_c=task.get("claimed_c"),
                                     claimed_tau=task.get("claimed_tau"))
        doc = res.to_dict()
        if res.claimed is not None:
            cl = res.claimed
            doc["note"] = (
                f"weight {cl['c']:g} at tau={cl['tau']:g} reaches {cl['reached']:.10g}, "
                f"target {cl['target']:g}; minimal weight found is {res.c:.10g} at "
                f"tau={res.tau:g}" + ("" if cl["consistent"] else " (claimed weight does not "
                                                                   "reach the target)"))
        _dump(out / "min_budget.json", doc)
        outputs.append("min_budget.json")
        return EXIT_OK
    M = _require_constraints(sc)
    T_max = task.get("T_max", sc.T)
    best = search_multi_atom(sc.system, sc.t0, sc.x0, M, task["budget"],
                             _grid(task["tau_grid"]), _grid(task["c_grid"]),
                             task.get("max_atoms", 1), shape, T_max)
    best.to_csv(out / "table.csv")
    doc = best.best.to_dict()
    doc["survived"] = best.best.exit == "survived to T_max"
    outputs += ["table.csv", "best.json"]
    if "regular" in task:
        reg = search_regular_controls(sc.system, sc.t0, sc.x0, M, task["budget"],
                                      task["regular"].get("k", 4), T_max,
                                      task["regular"].get("levels", 8))
        reg.to_csv(out / "regular.csv")
        _dump(out / "regular.json", reg.best.to_dict())
        outputs += ["regular.csv", "regular.json"]
        doc["regular_T"] = reg.best.T
        doc["impulse_gap"] = best.best.T - reg.best.T
    _dump(out / "best.json", doc)
    return EXIT_OK


_TASKS = {"solve": _task_solve, "regularize": _task_regularize, "frobenius": _task_frobenius,
          "viability": _task_viability, "stability": _task_stability, "avoid": _task_avoid}


def _versions() -> dict:
    from . import __version__
    return {"distode": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def default_output_dir(name: str) -> Path:
    return Path(os.environ.get(OUTPUT_ENV, "distode_out")) / name


def run_scenario(sc: Scenario, out_dir=None, tol: Optional[float] = None,
                 steps: Optional[int] = None) -> int:
    """Run the scenario's task, write artifacts and the manifest; return the exit code.

    Task failures propagate as exceptions; the CLI maps them to exit code 1.
    """
    if tol is not None:
        sc.tol = float(tol)
    if steps is not None:
        sc.steps = int(steps)
    out = Path(out_dir) if out_dir is not None else default_output_dir(sc.name)
    out.mkdir(parents=True, exist_ok=True)
    outputs: list = []
    start = time.perf_counter()
    code = _TASKS[sc.task["type"]](sc, out, outputs)
    manifest = {
        "scenario": sc.name,
        "scenario_sha256": sc.digest,
        "task": sc.task["type"],
        "tol": sc.tol,
        "steps": sc.steps,
        "versions": _versions(),
        "wall_time_s": time.perf_counter() - start,
        "exit_code": code,
        "outputs": outputs,
    }
    _dump(out / "manifest.json", manifest)
    return code
