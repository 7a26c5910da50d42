"""Command line front end.

    distode run SCENARIO [-o DIR] [--tol X] [--steps N]
    distode gallery [--all | NAME ...] [-o DIR] [--jobs J]
    distode presets

Exit codes: 0 success, 2 a certificate or check failed, 1 error.
"""
from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import scenario as _sc

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="distode", description="ODEs driven by shaped delta-function inputs.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario file")
    run.add_argument("scenario", help="path to a scenario JSON file or a gallery name")
    run.add_argument("-o", "--output", help=f"output directory (default ${_sc.OUTPUT_ENV}/<name>)")
    run.add_argument("--tol", type=float, help="override the integration tolerance")
    run.add_argument("--steps", type=int, help="override the fast-time RK4 step count")

    gal = sub.add_parser("gallery", help="run bundled scenarios")
    gal.add_argument("names", nargs="*", help="gallery scenarios to run")
    gal.add_argument("--all", action="store_true", help="run every bundled scenario")
    gal.add_argument("-o", "--output", help="parent output directory")
    gal.add_argument("--jobs", type=int, default=1, help="run scenarios in parallel")

    sub.add_parser("presets", help="list built-in shapes and gallery scenarios")
    return parser


def _resolve(ref: str):
    path = Path(ref)
    if path.exists() or ref.endswith(".json"):
        return _sc.load_scenario(path)
    return _sc.load_scenario(_sc.gallery_path(ref))


def _run_one(ref, out, tol=None, steps=None) -> int:
    try:
        sc = _resolve(ref)
        return _sc.run_scenario(sc, out, tol, steps)
    except _sc.ScenarioError as exc:
        print(f"error: scenario {ref}: {exc}", file=sys.stderr)
    except Exception as exc:  # noqa: BLE001 - report any task failure with its module
        mod = type(exc).__module__.rsplit(".", 1)[-1]
        print(f"error: {ref}: [{mod}] {type(exc).__name__}: {exc}", file=sys.stderr)
    return _sc.EXIT_ERROR


def _gallery_job(args):
    name, parent = args
    out = Path(parent) / name if parent else None
    code = _run_one(name, out)
    expected = json.loads(_sc.gallery_path(name).read_text()).get("expected_exit", 0)
    return name, code, expected


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "presets":
        info = _sc.list_presets()
        for name, integral in info["shapes"].items():
            print(f"shape    {name:<8} integral={integral:.12g}")
        for name in info["scenarios"]:
            print(f"scenario {name}")
        return 0
    if args.command == "run":
        return _run_one(args.scenario, args.output, args.tol, args.steps)

    names = _sc.gallery_names() if args.all else args.names
    if not names:
        print("\n".join(_sc.gallery_names()))
        return 0
    jobs = [(name, args.output) for name in names]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            results = list(pool.map(_gallery_job, jobs))
    else:
        results = [_gallery_job(j) for j in jobs]
    status = 0
    for name, code, expected in results:
        ok = code == expected
        print(f"{'ok  ' if ok else 'FAIL'} {name} exit={code} expected={expected}")
        if not ok:
            status = _sc.EXIT_ERROR if code == _sc.EXIT_ERROR else _sc.EXIT_CHECK_FAILED
    return status


if __name__ == "__main__":
    sys.exit(main())
