import csv
import hashlib
import json
import math
import time

import pytest

from distode import cli
from distode.scenario import gallery_names, gallery_path, list_presets

GALLERY = gallery_names()


def run(*argv):
    return cli.main(list(map(str, argv)))


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_presets_listing(capsys):
    assert run("presets") == 0
    out = capsys.readouterr().out
    assert "shape    flat     integral=1" in out
    for name in ("sec4_viability", "sec4_stability", "sec3_exponential_jump"):
        assert f"scenario {name}" in out
    info = list_presets()
    assert set(info["shapes"]) >= {"flat", "tent", "front", "back"}
    assert all(abs(v - 1.0) <= 1e-8 for v in info["shapes"].values())


def test_exponential_jump_csv(tmp_path):
    assert run("run", "sec3_exponential_jump", "-o", tmp_path) == 0
    rows = read_rows(tmp_path / "trajectory.csv")
    plus = [r for r in rows if r["side"] == "+"]
    minus = [r for r in rows if r["side"] == "-"]
    assert float(plus[0]["t"]) == 0.0 and float(minus[0]["x_1"]) == 1.0
    assert abs(float(plus[0]["x_1"]) - math.e) <= 1e-8
    fast = read_rows(tmp_path / "fast_curve_1.csv")
    assert abs(float(fast[-1]["gamma_1"]) - math.e) <= 1e-8
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["residual_ok"] and report["contraction"]["lambda"] < 1


def test_avoidance_best(tmp_path):
    assert run("run", "sec5_avoidance", "-o", tmp_path) == 0
    best = json.loads((tmp_path / "best.json").read_text())
    assert abs(best["T"] - math.log(2)) <= 1e-3
    assert best["tau"] == [0.0]
    assert best["impulse_gap"] >= 1e-3
    assert read_rows(tmp_path / "table.csv")[0].keys() == {"tau", "c", "T"}


def test_min_budget_note(tmp_path):
    assert run("run", "intro_example1", "-o", tmp_path) == 0
    doc = json.loads((tmp_path / "min_budget.json").read_text())
    assert abs(doc["c"] - math.exp(-1)) <= 1e-4
    assert "0.5" in doc["note"] and not doc["claimed"]["consistent"]


def test_failed_check_exit_code(tmp_path):
    assert run("run", "frobenius_2d", "-o", tmp_path) == 2
    rep = json.loads((tmp_path / "frobenius.json").read_text())
    assert rep["pass"] is False


def _scenario(tmp_path, **changes):
    doc = json.loads(gallery_path("sec3_exponential_jump").read_text())
    doc.update(changes)
    path = tmp_path / "case.json"
    path.write_text(json.dumps(doc))
    return path


def test_malformed_expression(tmp_path, capsys):
    path = _scenario(tmp_path, f=["x1 * * 2"])
    assert run("run", path, "-o", tmp_path / "out") == 1
    assert "/f/0" in capsys.readouterr().err


def test_schema_violation_pointer(tmp_path, capsys):
    doc = json.loads(gallery_path("sec3_exponential_jump").read_text())
    doc["atoms"][0]["c"] = "big"
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    assert run("run", path) == 1
    assert "/atoms/0/c" in capsys.readouterr().err


def test_wrong_dimension(tmp_path, capsys):
    path = _scenario(tmp_path, f=["0", "0"])
    assert run("run", path, "-o", tmp_path / "out") == 1
    assert "/f" in capsys.readouterr().err


def test_missing_file(tmp_path):
    assert run("run", tmp_path / "nope.json") == 1


def test_unknown_gallery_name():
    assert run("run", "no_such_scenario") == 1


def test_env_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("DISTODE_OUTPUT_DIR", str(tmp_path))
    assert run("run", "sec4_stability") == 0
    assert (tmp_path / "sec4_stability" / "stability.json").exists()


def test_manifest(tmp_path):
    assert run("run", "sec4_viability", "-o", tmp_path) == 0
    man = json.loads((tmp_path / "manifest.json").read_text())
    digest = hashlib.sha256(gallery_path("sec4_viability").read_bytes()).hexdigest()
    assert man["scenario_sha256"] == digest
    assert {"distode", "numpy", "scipy", "python"} <= set(man["versions"])
    assert man["wall_time_s"] >= 0 and man["exit_code"] == 0
    for name in man["outputs"]:
        assert (tmp_path / name).exists()


def test_overrides_recorded(tmp_path):
    assert run("run", "sec3_exponential_jump", "-o", tmp_path, "--tol", "1e-9",
               "--steps", "256") == 0
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["tol"] == 1e-9 and man["steps"] == 256


@pytest.mark.parametrize("name", ["sec3_exponential_jump", "sec4_viability", "regularize_sec3"])
def test_rerun_is_bit_identical(tmp_path, name):
    assert run("run", name, "-o", tmp_path / "a") == run("run", name, "-o", tmp_path / "b")
    for path in sorted((tmp_path / "a").glob("*.csv")):
        assert path.read_bytes() == (tmp_path / "b" / path.name).read_bytes()


@pytest.mark.parametrize("name", GALLERY)
def test_gallery_scenario_under_ten_seconds(tmp_path, name):
    expected = json.loads(gallery_path(name).read_text()).get("expected_exit", 0)
    start = time.perf_counter()
    assert run("run", name, "-o", tmp_path) == expected
    assert time.perf_counter() - start < 10.0


def test_gallery_all(tmp_path, capsys):
    assert run("gallery", "--all", "-o", tmp_path, "--jobs", "4") == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == len(GALLERY)
    assert all(line.startswith("ok") for line in lines)
