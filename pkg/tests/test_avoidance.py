import math

import numpy as np
import pytest

from distode import (ConstraintSet, ImpulseControl, SystemSpec, check_admissible,
                     min_budget_single_atom, search_multi_atom, search_regular_controls,
                     search_single_atom, solve_ivp, trajectory_viability_audit, viability_time)
from distode.avoidance import SURVIVED

from conftest import one_atom

LN2 = math.log(2)
TAUS = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5]
CS = [0.1, 0.2, 0.3, 0.4, 0.5]


def test_half_delta_time(avoid_sys, unit_interval):
    vt = viability_time(avoid_sys, one_atom(0.0, 0.5), 0.0, [1.0], unit_interval, 1.0)
    assert abs(vt.T - LN2) <= 1e-4
    assert vt.exit["kind"] == "slow"


def test_null_control_leaves_at_once(avoid_sys, unit_interval):
    vt = viability_time(avoid_sys, ImpulseControl.zero(1), 0.0, [1.0], unit_interval, 1.0)
    assert vt.T <= 1e-6


def test_survival(unit_interval):
    sys_ = SystemSpec.from_expressions(1, ["-x1"], [["0"]])
    vt = viability_time(sys_, ImpulseControl.zero(1), 0.0, [0.5], unit_interval, 2.0)
    assert vt.survived and vt.T == 2.0 and vt.exit == SURVIVED


def test_fast_exit_reports_atom_time(avoid_sys, unit_interval):
    vt = viability_time(avoid_sys, one_atom(0.25, 3.0), 0.0, [0.0], unit_interval, 1.0)
    assert vt.T == 0.25 and vt.exit["kind"] == "fast"


def test_start_outside(avoid_sys, unit_interval):
    with pytest.raises(ValueError):
        viability_time(avoid_sys, ImpulseControl.zero(1), 0.0, [2.0], unit_interval, 1.0)


def test_single_atom_search(avoid_sys, unit_interval, tmp_path):
    res = search_single_atom(avoid_sys, 0.0, [1.0], unit_interval, 0.5, TAUS, CS, T_max=1.0)
    best = res.best
    assert best.tau == 0.0 and best.c[0] == pytest.approx(0.5)
    assert abs(best.T - LN2) <= 1e-3
    assert len(res.table) == 1 + len(TAUS) * len(CS)
    assert check_admissible(best.control, 0.5, (0.0, 1.0)).admissible
    traj = solve_ivp(avoid_sys, best.control, 0.0, [1.0], (0.0, best.T - 1e-6))
    assert trajectory_viability_audit(traj, unit_interval, 1e-6).viable
    res.to_csv(tmp_path / "table.csv")
    lines = (tmp_path / "table.csv").read_text().splitlines()
    assert lines[0] == "tau,c,T" and len(lines) == len(res.table) + 1
    assert '"tau": [0.0]' in res.best_json()


def test_zero_budget_keeps_only_null(avoid_sys, unit_interval):
    res = search_single_atom(avoid_sys, 0.0, [1.0], unit_interval, 0.0, TAUS, CS)
    assert res.best.taus == () and res.best.T <= 1e-6
    assert res.skipped == len(TAUS) * len(CS)


def test_empty_grid(avoid_sys, unit_interval):
    with pytest.raises(ValueError, match="empty admissible grid"):
        search_single_atom(avoid_sys, 0.0, [1.0], unit_interval, 0.0, TAUS, CS,
                           include_null=False)


def test_larger_grid_never_worse(avoid_sys, unit_interval):
    small = search_single_atom(avoid_sys, 0.0, [1.0], unit_interval, 0.5, [0.0, 0.2], [0.1, 0.3])
    big = search_single_atom(avoid_sys, 0.0, [1.0], unit_interval, 0.5, [0.0, 0.1, 0.2],
                             [0.1, 0.3, 0.4])
    assert big.best.T >= small.best.T


def test_tie_break_prefers_early_and_small(unit_interval):
    sys_ = SystemSpec.from_expressions(1, ["-x1"], [["1"]])
    res = search_single_atom(sys_, 0.0, [0.0], unit_interval, 1.0, [0.2, 0.1], [0.2, 0.1],
                             T_max=0.5, include_null=False)
    assert res.best.T == 0.5
    assert res.best.tau == 0.1 and res.best.c[0] == pytest.approx(0.1)


def test_multi_atom_search(avoid_sys, unit_interval):
    res = search_multi_atom(avoid_sys, 0.0, [1.0], unit_interval, 0.5, [0.0, 0.3], [0.25, 0.5],
                            max_atoms=2)
    assert abs(res.best.T - LN2) <= 1e-3
    assert res.best.taus == (0.0,)
    with pytest.raises(ValueError):
        search_multi_atom(avoid_sys, 0.0, [1.0], unit_interval, 0.5, [0.0], [0.5], max_atoms=4)


def test_regular_controls_fall_short(avoid_sys, unit_interval):
    res = search_regular_controls(avoid_sys, 0.0, [1.0], unit_interval, 0.5, k=2, levels=4)
    assert res.best.T < LN2 - 1e-3
    assert res.best.masses[0] == pytest.approx(0.5)


def test_regular_controls_hold_boundary(avoid_sys, unit_interval):
    res = search_regular_controls(avoid_sys, 0.0, [1.0], unit_interval, 1.0, k=2, levels=2)
    assert res.best.T == 1.0 and res.best.exit == SURVIVED


def test_regular_zero_budget_is_uncontrolled(avoid_sys, unit_interval, tmp_path):
    res = search_regular_controls(avoid_sys, 0.0, [1.0], unit_interval, 0.0, k=3, levels=2)
    vt = viability_time(avoid_sys, ImpulseControl.zero(1), 0.0, [1.0], unit_interval, 1.0)
    assert res.best.T == pytest.approx(vt.T, abs=1e-6)
    res.to_csv(tmp_path / "reg.csv")
    assert (tmp_path / "reg.csv").read_text().splitlines()[0] == "m1,m2,m3,T"


def test_regular_bins_bounded(avoid_sys, unit_interval):
    with pytest.raises(ValueError):
        search_regular_controls(avoid_sys, 0.0, [1.0], unit_interval, 0.5, k=9)


def test_min_budget_oracle():
    sys_ = SystemSpec.from_expressions(1, ["x1"], [["1"]])
    res = min_budget_single_atom(sys_, 0.0, [0.0], 1.0, 1.0, np.linspace(0.0, 0.9, 10),
                                 claimed_c=0.5)
    assert res.tau == 0.0
    assert abs(res.c - math.exp(-1)) <= 1e-4
    assert res.claimed["reached"] == pytest.approx(math.e / 2, abs=1e-7)
    assert not res.claimed["consistent"]
    # later atoms need more: c(tau) = e^(tau - 1)
    for tau, c in res.table:
        assert c == pytest.approx(math.exp(tau - 1), abs=1e-6)


def test_min_budget_unreachable():
    sys_ = SystemSpec.from_expressions(1, ["x1"], [["1"]])
    with pytest.raises(ValueError):
        min_budget_single_atom(sys_, 0.0, [0.0], 1.0, 100.0, [0.0], c_max=1.0)
