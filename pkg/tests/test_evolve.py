import json

import numpy as np
import pytest

from nlkg import evolve as ev
from nlkg.errors import GridError
from nlkg.grid import StateVec, make_grid
from nlkg.soliton import ModelParams


def _bump(grid, a, width=1.0):
    return StateVec(grid, a * np.exp(-(grid.x / width) ** 2), np.zeros(grid.N))


def test_linear_flow_matches_free_cosine_solution():
    g = make_grid(30.0, 960)
    P = ModelParams(7.0)
    # single cosine mode: u = cos(xi x) cos(omega t)
    j = 12
    s0 = StateVec(g, np.cos(g.xi[j] * g.x), np.zeros(g.N))
    T = 1.3
    s = s0
    for _ in range(13):
        s = ev.step_strang(s, 0.1, P, nonlinear=False)
    w = np.sqrt(1 + g.xi[j] ** 2)
    assert np.max(np.abs(s.u - np.cos(g.xi[j] * g.x) * np.cos(w * T))) < 1e-12


def test_soliton_stays_put_for_short_times(params, sol):
    traj = ev.evolve(StateVec(sol.grid, sol.Q, np.zeros(sol.grid.N)),
                     ev.EvolveOpts(dt=0.001, T_max=0.5, light_cone_guard=False), params, sol)
    # the discrete profile seeds the unstable mode at round-off, amplified by exp(k t)
    assert traj["dQ"][-1] < 1e-5
    assert abs(traj["E"][-1] - traj["E"][0]) < 1e-9


def test_energy_drift_decreases_quadratically(params, sol):
    s0 = _bump(sol.grid, 0.5)
    drifts = []
    for dt in (0.004, 0.002):
        tr = ev.evolve(s0, ev.EvolveOpts(dt=dt, T_max=5.0), params, sol)
        drifts.append(np.max(np.abs(tr["E"] - tr["E"][0])))
    assert 3.0 < drifts[0] / drifts[1] < 5.0


def test_time_reversal(params, grid):
    s0 = _bump(grid, 0.8)
    s = s0
    for _ in range(200):
        s = ev.step_strang(s, 0.005, params)
    for _ in range(200):
        s = ev.step_strang(s, -0.005, params)
    assert grid.l2(s.u - s0.u) < 1e-11
    assert grid.l2(s.ud - s0.ud) < 1e-11


def test_blowup_time_converges_in_dt(params, sol):
    s0 = StateVec(sol.grid, 1.5 * sol.Q, np.zeros(sol.grid.N))
    ts = []
    for dt in (0.001, 0.0005):
        tr = ev.evolve(s0, ev.EvolveOpts(dt=dt, T_max=2.0), params, sol)
        assert tr.blew_up and tr["amp"][-1] > tr["amp"][0]
        ts.append(tr.t_star)
    assert abs(ts[0] - ts[1]) < 1e-3
    assert 0.14 < ts[1] < 0.16


def test_second_moment_identity(params, sol):
    s0 = _bump(sol.grid, 0.8)
    defects = []
    for dt in (0.002, 0.001):
        tr = ev.evolve(s0, ev.EvolveOpts(dt=dt, T_max=5.0), params, sol)
        rep = ev.payne_sattinger_monitor(tr, params)
        assert rep.energy_form_defect < 1e-12
        defects.append(rep.relative_defect)
    assert defects[1] < 1e-5
    assert 3.5 < defects[0] / defects[1] < 4.5


def test_convexity_before_blowup(params, sol):
    s0 = StateVec(sol.grid, 1.2 * sol.Q, np.zeros(sol.grid.N))
    tr = ev.evolve(s0, ev.EvolveOpts(dt=0.0005, T_max=3.0), params, sol)
    assert tr.blew_up
    assert ev.payne_sattinger_monitor(tr, params).eventually_convex


def test_virial_identity_without_cutoff_error(params, grid):
    s0 = StateVec(grid, 0.6 * np.exp(-grid.x ** 2), 0.3 * np.exp(-grid.x ** 2))
    reps = [ev.virial_monitor(s0, 12.0, params, dt=dt) for dt in (1e-3, 5e-4)]
    assert reps[0].exterior_energy < 1e-20
    assert reps[1].dV_defect < 5e-6 * abs(reps[1].K2)
    assert 3.5 < reps[0].dV_defect / reps[1].dV_defect < 4.5


def test_guards(params, grid):
    with pytest.raises(GridError):
        ev.evolve(_bump(grid, 0.1), ev.EvolveOpts(dt=0.9 * grid.h), params)
    with pytest.raises(GridError):
        ev.evolve(_bump(grid, 0.1), ev.EvolveOpts(T_max=40.0), params)
    with pytest.raises(ValueError):
        ev.EvolveOpts(dt=-1.0)


def test_trajectory_reaches_horizon_exactly(params, sol):
    tr = ev.evolve(_bump(sol.grid, 0.1), ev.EvolveOpts(dt=0.003, T_max=1.0), params, sol)
    assert tr.termination == ev.HORIZON
    assert tr.t_end >= 1.0 - 1e-12


def test_export_format(tmp_path, params, sol):
    tr = ev.evolve(_bump(sol.grid, 0.1), ev.EvolveOpts(dt=0.01, T_max=0.1,
                                                       record_every=0.05), params, sol)
    path = tmp_path / "s.ndjson"
    npz = tmp_path / "s.npz"
    tr.export(path, npz, config_hash="abc")
    lines = path.read_text().splitlines()
    head = json.loads(lines[0])
    assert head["config_hash"] == "abc" and head["p"] == 7.0 and "constants" in head
    rec = json.loads(lines[1])
    assert tuple(rec) == ev.EXPORT_FIELDS
    assert len(lines) == 1 + tr.times.size
    data = np.load(npz)
    assert data["u"].shape == (tr.snap_times.size, sol.grid.N)
