import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlkg import classify as cl
from nlkg import evolve as ev
from nlkg.errors import NoEjectionWindow
from nlkg.grid import StateVec


def _synthetic(grid, params, t, termination=ev.HORIZON, t_star=None, **cols):
    n = t.size
    base = dict(E=np.ones(n), K0=np.ones(n), dQ=np.ones(n), amp=0.01 * np.ones(n),
                h1l2_norm=0.1 * np.ones(n), sigma=np.ones(n), S=np.ones(n), ux2=np.zeros(n),
                strichartz_acc=np.zeros(n))
    base.update(cols)
    series = {f: base.get(f, np.zeros(n)) for f in ev.SERIES_FIELDS}
    return ev.Trajectory(grid, params, float(t[1] - t[0]), t, series, t[-1:], [None],
                         termination, t_star, float(t[-1]), 3.87)


def test_rules_on_synthetic_series(params, grid):
    t = np.linspace(0, 10, 101)
    assert cl.classify(_synthetic(grid, params, t), params).outcome.kind == cl.SCATTER
    near = _synthetic(grid, params, t, dQ=np.full(t.size, 0.5 * params.delta_trap),
                      sigma=-np.ones(t.size))
    out = cl.classify(near, params).outcome
    assert out.kind == cl.TRAPPED and out.sigma == -1 and out.label == "TrappedByQ(-1)"
    bu = _synthetic(grid, params, t, termination=ev.BLOWUP, t_star=9.5)
    assert cl.classify(bu, params).outcome == cl.Outcome(cl.BLOWUP_KIND, t_star=9.5)
    neg = _synthetic(grid, params, t, K0=-np.ones(t.size))
    assert cl.classify(neg, params).outcome.kind == cl.UNDECIDED


def test_flip_only_touches_trapped_sign():
    assert cl.Outcome(cl.TRAPPED, 1).flipped() == cl.Outcome(cl.TRAPPED, -1)
    assert cl.Outcome(cl.SCATTER).flipped() == cl.Outcome(cl.SCATTER)


def test_trapped_horizon():
    class T:
        times = np.arange(6.0)
        series = {"dQ": np.array([1.0, 0.01, 0.01, 0.01, 1.0, 0.01])}

        def __getitem__(self, k):
            return self.series[k]

    class P:
        delta_trap = 0.03

    assert cl.trapped_horizon(T(), P()) == 4.0


def test_outcome_matrix_counts():
    S, B, Tr = cl.CELL_KINDS
    M = cl.outcome_matrix([(S, S), (S, B), (Tr, Tr), (S, cl.UNDECIDED)])
    assert M.sum() == 3 and M[0, 0] == 1 and M[0, 1] == 1 and M[2, 2] == 1


def test_real_outcomes_and_sign_symmetry(params, grid):
    opts = cl.ClassifyOpts(T_max=12.0, escalation=(1,), early_stop=True)
    make = cl.family_bump(params, grid)
    assert cl.classify_direction(make(-0.5, 0.0), params, opts).outcome.kind == cl.SCATTER
    assert cl.classify_direction(make(0.1, 0.0), params, opts).outcome.kind == cl.BLOWUP_KIND
    up = cl.classify_direction(make(0.05, 0.0), params, opts).outcome
    down = cl.classify_direction(-make(0.05, 0.0), params, opts).outcome
    assert up.kind == down.kind == cl.BLOWUP_KIND
    assert up.t_star == pytest.approx(down.t_star, abs=1e-12)


def test_symmetric_scan_self_check(params, grid):
    res = cl.nine_set_scan(cl.family_bump(params, grid), [-0.5, 0.1], [0.0], params,
                           cl.ClassifyOpts(T_max=12.0, escalation=(1,), early_stop=True),
                           symmetric=True)
    assert res.self_check_failures == [] and res.undecided == []
    assert res.matrix[0, 0] == 1 and res.matrix[1, 1] == 1


def test_ejection_rate_matches_k(params, sol):
    make = cl.family_eigen(params, sol.grid)
    tr = ev.evolve(make(1e-3, 0.0), ev.EvolveOpts(dt=0.002, T_max=6.0, record_every=0.01),
                   params, sol)
    fit = cl.ejection_fit(tr, params)
    assert fit.monotone
    assert fit.rate == pytest.approx(sol.k, rel=0.05)
    with pytest.raises(NoEjectionWindow):
        cl.ejection_fit(ev.evolve(make(1e-3, 0.0), ev.EvolveOpts(dt=0.002, T_max=0.2),
                                  params, sol), params)


def _light(d, E0=0.0):
    d = np.asarray(d, dtype=float)
    return cl.LightTrajectory(np.arange(d.size, dtype=float), d, np.sign(d - 1e-3), E0)


def test_audit_flags_a_return(params):
    exit_once = _light(np.r_[np.geomspace(1e-4, 1.0, 50)])
    back = _light(np.r_[np.geomspace(1e-4, 1e-2, 30), np.geomspace(1e-2, 1e-4, 30)])
    rep = cl.one_pass_audit([exit_once], params, JQ=0.0)
    assert rep.audited == 1 and rep.events > 0 and rep.violations == 0
    assert cl.one_pass_audit([back], params, JQ=0.0).violations > 0
    high = cl.one_pass_audit([_light([1.0], E0=1.0)], params, JQ=0.0)
    assert high.skipped == 1 and high.audited == 0


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(1e-6, 1.0), min_size=3, max_size=40))
def test_monotone_exits_never_violate(params, vals):
    d = np.sort(np.asarray(vals))
    assert cl.one_pass_audit([_light(d)], params, JQ=0.0).violations == 0
