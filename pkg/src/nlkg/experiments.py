"""Experiment runners behind the CLI subcommands, and the acceptance checks built on them.

Every runner takes a :class:`~nlkg.config.Config` and returns a
:class:`RunResult` of plain tables.  Runs are deterministic: fixed iteration
orders, fixed grids and a seeded PCG64 generator for sampled ensembles.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.fft import dct
from scipy.linalg import eigh

from . import spectral
from .classify import (CELL_KINDS, TRAPPED, ClassifyOpts, classify_direction, dynamics_grid, ejection_fit, family_bump, family_eigen,
                       nine_set_scan, one_pass_audit, outcome_matrix, soliton_on, trapped_horizon)
from .errors import BracketInvalid, NLKGError, NoContraction
from .evolve import EvolveOpts, evolve
from .grid import StateVec, make_grid, sobolev_norm
from .manifold import (W_MINUS, W_PLUS, ManifoldOpts, ShootOpts, center_stable_solve,
                       mu_compose, point_distance, scattering_data, shoot_threshold,
                       stable_family, trap_regression, transversal_family)
from .soliton import ModelParams, soliton_values


@dataclass
class Table:
    name: str
    columns: tuple
    rows: list = field(default_factory=list)


@dataclass
class RunResult:
    tables: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    incomplete: list = field(default_factory=list)
    extra: dict = field(default_factory=dict, repr=False)


@dataclass(frozen=True)
class Check:
    """One acceptance sub-check; ``known_gap`` marks a target recorded as unattainable."""

    cid: str
    title: str
    passed: bool
    measured: str
    target: str
    known_gap: bool = False

    @property
    def status(self):
        return "PASS" if self.passed else "FAIL"


def _g(v):
    return f"{v:.6g}"


# shared inputs -------------------------------------------------------------------------

def function_suite(grid, n=20):
    """Smooth, even, rapidly decaying test functions (analytic even extensions)."""
    x = grid.x
    fs = []
    for s in (0.5, 0.75, 1.0, 1.5, 2.0, 3.0):
        fs.append(np.exp(-(x / s) ** 2))
    for c in (0.5, 1.0, 2.0, 3.0, 5.0):
        fs.append(np.exp(-x ** 2 / 2) * np.cos(c * x))
    for q in (1, 2, 3):
        fs.append(1.0 / np.cosh(x) ** q)
    fs.append(x ** 2 * np.exp(-x ** 2))
    fs.append(np.exp(-(x ** 2 - 1) ** 2))
    fs.append(np.cosh(x) / np.cosh(2 * x))
    fs.append(np.exp(-x ** 2) * (1 - 2 * x ** 2))
    fs.append(np.exp(-x ** 4 / 4))
    fs.append(np.exp(-x ** 2 / 8) * np.cos(x) ** 2)
    return fs[:n]


def sampled_ensemble(grid, n, seed):
    """``exp(-(x/s)^2) cos(c x)`` with ``s ~ U[0.5, 2]`` and ``c ~ U[0, 2]`` from PCG64(seed)."""
    rng = np.random.Generator(np.random.PCG64(seed))
    pars = [(float(rng.uniform(0.5, 2.0)), float(rng.uniform(0.0, 2.0))) for _ in range(n)]
    return pars, [np.exp(-(grid.x / s) ** 2) * np.cos(c * grid.x) for s, c in pars]


def poschl_teller_k2(p):
    """``k^2`` from the closed-form bottom eigenvalue of ``-d^2 - p(p+1)/2 sech^2(beta x)``."""
    beta = (p - 1) / 2
    s = 0.5 * (-1 + np.sqrt(1 + 2 * p * (p + 1) / beta ** 2))
    return beta ** 2 * s ** 2 - 1


def dense_ground_k2(params, L, N):
    """``k^2`` from a dense eigensolve of the cosine-Galerkin matrix of ``L_+``."""
    g = make_grid(L, N)
    C = dct(np.eye(N), type=2, norm="ortho", axis=0)  # column j: transform of e_j
    Q = soliton_values(g.x, params)
    H = C.T @ (g.xi[:, None] ** 2 * C) + np.diag(1 - params.p * Q ** (params.p - 1))
    return float(-eigh(H, eigvals_only=True, subset_by_index=[0, 0])[0])


def _grid(e):
    return make_grid(e["L"], e["N"])


def _classify_opts(cfg, dt=None, **kw):
    return ClassifyOpts(T_max=cfg.model["T_max"], dt=dt or cfg.exp("scan")["dt"],
                        horizon_scale=cfg.run["horizon_scale"], **kw)


# spectral --------------------------------------------------------------------------------

def run_spectral(cfg):
    e = cfg.exp("spectral")
    c = cfg.constants
    res = RunResult()
    eig = Table("eigenvalues", ("p", "k2", "k2_closed_form", "k2_dense", "rel_err",
                                "zero_mode_Lplus", "zero_mode_Lminus"))
    g = _grid(e)
    for p in e["exponents"]:
        P = ModelParams(float(p))
        _, neg = spectral.ground_state(spectral.assemble_L("plus", P, g))
        k2 = -neg
        k2c = poschl_teller_k2(float(p))
        k2d = dense_ground_k2(P, e["dense_L"], e["dense_N"])
        zp, zm = spectral.zero_mode_residuals(P, g)
        eig.rows.append((p, k2, k2c, k2d, abs(k2 - k2c) / k2c, zp, zm))
    res.tables.append(eig)
    P = cfg.params
    rt = Table("resonance", ("operator", "W0_abs", "W0_abs_doubled", "threshold", "resonant",
                             "shrink_factor"), run_spectral_resonance(cfg))
    res.tables.append(rt)
    lam = spectral.table_lambda_grid(c["Lambda_max"], e["table_geom"], e["table_uniform"])
    op = spectral.assemble_L("plus", P, cfg_grid(cfg))
    m = spectral.spectral_measure(op, lam, keep_eigenfunctions=False)
    mt = Table("measure", ("lambda", "mu1", "mu2", "W_abs"))
    for row in zip(lam, m.mu1, m.mu2, np.abs(m.W)):
        mt.rows.append(row)
    res.tables.append(mt)
    return res


def cfg_grid(cfg):
    return make_grid(cfg.model["L"], cfg.model["N"])


def check_1(cfg):
    e = cfg.exp("spectral")
    g = _grid(e)
    out = []
    errs, dense, zms = [], [], []
    for p in e["exponents"]:
        P = ModelParams(float(p))
        _, neg = spectral.ground_state(spectral.assemble_L("plus", P, g))
        k2c = poschl_teller_k2(float(p))
        errs.append(abs(-neg - k2c) / k2c)
        dense.append(abs(dense_ground_k2(P, e["dense_L"], e["dense_N"]) - k2c) / k2c)
        zms.extend(spectral.zero_mode_residuals(P, g))
    out.append(Check("1.eigenvalue", "ground state k^2 = 15, 8, 3", max(errs) <= 1e-6,
                     f"max rel err {_g(max(errs))} (dense oracle {_g(max(dense))})", "<= 1e-6"))
    out.append(Check("1.zero_modes", "zero-mode residuals of L+ Q' and L- Q", max(zms) <= 1e-6,
                     f"max {_g(max(zms))}", "<= 1e-6"))
    return out


def check_2(cfg):
    rt = run_spectral_resonance(cfg)
    ok_res = all(r[4] for r in rt if r[0] in ("free", "cubic"))
    ok_non = all(not r[4] for r in rt if r[0].startswith("plus"))
    # round-off floor of resonance_check: 1e-13 (1 + ||V||_1)
    floor = 1e-13 / cfg.constants["tau_res"]
    shrink_ok = all(r[5] >= 4 or max(r[1], r[2]) < floor * r[3] for r in rt
                    if r[0] in ("free", "cubic"))
    stable_ok = all(abs(r[2] / r[1] - 1) <= 0.05 for r in rt if r[0].startswith("plus"))
    meas = "; ".join(f"{r[0]}: |W0|={_g(r[1])} doubled={_g(r[2])} resonant={r[4]}" for r in rt)
    return [Check("2.dichotomy", "resonant for free and -6 sech^2, not for p=7,5",
                  ok_res and ok_non, meas, "resonant = (true, true, false, false)"),
            Check("2.refinement", "|W(0)| shrinks >= 4x (resonant) / stable within 5%",
                  shrink_ok and stable_ok,
                  "; ".join(f"{r[0]}: ratio {_g(r[1] / r[2]) if r[2] else 'inf'}" for r in rt),
                  "shrink >= 4 or round-off; stable <= 5%")]


def run_spectral_resonance(cfg):
    e = cfg.exp("spectral")
    gr = make_grid(e["resonance_L"], e["resonance_N"])
    rows = []
    for name, op in (("plus_p7", spectral.assemble_L("plus", ModelParams(7.0), gr)),
                     ("plus_p5", spectral.assemble_L("plus", ModelParams(5.0), gr)),
                     ("free", spectral.free_op(gr)), ("cubic", spectral.cubic_op(gr))):
        r = spectral.resonance_check(op, tau=cfg.constants["tau_res"])
        shrink = r.W0_abs / r.W0_abs_doubled if r.W0_abs_doubled > 0 else float("inf")
        rows.append((name, r.W0_abs, r.W0_abs_doubled, r.threshold, r.resonant, shrink))
    return rows


def _reconstruct(f, m):
    F1, _ = spectral.distorted_ft(f, m, check=False)
    c = spectral.eigen_coefficients(f, m)
    z = np.zeros_like(F1)
    rec = spectral.inverse_distorted_ft(F1, z, m)
    return rec + (c @ m.eig_vectors if c.size else 0.0)


def check_3(cfg):
    e = cfg.exp("spectral")
    Lmax = cfg.constants["Lambda_max"]
    g = cfg_grid(cfg)
    lam = spectral.table_lambda_grid(Lmax, e["table_geom"], e["table_uniform"])
    mf = spectral.spectral_measure(spectral.free_op(g), lam, keep_eigenfunctions=False)
    xi = np.sqrt(lam)
    err_free = max(np.max(np.abs(mf.mu1 * 2 * np.pi * xi - 1)),
                   np.max(np.abs(mf.mu2 * 2 * np.pi / xi - 1)))
    P = cfg.params
    op = spectral.assemble_L("plus", P, g)
    m7 = spectral.spectral_measure(op, lam, keep_eigenfunctions=False)
    lo, hi = e["slope_window"]
    sel = (lam >= lo) & (lam <= hi)
    slope = float(np.polyfit(np.log(lam[sel]), np.log(m7.mu1[sel]), 1)[0])
    a1 = float(m7.mu1[-1] * 2 * np.pi * xi[-1])
    a2 = float(m7.mu2[-1] * 2 * np.pi / xi[-1])
    m = spectral.spectral_measure(op, Lambda_max=Lmax)
    suite = function_suite(g, e["suite_size"])
    pars = max(spectral.parseval_defect(f, m) for f in suite)
    mr = spectral.spectral_measure(op, Lambda_max=e["roundtrip_Lambda_max"])
    rt = max(g.l2(_reconstruct(f, mr) - f) / g.l2(f) for f in suite)
    rt_base = max(g.l2(_reconstruct(f, m) - f) / g.l2(f) for f in suite)
    return [Check("3.free", "free measure matches 1/(2 pi xi) and xi/(2 pi)", err_free <= 1e-6,
                  f"max rel err {_g(err_free)}", "<= 1e-6"),
            Check("3.slope", "small-lambda log-log slope of mu1 (p=7)", abs(slope - 0.5) <= 0.05,
                  _g(slope), "0.5 +- 0.05"),
            Check("3.asymptotics", "mu1, mu2 against free asymptotics at Lambda_max",
                  abs(a1 - 1) <= 0.05 and abs(a2 - 1) <= 0.05,
                  f"mu1 ratio {_g(a1)}, mu2 ratio {_g(a2)}", "within 5%"),
            Check("3.parseval", f"Parseval defect over {len(suite)} functions", pars <= 1e-6,
                  _g(pars), "<= 1e-6"),
            Check("3.roundtrip", "distorted FT round trip", rt <= 1e-6,
                  f"{_g(rt)} at Lambda={_g(e['roundtrip_Lambda_max'])} "
                  f"({_g(rt_base)} at Lambda={_g(Lmax)})", "<= 1e-6")]


def check_4(cfg):
    g = cfg_grid(cfg)
    P = cfg.params
    worst = max(spectral.intertwining_defect(f, P, g) / sobolev_norm(f, 2.0, g)
                for f in function_suite(g))
    return [Check("4.intertwining", "||(U L+ - L- U) f|| / ||f||_H2 over the suite",
                  worst <= 1e-6, _g(worst), "<= 1e-6")]


# decay probe -------------------------------------------------------------------------------

def run_decay_probe(cfg):
    e = cfg.exp("decay_probe")
    g = _grid(e)
    lam, w = spectral.lambda_quadrature(e["Lambda_max"], panel=e["panel"])
    pars, fs = sampled_ensemble(g, e["ensemble"], cfg.run["seed"])
    t = Table("decay_ratios", ("potential", "member", "s", "c", "T", "ratio"))
    for name, op in (("plus_p%g" % cfg.params.p, spectral.assemble_L("plus", cfg.params, g)),
                     ("cubic", spectral.cubic_op(g))):
        m = spectral.spectral_measure(op, lam, w)
        for i, (f, (s, c)) in enumerate(zip(fs, pars)):
            for T in e["T"]:
                r = spectral.local_decay_ratio(f, T, m, dt=e["dt"], x_max=e["x_max"])
                t.rows.append((name, i, s, c, T, r))
    return RunResult([t])


def check_5(cfg, result=None):
    rows = (result or run_decay_probe(cfg)).tables[0].rows
    Ts = cfg.exp("decay_probe")["T"]
    by = {}
    for name, i, s, c, T, r in rows:
        by.setdefault((name, i), {})[T] = r
    growth, mono = [], []
    for (name, i), d in by.items():
        if name == "cubic":
            seq = [d[T] for T in Ts]
            mono.append(all(b > a for a, b in zip(seq, seq[1:])))
        else:
            growth.append(d[Ts[-1]] / d[Ts[-2]] - 1)
    gmax = max(growth)
    return [Check("5.stable", f"p=7 ratio growth from T={_g(Ts[-2])} to T={_g(Ts[-1])}",
                  gmax <= 0.10,
                  f"max growth {_g(gmax)}", "<= 10%"),
            Check("5.resonant", "cubic ratio increases with T", all(mono),
                  f"{sum(mono)}/{len(mono)} members monotone", "all members")]


# evolve ---------------------------------------------------------------------------------------

def _datum(cfg, family, a, b, grid):
    P = cfg.params
    if family == "bump":
        return family_bump(P, grid)(a, b)
    if family == "eigen":
        return family_eigen(P, grid)(a, b)
    raise NLKGError(f"unknown family {family!r}")


def run_evolve(cfg):
    e = cfg.exp("evolve")
    P = cfg.params
    g = _grid(e)
    st = dynamics_grid(_datum(cfg, e["family"], e["a"], e["b"], g), e["T_max"],
                       _classify_opts(cfg))
    opts = EvolveOpts(dt=cfg.model["dt"], T_max=e["T_max"], B_max=cfg.model["B_max"],
                      record_every=e["record_every"])
    tr = evolve(st, opts, P, soliton_on(P, st.grid))
    res = RunResult(summary=dict(termination=tr.termination, t_star=tr.t_star,
                                 t_end=tr.t_end, grid_N=st.grid.N, grid_L=st.grid.L))
    res.extra["trajectory"] = tr
    return res


def check_6(cfg):
    e = cfg.exp("integrator")
    P = cfg.params
    dt = cfg.model["dt"]
    g = _grid(e)
    datum = family_bump(P, g)(-0.05, 0.0)
    copts = _classify_opts(cfg)
    st = dynamics_grid(datum, e["T_drift"], copts)
    sol = soliton_on(P, st.grid)
    tr = evolve(st, EvolveOpts(dt=dt, T_max=e["T_drift"]), P, sol)
    E = tr["E"]
    drift = float(np.max(np.abs(E - E[0])) / abs(E[0]))
    # dt convergence of the solution at a fixed time
    T = e["slope_T"]
    st2 = dynamics_grid(datum, T, copts)
    sol2 = soliton_on(P, st2.grid)
    ref = evolve(st2, EvolveOpts(dt=min(e["slope_dts"]) / 8, T_max=T, record_every=T), P, sol2)
    errs = []
    for d in e["slope_dts"]:
        run = evolve(st2, EvolveOpts(dt=d, T_max=T, record_every=T), P, sol2)
        errs.append(st2.grid.l2(run.final_state.u - ref.final_state.u))
    slope = float(np.polyfit(np.log(e["slope_dts"]), np.log(errs), 1)[0])
    # time reversal
    Tr = e["reversal_T"]
    st3 = dynamics_grid(datum, 2 * Tr, copts)
    sol3 = soliton_on(P, st3.grid)
    fw = evolve(st3, EvolveOpts(dt=dt, T_max=Tr, record_every=Tr), P, sol3).final_state
    bw = evolve(fw.reversed(), EvolveOpts(dt=dt, T_max=Tr, record_every=Tr), P, sol3).final_state
    rev = float(np.sqrt(st3.grid.l2(bw.u - st3.u) ** 2 + st3.grid.l2(bw.ud + st3.ud) ** 2)
                / st3.norm())
    # static soliton
    solg = soliton_on(P, g)
    trq = evolve(solg.state, EvolveOpts(dt=dt, T_max=e["static_T"], light_cone_guard=False), P,
                 solg)
    dq = trq["dQ"]
    mask = trq.times <= e["static_T"]
    dmax = float(np.max(dq[mask]))
    over = np.nonzero(dq > 1e-4)[0]
    t_cross = float(trq.times[over[0]]) if over.size else float("nan")
    return [Check("6.drift", f"relative energy drift on [0, {_g(e['T_drift'])}] at dt={_g(dt)}",
                  drift <= 1e-6, _g(drift), "<= 1e-6"),
            Check("6.slope", "dt-convergence slope of the solution", abs(slope - 2) <= 0.1,
                  _g(slope), "2 +- 0.1"),
            Check("6.reversal", "time-reversal round trip", rev <= 1e-8, _g(rev), "<= 1e-8"),
            Check("6.static_Q", f"static soliton d_Q on [0, {_g(e['static_T'])}]", dmax <= 1e-4,
                  f"max {_g(dmax)}; exceeds 1e-4 at t={_g(t_cross)} ({trq.termination})",
                  "<= 1e-4", known_gap=True)]


# nine-set scan -------------------------------------------------------------------------------

@dataclass
class Witness:
    cell: tuple
    source: str
    datum: StateVec = field(repr=False)
    horizon_fwd: float = 0.0
    horizon_bwd: float = 0.0
    outcome: tuple = ()
    verified: Optional[bool] = None


def _direction(state, params, cfg, horizon, escalate=True):
    opts = ClassifyOpts(T_max=horizon, dt=cfg.exp("scan")["dt"],
                        escalation=(1, 2, 4) if escalate else (1,))
    return classify_direction(state, params, opts).outcome.kind


def _threshold_datum(family, bracket, params, cfg, cache, key):
    if key not in cache:
        s = cfg.exp("shoot")
        copts = ClassifyOpts(T_max=cfg.model["T_max"], dt=s["dt"], early_stop=True,
                             horizon_scale=cfg.run["horizon_scale"])
        cache[key] = shoot_threshold(family, tuple(bracket), params, copts,
                                     ShootOpts(width_tol=s["width_tol"], max_iter=s["max_iter"]))
    return cache[key]


def measured_trap_time(state, params, dt, T=12.0):
    """``T_trap`` of a datum: first exit from ``d_Q <= delta_trap``."""
    st = dynamics_grid(state, T, ClassifyOpts())
    tr = evolve(st, EvolveOpts(dt=dt, T_max=T), params, soliton_on(params, st.grid))
    return trapped_horizon(tr, params)


def threshold_witnesses(cfg, cache=None):
    """Witnesses for the five cells with a trapped direction, built from threshold shooting."""
    cache = {} if cache is None else cache
    P = cfg.params
    e = cfg.exp("scan")
    g = _grid(e)
    sol = soliton_on(P, g)
    th = e["threshold"]
    m = th["mu_minus"]
    dt = e["dt"]
    T0 = cfg.model["T_max"] * cfg.run["horizon_scale"]
    out = []
    for sign, key in ((1.0, "W_minus"), (-1.0, "W_plus")):
        r = _threshold_datum(transversal_family(sol, sign * m), th["bracket"], P, cfg, cache,
                             ("transversal", sign * m))
        d = r.datum
        Tt = measured_trap_time(d, P, dt)
        out.append(Witness((TRAPPED, None), f"threshold {key}", d, 0.45 * Tt, T0))
        out.append(Witness((None, TRAPPED), f"reversed threshold {key}", d.reversed(), T0,
                           0.45 * Tt))
    bump = family_bump(P, g)
    r = _threshold_datum(lambda a: bump(a, 0.0), th["symmetric_bracket"], P, cfg, cache,
                         ("bump", 0.0))
    Tt = measured_trap_time(r.datum, P, dt)
    out.append(Witness((TRAPPED, TRAPPED), "threshold bump", r.datum, 0.45 * Tt, 0.45 * Tt))
    for w in out:
        f = _direction(w.datum, P, cfg, w.horizon_fwd, escalate=w.horizon_fwd == T0)
        b = _direction(w.datum.reversed(), P, cfg, w.horizon_bwd, escalate=w.horizon_bwd == T0)
        w.outcome = (f, b)
        w.cell = (f, b)
    return out


def verify_witness(w, params, cfg):
    """Re-classify at doubled horizon without escalation; True when the cell is unchanged."""
    f = _direction(w.datum, params, cfg, 2 * w.horizon_fwd, escalate=False)
    b = _direction(w.datum.reversed(), params, cfg, 2 * w.horizon_bwd, escalate=False)
    return (f, b) == tuple(w.outcome)


def run_scan(cfg, cache=None):
    P = cfg.params
    e = cfg.exp("scan")
    g = _grid(e)
    opts = _classify_opts(cfg)
    rows, trajs, witnesses, undecided, bad, cells = [], [], [], [], [], []
    T0 = opts.T_max * opts.horizon_scale
    for name in ("bump", "eigen"):
        fam = e["families"][name]
        make = family_bump(P, g) if name == "bump" else family_eigen(P, g)
        sr = nine_set_scan(make, fam["a"], fam["b"], P, opts, name, symmetric=name == "bump")
        rows.extend(sr.rows)
        trajs.extend(sr.trajectories)
        undecided.extend((name, a, b) for a, b in sr.undecided)
        bad.extend((name, a, b) for a, b in sr.self_check_failures)
        for r in sr.rows:
            cells.append((r.forward.split("(")[0], r.backward.split("(")[0]))
        for cell, r in sorted(sr.witnesses.items()):
            if all(k in CELL_KINDS for k in cell) and cell not in {w.cell for w in witnesses}:
                witnesses.append(Witness(cell, f"{name} a={r.a:g} b={r.b:g}",
                                         make(r.a, r.b), T0, T0, cell))
    have = {w.cell for w in witnesses}
    for w in threshold_witnesses(cfg, cache):
        cells.append(w.cell)
        if w.cell not in have and all(k in CELL_KINDS for k in w.cell):
            witnesses.append(w)
            have.add(w.cell)
    for w in witnesses:
        w.verified = verify_witness(w, P, cfg)
    mat = outcome_matrix(cells)
    scan_t = Table("scan_rows", ("family", "a", "b", "E", "excess", "forward", "backward",
                                 "t_star_fwd", "t_star_bwd", "final_dQ_fwd", "final_dQ_bwd"))
    for r in rows:
        scan_t.rows.append((r.family, r.a, r.b, r.E, r.excess, r.forward, r.backward,
                            r.t_star_fwd, r.t_star_bwd, r.final_dQ_fwd, r.final_dQ_bwd))
    mat_t = Table("matrix", ("forward",) + CELL_KINDS)
    for i, k in enumerate(CELL_KINDS):
        mat_t.rows.append((k,) + tuple(int(v) for v in mat[i]))
    wit_t = Table("witnesses", ("forward", "backward", "source", "horizon_fwd", "horizon_bwd",
                                "verified_doubled"))
    for w in sorted(witnesses, key=lambda w: (CELL_KINDS.index(w.cell[0]),
                                              CELL_KINDS.index(w.cell[1]))):
        wit_t.rows.append((w.cell[0], w.cell[1], w.source, w.horizon_fwd, w.horizon_bwd,
                           w.verified))
    res = RunResult([mat_t, wit_t, scan_t])
    missing = [(a, b) for a in CELL_KINDS for b in CELL_KINDS if (a, b) not in have]
    if missing:
        res.incomplete.append(f"cells without witness: {missing}")
    if undecided:
        res.incomplete.append(f"{len(undecided)} undecided scan points")
    res.summary = dict(cells_witnessed=len(have & {(a, b) for a in CELL_KINDS
                                                   for b in CELL_KINDS}),
                       undecided=len(undecided), symmetric_self_check_failures=len(bad),
                       all_verified=all(w.verified for w in witnesses))
    res.extra.update(trajectories=trajs, witnesses=witnesses, JQ=soliton_on(P, g).JQ)
    return res


def check_7(cfg, result=None):
    res = result or run_scan(cfg)
    ws = res.extra["witnesses"]
    have = {w.cell for w in ws}
    n = sum((a, b) in have for a in CELL_KINDS for b in CELL_KINDS)
    ver = sum(bool(w.verified) for w in ws)
    return [Check("7.cells", "witnesses for all nine (forward, backward) cells", n == 9,
                  f"{n}/9 cells", "9/9"),
            Check("7.doubled", "each witness re-verified at doubled horizon", ver == len(ws) and n == 9,
                  f"{ver}/{len(ws)} verified", "all")]


# ejection --------------------------------------------------------------------------------------

def run_eject(cfg):
    e = cfg.exp("eject")
    P = cfg.params
    g = _grid(cfg.exp("scan"))
    sol = soliton_on(P, g)
    t = Table("ejection", ("a", "rate", "rate_over_k", "rate_lambda", "t0", "t1", "R",
                           "monotone", "C_lambda_minus"))
    res = RunResult([t])
    for a in e["amplitudes"]:
        st = dynamics_grid(mu_compose(sol, a, 0.0), e["T_max"], ClassifyOpts())
        tr = evolve(st, EvolveOpts(dt=e["dt"], T_max=e["T_max"], record_every=e["record_every"]),
                    P, soliton_on(P, st.grid))
        try:
            f = ejection_fit(tr, P)
        except NLKGError as exc:
            res.incomplete.append(f"a={a:g}: {exc}")
            continue
        t.rows.append((a, f.rate, f.rate / sol.k, f.rate_lambda, f.window[0], f.window[1], f.R,
                       f.monotone, f.C_lambda_minus))
    res.summary = dict(k=sol.k, launches=len(e["amplitudes"]), fitted=len(t.rows))
    return res


def check_8(cfg, result=None):
    res = result or run_eject(cfg)
    rows = res.tables[0].rows
    tol = cfg.exp("eject")["tolerance"]
    worst = max(abs(r[2] - 1) for r in rows) if rows else float("inf")
    mono = all(r[7] for r in rows)
    n = len(cfg.exp("eject")["amplitudes"])
    return [Check("8.rate", f"fitted ejection rate / k over {n} launches",
                  len(rows) == n and worst <= tol and mono,
                  f"max |rate/k - 1| = {_g(worst)}, {len(rows)}/{n} fitted, monotone={mono}",
                  f"within {tol:.0%}")]


# one-pass audit -------------------------------------------------------------------------------

def run_onepass(cfg, scan=None):
    scan = scan or run_scan(cfg)
    P = cfg.params
    rep = one_pass_audit(scan.extra["trajectories"], P, scan.extra["JQ"],
                         cfg.exp("onepass")["n_radii"])
    t = Table("onepass", ("audited", "skipped", "events", "violations", "sign_constant",
                          "sign_checked", "min_reapproach_ratio"))
    mr = float(np.min(rep.reapproach_ratios)) if rep.reapproach_ratios.size else float("nan")
    t.rows.append((rep.audited, rep.skipped, rep.events, rep.violations, rep.sign_constant,
                   rep.sign_checked, mr))
    res = RunResult([t])
    res.extra["report"] = rep
    return res


def check_9(cfg, result=None, scan=None):
    rep = (result or run_onepass(cfg, scan)).extra["report"]
    return [Check("9.violations", "one-pass audit over admissible scan trajectories",
                  rep.audited >= 100 and rep.violations == 0,
                  f"{rep.violations} violations in {rep.events} exits over {rep.audited} "
                  "trajectories", ">= 100 audited, 0 violations"),
            Check("9.sign", "sign functional constant after final exit",
                  rep.sign_checked > 0 and rep.sign_constant == rep.sign_checked,
                  f"{rep.sign_constant}/{rep.sign_checked}", "100%")]


# threshold shooting --------------------------------------------------------------------------

def run_shoot(cfg, cache=None):
    cache = {} if cache is None else cache
    P = cfg.params
    s = cfg.exp("shoot")
    g = _grid(cfg.exp("scan"))
    sol = soliton_on(P, g)
    log = Table("shooting_log", ("family", "iteration", "a_lo", "a_hi", "outcome_lo",
                                 "outcome_hi", "T_trap"))
    summ = Table("shooting", ("family", "a_lo", "a_hi", "width", "T_trap", "branch",
                              "backward", "slope_times_k"))
    res = RunResult([summ, log])
    try:
        shoot_threshold(stable_family(sol), tuple(s["stable_bracket"]), P,
                        ClassifyOpts(T_max=cfg.model["T_max"], dt=s["dt"], early_stop=True))
        res.summary["stable_family"] = "bracket valid"
    except BracketInvalid as exc:
        res.summary["stable_family"] = f"BracketInvalid: {exc}"
    results = []
    for m in s["mu_minus"]:
        name = f"transversal mu_minus={m:g}"
        r = _threshold_datum(transversal_family(sol, m), s["bracket"], P, cfg, cache,
                             ("transversal", m))
        results.append(r)
        for row in r.log:
            log.rows.append((name,) + tuple(row))
        summ.rows.append((name, r.bracket[0], r.bracket[1], r.width, r.T_trap, r.branch,
                          r.backward, trap_regression(r) * sol.k))
    res.extra.update(results=results, k=sol.k)
    return res


def check_10(cfg, result=None):
    res = result or run_shoot(cfg)
    k = res.extra["k"]
    rs = res.extra["results"]
    target = cfg.exp("shoot")["target_width"]
    literal = res.summary["stable_family"]
    widths = [r.width for r in rs]
    T_min = min(r.T_trap for r in rs)
    slopes = [trap_regression(r) * k for r in rs]
    branches = sorted(r.branch for r in rs)
    return [Check("10.stable_family", "bisection on Q + a(rho, -k rho) over (-0.2, 0.2)",
                  literal == "bracket valid", literal, "endpoint outcomes differ",
                  known_gap=True),
            Check("10.width", "transversal-family bisection width and trapped horizon",
                  max(widths) <= target and T_min >= 20 / k,
                  f"max width {_g(max(widths))}, min T_trap {_g(T_min)} (20/k = {_g(20 / k)})",
                  f"width <= {target:g}, T_trap >= 20/k"),
            Check("10.slope", "T_trap vs -log(width) slope times k",
                  all(abs(sl - 1) <= 0.15 for sl in slopes),
                  ", ".join(_g(sl) for sl in slopes), "1 +- 15%"),
            Check("10.branches", "backward classification of the two branches",
                  branches == sorted([W_MINUS, W_PLUS]), ", ".join(branches),
                  "one W_plus_like, one W_minus_like")]


# center-stable graph -----------------------------------------------------------------------------

def manifold_datum(g, sol, m, delta):
    """``(w0, mu_minus0)`` with ``||(w0, 0)||_H = delta/2`` along a projected bump and ``mu_- = delta/2``."""
    bump = spectral.continuous_part(np.exp(-g.x ** 2), m)
    nb = StateVec(g, bump, np.zeros(g.N)).norm()
    return StateVec(g, bump * (delta / 2) / nb, np.zeros(g.N)), delta / 2


def run_manifold(cfg):
    e = cfg.exp("manifold")
    P = cfg.params
    g = _grid(e)
    sol = soliton_on(P, g)
    m = spectral.spectral_measure(spectral.assemble_L("plus", P, g),
                                  Lambda_max=cfg.constants["Lambda_max"])
    mo = ManifoldOpts(T=e["T"], tau=e["tau"], tol=e["tol"], max_iter=e["max_iter"])
    t = Table("manifold", ("nu", "mu_minus0", "mu_plus0", "residual", "energy_defect",
                           "relative_energy_defect", "iterations", "tangent_plane"))
    res = RunResult([t])
    pts = {}
    for d in e["deltas"]:
        w0, mm = manifold_datum(g, sol, m, d)
        try:
            pt = center_stable_solve(w0, mm, P, mo, m, sol)
        except NoContraction as exc:
            res.incomplete.append(f"nu={d:g}: {exc}")
            continue
        sd = scattering_data(pt, P)
        pts[d] = pt
        t.rows.append((d, mm, pt.mu_plus0, pt.residual, sd.identity_defect,
                       sd.identity_defect / abs(sd.energy), pt.iterations,
                       abs(2 * sol.k * pt.mu_plus0)))
    conv = [r for r in t.rows]
    if len(conv) >= 2:
        slope = float(np.polyfit(np.log([r[0] for r in conv]),
                                 np.log([abs(r[2]) for r in conv]), 1)[0])
    else:
        slope = float("nan")
    nu = cfg.constants["nu"]
    uniq = float("nan")
    if nu in pts or any(abs(d - nu) < 1e-15 for d in pts):
        d = min(pts, key=lambda v: abs(v - nu))
        w0, mm = manifold_datum(g, sol, m, d)
        pt2 = center_stable_solve(w0, mm, P, ManifoldOpts(T=e["T"], tau=e["tau"], tol=e["tol"],
                                                          max_iter=e["max_iter"], seed="free"),
                                  m, sol)
        uniq = point_distance(pts[d], pt2, P)
    res.summary = dict(tangency_slope=slope, uniqueness_distance=uniq, tol=e["tol"], nu=nu,
                       k=sol.k)
    res.tables.append(Table("tangency", ("slope", "uniqueness_distance"), [(slope, uniq)]))
    return res


def check_11(cfg, result=None):
    res = result or run_manifold(cfg)
    rows = res.tables[0].rows
    nu = cfg.constants["nu"]
    e = cfg.exp("manifold")
    small = [d for d in e["deltas"] if d <= nu]
    conv = {r[0]: r for r in rows}
    ok_conv = all(d in conv and conv[d][3] <= 1e-8 for d in small)
    worst_res = max((conv[d][3] for d in small if d in conv), default=float("inf"))
    worst_E = max((conv[d][5] for d in small if d in conv), default=float("inf"))
    slope = res.summary["tangency_slope"]
    uniq = res.summary["uniqueness_distance"]
    tol = res.summary["tol"]
    return [Check("11.convergence", f"fixed point converges for nu <= {nu:g}", ok_conv,
                  f"{sum(d in conv for d in small)}/{len(small)} converged, max residual "
                  f"{_g(worst_res)}", "residual <= 1e-8"),
            Check("11.tangency", "slope of log|mu_+(0)| vs log nu", abs(slope - 2) <= 0.2,
                  _g(slope), "2 +- 0.2"),
            Check("11.energy", "energy identity E = J(Q) + ||w_inf||^2/2", worst_E <= 1e-3,
                  f"max relative defect {_g(worst_E)}", "<= 1e-3"),
            Check("11.uniqueness", "zero and free-flow seeds agree", uniq <= 10 * tol,
                  _g(uniq), f"<= {10 * tol:g}")]


# report ------------------------------------------------------------------------------------------

def run_report(cfg, progress=None):
    """Evaluate the selected acceptance criteria; sub-results are shared between criteria."""
    crit = cfg.exp("report")["criteria"]
    checks = []
    cache = {}
    scan = None

    def note(i):
        if progress:
            progress(i)

    for i in crit:
        note(i)
        if i == 1:
            checks += check_1(cfg)
        elif i == 2:
            checks += check_2(cfg)
        elif i == 3:
            checks += check_3(cfg)
        elif i == 4:
            checks += check_4(cfg)
        elif i == 5:
            checks += check_5(cfg)
        elif i == 6:
            checks += check_6(cfg)
        elif i in (7, 9):
            if scan is None:
                scan = run_scan(cfg, cache)
            checks += check_7(cfg, scan) if i == 7 else check_9(cfg, scan=scan)
        elif i == 8:
            checks += check_8(cfg)
        elif i == 10:
            checks += check_10(cfg, run_shoot(cfg, cache))
        elif i == 11:
            checks += check_11(cfg)
        else:
            raise NLKGError(f"unknown criterion {i}")
    t = Table("checks", ("criterion", "title", "status", "measured", "target", "known_gap"))
    for c in checks:
        t.rows.append((c.cid, c.title, c.status, c.measured, c.target, c.known_gap))
    res = RunResult([t])
    res.summary = dict(passed=sum(c.passed for c in checks), total=len(checks),
                       unexpected_failures=[c.cid for c in checks
                                            if not c.passed and not c.known_gap])
    res.extra["checks"] = checks
    return res
