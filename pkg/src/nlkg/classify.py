"""Outcome classification of trajectories, nine-set scans, ejection fits and one-pass audits."""
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import NoEjectionWindow
from .evolve import BLOWUP, EvolveOpts, evolve, support_radius
from .grid import StateVec, extend_state
from .soliton import energy, soliton_profile

BLOWUP_KIND = "BlowUp"
SCATTER = "ScatterToZero"
TRAPPED = "TrappedByQ"
UNDECIDED = "Undecided"
CELL_KINDS = (SCATTER, BLOWUP_KIND, TRAPPED)


@dataclass(frozen=True)
class Outcome:
    kind: str
    sigma: int = 0
    t_star: Optional[float] = None

    @property
    def label(self):
        if self.kind == TRAPPED:
            return f"{TRAPPED}({'+' if self.sigma > 0 else '-'}1)"
        return self.kind

    def flipped(self):
        """Image under ``u -> -u``."""
        return replace(self, sigma=-self.sigma) if self.kind == TRAPPED else self


@dataclass(frozen=True)
class ClassifyOpts:
    """Classification settings.

    ``M_star=None`` uses ``sqrt(4p/(p-1) max(E, J(Q) + eps^2))``, which bounds
    ``||(u, u_t)||`` for every state with ``K0 >= 0``.  Scattering requires, on
    the final window, ``K0 > 0``, ``d_Q >= delta_star``, ``max|u| <= amp_scatter``
    and the norm bound.
    """

    T_max: float = 40.0
    dt: float = 0.005
    h: float = 1.0 / 32
    tail_fraction: float = 0.25
    window: float = 2.0
    amp_scatter: float = 0.3
    M_star: Optional[float] = None
    escalation: tuple = (1, 2, 4)
    horizon_scale: float = 1.0
    margin: float = 10.0
    early_stop: bool = False


@dataclass(frozen=True)
class DirectionResult:
    outcome: Outcome
    diagnostics: dict
    traj: object = field(default=None, repr=False)


@dataclass(frozen=True)
class Classification:
    forward: DirectionResult
    backward: DirectionResult
    energy: float
    excess: float

    @property
    def cell(self):
        return self.forward.outcome.kind, self.backward.outcome.kind


def _trap(x, y):
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x))) if x.size > 1 else 0.0


def m_star(params, JQ, E):
    p = params.p
    return float(np.sqrt(4 * p / (p - 1) * max(E, JQ + params.eps ** 2)))


def _scatter_window_ok(t, K0, dQ, amp, norm, params, opts, M):
    return bool(t.size > 1 and np.all(K0 > 0) and np.all(dQ >= params.delta_star)
                and np.all(amp <= opts.amp_scatter) and np.all(norm <= M))


def trapped_horizon(traj, params):
    """Time of the first exit from ``d_Q <= delta_trap`` after the first entry (0 if never inside)."""
    d = traj["dQ"]
    inside = d <= params.delta_trap
    if not inside.any():
        return 0.0
    i0 = int(np.argmax(inside))
    out = np.nonzero(~inside[i0:])[0]
    return float(traj.times[i0 + out[0]] if out.size else traj.times[-1])


def classify(traj, params, opts=None, JQ=None):
    """Outcome of one time direction of a terminated trajectory."""
    opts = opts or ClassifyOpts()
    t = traj.times
    JQ = JQ if JQ is not None else _JQ(params, traj.grid)
    E0 = float(traj["E"][0])
    M = opts.M_star if opts.M_star is not None else m_star(params, JQ, E0)
    win = t >= t[-1] - opts.window
    diag = dict(final_dQ=float(traj["dQ"][-1]), final_S=int(traj["S"][-1]),
                lemma_low_freq=_trap(t[win], traj["ux2"][win]),
                window_strichartz=float(traj["strichartz_acc"][-1]
                                        - traj["strichartz_acc"][win][0]),
                window_norm=float(np.max(traj["h1l2_norm"][win])), M_star=M,
                trapped_horizon=trapped_horizon(traj, params), t_end=float(t[-1]),
                termination=traj.termination)
    if traj.termination == BLOWUP:
        return DirectionResult(Outcome(BLOWUP_KIND, t_star=traj.t_star), diag, traj)
    horizon = traj.T_max
    tail = t >= t[-1] - opts.tail_fraction * horizon
    if traj.times[-1] >= horizon - 1e-9 and np.all(traj["dQ"][tail] <= params.delta_trap):
        sig = traj["sigma"][tail]
        sigma = 1 if np.sum(sig) >= 0 else -1
        return DirectionResult(Outcome(TRAPPED, sigma), diag, traj)
    if _scatter_window_ok(t[win], traj["K0"][win], traj["dQ"][win], traj["amp"][win],
                          traj["h1l2_norm"][win], params, opts, M):
        return DirectionResult(Outcome(SCATTER), diag, traj)
    return DirectionResult(Outcome(UNDECIDED), diag, traj)


_SOL_CACHE = {}


def soliton_on(params, grid):
    key = (params, grid.L, grid.N)
    if key not in _SOL_CACHE:
        if len(_SOL_CACHE) > 8:
            _SOL_CACHE.clear()
        _SOL_CACHE[key] = soliton_profile(params, grid, check_resolution=False)
    return _SOL_CACHE[key]


def _JQ(params, grid):
    return soliton_on(params, grid).JQ


def dynamics_grid(state, T, opts, tail_width=5.0):
    """Extension of ``state`` whose light cone over ``[0, T]`` stays ``margin`` inside."""
    g = state.grid
    R = support_radius(state)
    need = T + R + tail_width + opts.margin
    N = max(g.N, int(np.ceil(need / g.h / 256.0)) * 256)
    return extend_state(state, N)


def scatter_stop(params, opts, JQ):
    """Early-stop rule: the scattering conditions hold on the last window."""
    def stop(times, rows):
        t_end = times[-1]
        i = len(times) - 1
        while i > 0 and times[i - 1] >= t_end - opts.window:
            i -= 1
        if t_end - times[i] < opts.window - 1e-9:
            return False
        sl = rows[i:]
        M = opts.M_star if opts.M_star is not None else m_star(params, JQ, rows[0]["E"])
        return _scatter_window_ok(np.asarray(times[i:]), np.array([r["K0"] for r in sl]),
                                  np.array([r["dQ"] for r in sl]), np.array([r["amp"] for r in sl]),
                                  np.array([r["h1l2_norm"] for r in sl]), params, opts, M)
    return stop


def classify_direction(state, params, opts=None, keep_traj=False):
    """Evolve ``state`` forward and classify, escalating the horizon while Undecided."""
    opts = opts or ClassifyOpts()
    res = None
    for scale in opts.escalation:
        T = opts.T_max * opts.horizon_scale * scale
        st = dynamics_grid(state, T, opts)
        sol = soliton_on(params, st.grid)
        stop = scatter_stop(params, opts, sol.JQ) if opts.early_stop else None
        traj = evolve(st, EvolveOpts(dt=opts.dt, T_max=T), params, sol, stop=stop)
        res = classify(traj, params, opts, sol.JQ)
        res = DirectionResult(res.outcome, dict(res.diagnostics, horizon=T),
                              traj if keep_traj else _light(traj))
        if res.outcome.kind != UNDECIDED:
            break
    return res


@dataclass(frozen=True)
class LightTrajectory:
    """Scalar series kept for audits (no snapshots)."""

    times: np.ndarray = field(repr=False)
    dQ: np.ndarray = field(repr=False)
    S: np.ndarray = field(repr=False)
    E0: float = 0.0
    termination: str = ""

    def __getitem__(self, name):
        return {"dQ": self.dQ, "S": self.S}[name]


def _light(traj):
    return LightTrajectory(traj.times, traj["dQ"], traj["S"], float(traj["E"][0]), traj.termination)


def classify_datum(state0, params, opts=None, keep_traj=False):
    """Forward outcome of ``state0`` and backward outcome (forward outcome of ``(u0, -u1)``)."""
    opts = opts or ClassifyOpts()
    fwd = classify_direction(state0, params, opts, keep_traj)
    bwd = classify_direction(state0.reversed(), params, opts, keep_traj)
    sol = soliton_on(params, state0.grid)
    E = energy(state0, params)
    return Classification(fwd, bwd, E, E - sol.JQ)


# nine-set scan -------------------------------------------------------------------------

def family_bump(params, grid):
    """``u0 = (1 + a) Q + b exp(-x^2)``, ``u1 = 0``."""
    sol = soliton_on(params, grid)
    bump = np.exp(-grid.x ** 2)

    def make(a, b):
        return StateVec(grid, (1 + a) * sol.Q + b * bump, np.zeros(grid.N))
    return make


def family_eigen(params, grid):
    """``u0 = Q + a rho``, ``u1 = -b a k rho``; ``b = 1`` is the stable direction."""
    sol = soliton_on(params, grid)

    def make(a, b):
        return StateVec(grid, sol.Q + a * sol.rho, -b * a * sol.k * sol.rho)
    return make


@dataclass(frozen=True)
class ScanRow:
    family: str
    a: float
    b: float
    E: float
    excess: float
    forward: str
    backward: str
    t_star_fwd: Optional[float]
    t_star_bwd: Optional[float]
    final_dQ_fwd: float
    final_dQ_bwd: float


@dataclass(frozen=True)
class ScanResult:
    rows: list
    matrix: np.ndarray
    witnesses: dict
    undecided: list
    self_check_failures: list
    trajectories: list = field(repr=False, default_factory=list)


def outcome_matrix(cells):
    """3x3 counts, rows forward and columns backward, in the order Scatter, BlowUp, Trapped."""
    M = np.zeros((3, 3), dtype=int)
    for f, b in cells:
        if f in CELL_KINDS and b in CELL_KINDS:
            M[CELL_KINDS.index(f), CELL_KINDS.index(b)] += 1
    return M


def nine_set_scan(family, a_grid, b_grid, params, opts=None, name="family", symmetric=False):
    """Classify ``family(a, b)`` forward and backward on the product grid.

    With ``symmetric=True`` (zero initial velocity) the two directions must agree,
    which is recorded as a self-check.
    """
    opts = opts or ClassifyOpts()
    rows, cells, undecided, bad, trajs = [], [], [], [], []
    witnesses = {}
    for a in a_grid:
        for b in b_grid:
            st = family(float(a), float(b))
            c = classify_datum(st, params, opts)
            f, bk = c.forward.outcome, c.backward.outcome
            row = ScanRow(name, float(a), float(b), c.energy, c.excess, f.label, bk.label,
                          f.t_star, bk.t_star, c.forward.diagnostics["final_dQ"],
                          c.backward.diagnostics["final_dQ"])
            rows.append(row)
            trajs.extend([c.forward.traj, c.backward.traj])
            if UNDECIDED in (f.kind, bk.kind):
                undecided.append((float(a), float(b)))
            if symmetric and f.kind != bk.kind:
                bad.append((float(a), float(b)))
            cells.append((f.kind, bk.kind))
            witnesses.setdefault((f.kind, bk.kind), row)
    return ScanResult(rows, outcome_matrix(cells), witnesses, undecided, bad, trajs)


# ejection -----------------------------------------------------------------------------

# d_Q is the square root of a difference of O(1) quantities; below this it is round-off
DQ_FLOOR = 1e-7

@dataclass(frozen=True)
class EjectionFit:
    rate: float
    rate_lambda: float
    window: tuple
    residual: float
    monotone: bool
    R: float
    C_lambda_minus: float


def ejection_fit(traj, params, d_range=None):
    """Exponential rate of ``d_Q`` (and ``|lambda|``) over the monotone ejection window.

    The window is ``d_Q in [2R, delta_X/2]`` with ``R`` the minimum of ``d_Q``
    before ejection.  When that interval spans less than a factor 2 (large
    launches) it becomes ``[R, 4R]``.

    Raises
    ------
    NoEjectionWindow
        When ``d_Q`` never traverses the window monotonically, or its minimum
        is below the round-off floor ``DQ_FLOOR``.
    """
    t, d = traj.times, traj["dQ"]
    up = np.nonzero(d >= params.delta_X / 2)[0]
    stop = int(up[0]) if up.size else d.size - 1
    i_min = int(np.argmin(d[: stop + 1]))
    R = float(d[i_min])
    if R < DQ_FLOOR:
        raise NoEjectionWindow(f"minimum d_Q = {R:.2g} is below the round-off floor {DQ_FLOOR:g}")
    lo, hi = (2 * R, params.delta_X / 2) if d_range is None else d_range
    if d_range is None and hi < 2 * lo:
        lo, hi = R * 1.0001, 4 * R
    seg = np.arange(i_min, d.size)
    above = seg[d[seg] >= lo]
    if above.size == 0:
        raise NoEjectionWindow(f"d_Q never reaches {lo:.3g}")
    i0 = int(above[0])
    beyond = np.nonzero(d[i0:] > hi)[0]
    if beyond.size == 0:
        raise NoEjectionWindow(f"d_Q never reaches {hi:.3g}")
    i1 = i0 + int(beyond[0]) - 1
    if i1 - i0 < 4:
        raise NoEjectionWindow("ejection window too short to fit")
    sl = slice(i0, i1 + 1)
    monotone = bool(np.all(np.diff(d[sl]) > 0))
    if not monotone:
        raise NoEjectionWindow("d_Q not monotone through the window")
    tt = t[sl]
    coef, res, *_ = np.polyfit(tt, np.log(d[sl]), 1, full=True)
    lam = np.abs(traj["lam"][sl])
    coef_l = np.polyfit(tt, np.log(lam), 1)
    resid = float(np.sqrt(res[0] / tt.size)) if res.size else 0.0
    k = traj.k
    growth = R + np.exp(2 * k * (tt - t[i_min])) * R ** 2
    C = float(np.max((np.abs(traj["lam_minus"][sl]) + traj["gamma_E"][sl]) / growth))
    return EjectionFit(float(coef[0]), float(coef_l[0]), (float(tt[0]), float(tt[-1])),
                       resid, monotone, R, C)


# one-pass audit -------------------------------------------------------------------------

@dataclass(frozen=True)
class AuditReport:
    audited: int
    skipped: int
    events: int
    violations: int
    reapproach_ratios: np.ndarray = field(repr=False)
    sign_constant: int = 0
    sign_checked: int = 0
    details: list = field(default_factory=list, repr=False)


def one_pass_audit(trajectories, params, JQ, n_radii=12):
    """Check that after ``d_Q`` rises through ``R`` it never returns to ``R``.

    A trajectory is audited when ``E < J(Q) + eps_star^2``; its radii are
    log-spaced in ``(2 eps, R_star]`` with ``eps = sqrt(max(E - J(Q), 0))``.
    ``reapproach_ratios`` holds ``min d_Q / R`` after each exit event.
    """
    audited = skipped = events = violations = 0
    ratios, details = [], []
    s_ok = s_checked = 0
    for tr in trajectories:
        d = np.asarray(tr["dQ"])
        E0 = tr.E0 if hasattr(tr, "E0") else float(tr["E"][0])
        excess = E0 - JQ
        if not excess < params.eps_star ** 2:
            skipped += 1
            continue
        audited += 1
        eps = np.sqrt(max(excess, 0.0))
        lo = max(2 * eps, 1e-6 * params.R_star)
        for R in np.geomspace(lo * (1 + 1e-9), params.R_star, n_radii):
            below = d < R
            if not below.any():
                continue
            i1 = int(np.argmax(below))
            cross = np.nonzero((d[i1:-1] < R) & (d[i1 + 1:] >= R))[0]
            if cross.size == 0:
                continue
            i2 = i1 + int(cross[0]) + 1
            events += 1
            later = d[i2 + 1:]
            if later.size:
                ratios.append(float(later.min() / R))
                if np.any(later <= R):
                    violations += 1
                    details.append((R, float(tr.times[i2])))
        # sign after the final exit from the R_star ball
        S = np.asarray(tr["S"])
        inside = np.nonzero(d <= params.R_star)[0]
        start = int(inside[-1]) + 1 if inside.size else 0
        tail = S[start:]
        tail = tail[tail != 0]
        if tail.size:
            s_checked += 1
            s_ok += int(np.all(tail == tail[0]))
    return AuditReport(audited, skipped, events, violations, np.array(ratios), s_ok, s_checked,
                       details)
