"""Strang-split time integration of ``u_tt - u_xx + u = |u|^(p-1) u`` for even data.

The state is carried in cosine coefficients; each step is a half kick by the
nonlinearity, an exact Klein-Gordon rotation with ``omega = sqrt(1 + xi^2)``
and a second half kick.  The force ``f(u)`` is shared between consecutive half
kicks, so one step costs one inverse and one forward transform.  All scalar
diagnostics are evaluated from the coefficients at every step.
"""
from collections import deque
from dataclasses import asdict, dataclass, field
import json
from typing import Optional

import numpy as np

from .errors import BoundaryContact, GridError, NumericalFailure, Overflow
from .grid import GridSpec, StateVec
from .kernels import power_nonlinearity
from .soliton import ModelParams, cutoff, soliton_profile

SERIES_FIELDS = ("E", "J", "K0", "K2", "dQ", "lam", "lam_dot", "lam_plus", "lam_minus",
                 "sigma", "S", "y", "ud2", "h1l2_norm", "strichartz_acc", "amp", "ux2", "gamma_E")
EXPORT_FIELDS = ("t", "E", "K0", "K2", "dQ", "lambda", "lambda_plus", "lambda_minus",
                 "y", "h1l2_norm", "strichartz_acc")

HORIZON = "HorizonReached"
BLOWUP = "BlowupDetected"
BOUNDARY = "BoundaryContact"
STOPPED = "EarlyStop"


@dataclass(frozen=True)
class EvolveOpts:
    """Integrator settings.

    ``B_max=None`` means ``50 alpha``.  ``record_every`` is the snapshot stride
    in time units; scalars are recorded every step.
    """

    dt: float = 0.005
    T_max: float = 50.0
    B_max: Optional[float] = None
    record_every: float = 0.5
    light_cone_guard: bool = True
    nonlinear: bool = True
    growth_steps: int = 20
    refinements: int = 3
    tail_width: float = 5.0
    tail_tol: float = 1e-8

    def __post_init__(self):
        if not self.dt > 0 or not self.T_max > 0:
            raise ValueError("dt and T_max must be positive")

    def cap(self, params):
        return 50.0 * params.alpha if self.B_max is None else float(self.B_max)


def support_radius(state, rel_tol=1e-8):
    """Radius beyond which ``|u| + |u_t|`` stays below ``rel_tol`` times its maximum."""
    a = np.abs(state.u) + np.abs(state.ud)
    big = np.nonzero(a > rel_tol * a.max())[0] if a.max() > 0 else []
    return float(state.grid.x[big[-1]]) if len(big) else 0.0


def check_guards(state0, opts, grid):
    if opts.dt > 0.5 * grid.h * (1 + 1e-12):
        raise GridError(f"dt={opts.dt:g} exceeds 0.5 h = {0.5 * grid.h:g}")
    if opts.light_cone_guard:
        R = support_radius(state0)
        if opts.T_max + R > grid.L - opts.tail_width:
            raise GridError(f"light cone T_max + R = {opts.T_max + R:.3g} reaches L - "
                            f"{opts.tail_width:g} = {grid.L - opts.tail_width:.3g}")


# single step -----------------------------------------------------------------------

def _rotation(grid, dt):
    w = np.sqrt(1.0 + grid.xi ** 2)
    c, s = np.cos(dt * w), np.sin(dt * w)
    return c, s / w, -w * s


def step_strang(state, dt, params, nonlinear=True, B_max=None):
    """One Strang step: half kick, exact linear flow, half kick.

    Raises
    ------
    Overflow
        When ``max |u|`` exceeds ``B_max`` (default ``50 alpha``).
    """
    g = state.grid
    cap = 50.0 * params.alpha if B_max is None else B_max
    c, s_w, ws = _rotation(g, dt)
    u, ud = state.u, state.ud
    if nonlinear:
        ud = ud + 0.5 * dt * power_nonlinearity(u, params.p)
    cu, cv = g.dct(u), g.dct(ud)
    cu, cv = c * cu + s_w * cv, ws * cu + c * cv
    u, ud = g.idct(cu), g.idct(cv)
    amp = float(np.max(np.abs(u)))
    if not np.isfinite(amp) or amp > cap:
        raise Overflow(f"max|u| = {amp:.3g} exceeds cap {cap:.3g}", amp)
    if nonlinear:
        ud = ud + 0.5 * dt * power_nonlinearity(u, params.p)
    return StateVec(g, u, ud)


# diagnostics -----------------------------------------------------------------------

class _Diagnostics:
    """Scalars of a state given its values and cosine coefficients."""

    def __init__(self, sol, params):
        self.sol = sol
        self.params = params
        g = sol.grid
        self.g = g
        self.xi2 = g.xi ** 2
        self.cQ = g.dct(sol.Q)
        self.crho = g.dct(sol.rho)
        self.Qpm1 = sol.Q ** (params.p - 1)

    def __call__(self, u, cu, cud, pot=None):
        g, P, sol = self.g, self.params, self.sol
        w = g.weight
        p = P.p
        ux2 = w * np.dot(self.xi2 * cu, cu)
        u2 = w * np.dot(cu, cu)
        ud2 = w * np.dot(cud, cud)
        if pot is None:
            pot = g.integrate(power_nonlinearity(np.abs(u), p + 1))
        J = 0.5 * (ux2 + u2) - pot / (p + 1)
        E = J + 0.5 * ud2
        K0 = ux2 + u2 - pot
        K2 = ux2 - (p - 1) / (2 * (p + 1)) * pot
        # decomposition about sigma Q
        s_cross = np.dot((1 + self.xi2) * cu, self.cQ)
        sigma = 1 if s_cross >= 0 else -1
        cv = sigma * cu - self.cQ
        lam = w * np.dot(cv, self.crho)
        lam_dot = sigma * w * np.dot(cud, self.crho)
        cg = cv - lam * self.crho
        gam = g.idct(cg)
        Lgg = w * (np.dot((1 + self.xi2) * cg, cg) - p * np.dot(self.Qpm1 * gam, gam))
        gd2 = ud2 - lam_dot ** 2
        k = sol.k
        normE2 = 0.5 * (lam_dot ** 2 + k * k * lam ** 2) + 0.5 * (Lgg + gd2)
        C = sol.JQ + 0.5 * (lam_dot ** 2 - k * k * lam ** 2) + 0.5 * (Lgg + gd2) - E
        chi = float(cutoff(np.sqrt(max(normE2, 0.0)) / (2 * P.delta_E)))
        dQ = np.sqrt(max(normE2 - chi * C, 0.0))
        in_region = E < sol.JQ + min(dQ * dQ / 2, P.eps ** 2)
        if not in_region:
            S = 0
        elif dQ <= P.delta_E:
            S = -1 if lam > 0 else 1
        else:
            S = 1 if K0 >= 0 else -1
        return dict(E=E, J=J, K0=K0, K2=K2, dQ=dQ, lam=lam, lam_dot=lam_dot,
                    lam_plus=0.5 * (lam + lam_dot / k), lam_minus=0.5 * (lam - lam_dot / k),
                    sigma=sigma, S=S, y=u2, ud2=ud2, h1l2_norm=np.sqrt(ux2 + u2 + ud2),
                    ux2=ux2, gamma_E=np.sqrt(max(0.5 * (Lgg + gd2), 0.0)))


# trajectory ------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Trajectory:
    grid: GridSpec
    params: ModelParams
    dt: float
    times: np.ndarray = field(repr=False)
    series: dict = field(repr=False)
    snap_times: np.ndarray = field(repr=False)
    snapshots: list = field(repr=False)
    termination: str = HORIZON
    t_star: Optional[float] = None
    T_max: float = 0.0
    k: float = 0.0

    def __getitem__(self, name):
        return self.series[name]

    @property
    def final_state(self):
        return self.snapshots[-1]

    @property
    def t_end(self):
        return float(self.times[-1])

    @property
    def blew_up(self):
        return self.termination == BLOWUP

    def window(self, t0, t1=np.inf):
        return (self.times >= t0) & (self.times <= t1)

    def records(self):
        """Per-step records with the export field names."""
        names = {"lambda": "lam", "lambda_plus": "lam_plus", "lambda_minus": "lam_minus"}
        cols = [self.times] + [self.series[names.get(f, f)] for f in EXPORT_FIELDS[1:]]
        for row in zip(*cols):
            yield dict(zip(EXPORT_FIELDS, (float(v) for v in row)))

    def header(self, config_hash=""):
        P = self.params
        return dict(p=P.p, L=self.grid.L, N=self.grid.N, dt=self.dt, config_hash=config_hash,
                    constants=asdict(P), termination=self.termination, t_star=self.t_star)

    def export(self, series_path, snapshot_path=None, config_hash="", stride=1):
        """Write newline-delimited JSON series; optionally snapshots as ``.npz``."""
        with open(series_path, "w") as fh:
            fh.write(json.dumps(self.header(config_hash), sort_keys=True) + "\n")
            for i, rec in enumerate(self.records()):
                if i % stride == 0:
                    fh.write(json.dumps(rec) + "\n")
        if snapshot_path is not None:
            hdr = self.header(config_hash)
            np.savez(snapshot_path, header=json.dumps(hdr, sort_keys=True),
                     t=self.snap_times, u=np.array([s.u for s in self.snapshots]),
                     ud=np.array([s.ud for s in self.snapshots]))


class _Integrator:
    """Coefficient-space Strang stepper with a shared force between half kicks."""

    def __init__(self, grid, params, dt, nonlinear, cap):
        self.g, self.p, self.dt = grid, params.p, dt
        self.nonlinear = nonlinear
        self.cap = cap
        self.c, self.s_w, self.ws = _rotation(grid, dt)

    def start(self, state):
        self.u = state.u.copy()
        self.cu = self.g.dct(state.u)
        self.cv = self.g.dct(state.ud)
        self.cf = self._force(self.u)

    def _force(self, u):
        if not self.nonlinear:
            return np.zeros_like(u)
        return self.g.dct(power_nonlinearity(u, self.p))

    def step(self):
        h = 0.5 * self.dt
        cv = self.cv + h * self.cf
        cu = self.c * self.cu + self.s_w * cv
        cv = self.ws * self.cu + self.c * cv
        u = self.g.idct(cu)
        amp = float(np.max(np.abs(u)))
        if not np.isfinite(amp) or amp > self.cap:
            raise Overflow(f"max|u| = {amp:.3g} exceeds cap {self.cap:.3g}", amp)
        cf = self._force(u)
        self.u, self.cu, self.cv, self.cf = u, cu, cv + h * cf, cf
        return amp

    def state(self):
        return StateVec(self.g, self.u.copy(), self.g.idct(self.cv))

    def snapshot(self):
        return (self.u.copy(), self.cu.copy(), self.cv.copy(), self.cf.copy())

    def restore(self, snap):
        self.u, self.cu, self.cv, self.cf = (a.copy() for a in snap)


def evolve(state0, opts, params, sol=None, stop=None):
    """Integrate from ``state0`` to ``opts.T_max`` or until blowup.

    ``stop(times, rows)`` is polled at every snapshot; a true value ends the
    run with termination ``EarlyStop``.

    Raises
    ------
    BoundaryContact
        Energy beyond ``L - tail_width`` exceeds ``tail_tol`` times the total
        quadratic energy; the partial trajectory is attached.
    NumericalFailure
        The amplitude cap was crossed without monotone growth.
    """
    g = state0.grid
    check_guards(state0, opts, g)
    sol = sol if sol is not None else soliton_profile(params, g, check_resolution=False)
    diag = _Diagnostics(sol, params)
    cap = opts.cap(params)
    integ = _Integrator(g, params, opts.dt, opts.nonlinear, cap)
    integ.start(state0)
    tail = g.x > g.L - opts.tail_width
    p = params.p

    times, rows = [], []
    snap_t, snaps = [], []
    acc = [0.0]
    amps = deque(maxlen=opts.growth_steps + 1)

    def record(t, amp, dt_used):
        u = integ.u
        a = np.abs(u)
        pot = g.integrate(power_nonlinearity(a, p + 1))
        r = diag(u, integ.cu, integ.cv, pot)
        s_norm = np.sqrt(g.integrate(power_nonlinearity(a, 2 * p)))
        if rows:
            acc[0] += 0.5 * dt_used * (s_norm + rows[-1]["_s"])
        r.update(strichartz_acc=acc[0], amp=amp, _s=s_norm)
        times.append(t)
        rows.append(r)

    def build(termination, t_star=None):
        series = {f: np.array([r[f] for r in rows], dtype=float) for f in SERIES_FIELDS}
        return Trajectory(g, params, opts.dt, np.array(times), series, np.array(snap_t),
                          snaps, termination, t_star, opts.T_max, sol.k)

    def take_snapshot(t):
        st = integ.state()
        snap_t.append(t)
        snaps.append(st)
        if opts.light_cone_guard:
            dens = 0.5 * (g.deriv_even(st.u) ** 2 + st.u ** 2 + st.ud ** 2)
            total = g.integrate(dens)
            if total > 0 and g.integrate(dens[tail]) > opts.tail_tol * total:
                raise BoundaryContact(f"tail energy beyond L-{opts.tail_width:g} at t={t:.3f}",
                                      build(BOUNDARY))

    nsteps = int(np.ceil(opts.T_max / opts.dt - 1e-9))  # never stop short of T_max
    stride = max(1, int(round(opts.record_every / opts.dt)))
    amp0 = float(np.max(np.abs(state0.u)))
    record(0.0, amp0, 0.0)
    take_snapshot(0.0)
    amps.append(amp0)
    for n in range(1, nsteps + 1):
        prev = integ.snapshot()
        try:
            amp = integ.step()
        except Overflow:
            t_prev = (n - 1) * opts.dt
            hist = np.array(amps)
            if len(hist) < 2 or np.any(np.diff(hist) <= 0):
                raise NumericalFailure(
                    f"amplitude cap crossed at t={t_prev + opts.dt:.4f} without monotone growth")
            t_star = _refine_blowup(integ, prev, t_prev, opts, record, times)
            snaps.append(integ.state())
            snap_t.append(times[-1])
            return build(BLOWUP, t_star)
        t = n * opts.dt
        amps.append(amp)
        record(t, amp, opts.dt)
        if n % stride == 0 or n == nsteps:
            take_snapshot(t)
            if stop is not None and n < nsteps and stop(times, rows):
                return build(STOPPED)
    return build(HORIZON)


def _refine_blowup(integ, prev, t_prev, opts, record, times):
    """Re-run the final window with ``dt / 4`` (up to ``opts.refinements`` times)."""
    dt = opts.dt
    t_lo, t_hi = t_prev, t_prev + dt
    integ.restore(prev)
    for _ in range(opts.refinements):
        dt_new = dt / 4
        integ.dt = dt_new
        integ.c, integ.s_w, integ.ws = _rotation(integ.g, dt_new)
        t = t_lo
        hit = False
        for _ in range(int(round(2 * dt / dt_new)) + 8):
            snap = integ.snapshot()
            try:
                amp = integ.step()
            except Overflow:
                integ.restore(snap)
                hit = True
                break
            t += dt_new
            if t > times[-1] + 1e-12:
                record(t, amp, dt_new)
        if not hit:
            break
        t_lo, t_hi = t, t + dt_new
        dt = dt_new
    return 0.5 * (t_lo + t_hi)


# monitors ----------------------------------------------------------------------------

@dataclass(frozen=True)
class PayneSattingerReport:
    t: np.ndarray = field(repr=False)
    ydd: np.ndarray = field(repr=False)
    rhs: np.ndarray = field(repr=False)
    identity_defect: float = 0.0
    relative_defect: float = 0.0
    energy_form_defect: float = 0.0
    stated_form_min_margin: float = 0.0
    eventually_convex: bool = False


def payne_sattinger_monitor(traj, params, tail_fraction=0.25):
    """Check ``y'' = 2(||u_t||^2 - K0)`` for ``y = ||u||^2`` by centered differences.

    Also evaluates the energy form ``y'' = (p+3)||u_t||^2 + (p-1)||u||_{H^1}^2 - 2(p+1)E``
    and the margin ``y'' - [2p||u_t||^2 + p||u||_{H^1}^2 - 2(p+1)E]`` of the
    alternative coefficient set (negative margins show it is not a lower bound).
    """
    t = traj.times
    dt = np.diff(t)
    uniform = np.abs(dt - dt[0]) <= 1e-9 * dt[0]
    n = int(np.argmin(uniform)) if not np.all(uniform) else dt.size
    n = max(n, 3)
    y = traj["y"][: n + 1]
    h = dt[0]
    ydd = (y[2:] - 2 * y[1:-1] + y[:-2]) / h ** 2
    mid = slice(1, n)
    ud2 = traj["ud2"][mid]
    K0 = traj["K0"][mid]
    rhs = 2 * (ud2 - K0)
    p = params.p
    E = traj["E"][mid]
    h1 = traj["ux2"][mid] + traj["y"][mid]
    energy_form = (p + 3) * ud2 + (p - 1) * h1 - 2 * (p + 1) * E
    stated = 2 * p * ud2 + p * h1 - 2 * (p + 1) * E
    scale = max(np.max(np.abs(ydd)), 1e-300)
    defect = float(np.max(np.abs(ydd - rhs)))
    tail = ydd[int((1 - tail_fraction) * ydd.size):]
    return PayneSattingerReport(t[mid], ydd, rhs, defect, defect / scale,
                                float(np.max(np.abs(energy_form - rhs))),
                                float(np.min(ydd - stated)), bool(tail.size and np.all(tail > 0)))


def virial_weight(x, R_v):
    return cutoff(np.abs(x) / R_v)


def virial_value(state, R_v, grid=None):
    """``V_w = <w u_t | (x d_x + d_x x) u> = <w u_t | 2 x u_x + u>``."""
    g = grid or state.grid
    w = virial_weight(g.x, R_v)
    ux = g.deriv_even(state.u)
    return float(g.inner(w * state.ud, 2 * g.x * ux + state.u))


@dataclass(frozen=True)
class VirialReport:
    V_w: float
    dV_dt: float
    K2: float
    dV_defect: float
    exterior_energy: float


def virial_monitor(state, R_v, params, dt=1e-3, nonlinear=True):
    """``V_w`` and the defect of ``dV_w/dt = -2 K2`` from a short symmetric evolution.

    With the real inner product the exact identity (no cutoff) carries the
    factor 2; the defect is measured against it.  ``exterior_energy`` is the
    energy density integrated beyond ``R_v`` that controls the cutoff error.
    """
    g = state.grid
    V0 = virial_value(state, R_v)
    fwd = step_strang(step_strang(state, dt, params, nonlinear), dt, params, nonlinear)
    bwd = step_strang(step_strang(state, -dt, params, nonlinear), -dt, params, nonlinear)
    dV = (virial_value(fwd, R_v) - virial_value(bwd, R_v)) / (4 * dt)
    from .soliton import k_functionals
    if nonlinear:
        _, K2 = k_functionals(state.u, params, g)
    else:
        K2 = float(g.inner(g.deriv_even(state.u), g.deriv_even(state.u)))
    dens = 0.5 * (g.deriv_even(state.u) ** 2 + state.u ** 2 + state.ud ** 2)
    ext = float(g.integrate(dens[g.x > R_v]))
    return VirialReport(V0, float(dV), float(K2), float(abs(dV + 2 * K2)), ext)
