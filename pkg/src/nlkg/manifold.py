"""Center-stable manifold near ``(Q, 0)``: eigenmode reduction, fixed-point graph and threshold shooting.

Writing ``u = Q + mu rho + w`` with ``w`` orthogonal to ``rho``, the unstable
and stable coordinates ``mu_+- = (mu +- mu_dot / k) / 2`` obey

    mu_+' =  k mu_+ + N_rho / (2k),     mu_-' = -k mu_- - N_rho / (2k),

with ``N_rho = <N(Q, v), rho>``, and ``w`` solves ``w'' + L_+ w = P_c N``.
Bounded solutions are those with
``mu_+(t) = -(1/2k) int_t^inf exp(k (t - s)) N_rho(s) ds``.  The radiation is
propagated through ``zeta = w_t + i omega w`` in distorted-frequency space,
where ``zeta' = i omega zeta + n`` is integrated exactly for forcing that is
piecewise linear in time.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .classify import (BLOWUP_KIND, SCATTER, UNDECIDED, ClassifyOpts, classify_direction,
                       soliton_on, trapped_horizon)
from .errors import BracketInvalid, HorizonTooShort, NoContraction
from .grid import StateVec
from .kernels import power_nonlinearity
from .soliton import energy
from . import spectral

W_PLUS = "W_plus_like"
W_MINUS = "W_minus_like"


# reduction ------------------------------------------------------------------------

@dataclass(frozen=True)
class MuState:
    mu: float
    mu_dot: float
    mu_plus: float
    mu_minus: float


def mu_decompose(state, sol):
    """``u = Q + mu rho + w``: eigen-coordinates and the radiation ``(w, w_t)``."""
    g = state.grid
    v = state.u - sol.Q
    mu = float(g.inner(v, sol.rho))
    mu_dot = float(g.inner(state.ud, sol.rho))
    w = v - mu * sol.rho
    wd = state.ud - mu_dot * sol.rho
    k = sol.k
    return (MuState(mu, mu_dot, 0.5 * (mu + mu_dot / k), 0.5 * (mu - mu_dot / k)),
            StateVec(g, w, wd))


def mu_compose(sol, mu_plus, mu_minus, w=None):
    """Inverse of :func:`mu_decompose`."""
    g = sol.grid
    mu = mu_plus + mu_minus
    mu_dot = sol.k * (mu_plus - mu_minus)
    wu = np.zeros(g.N) if w is None else w.u
    wd = np.zeros(g.N) if w is None else w.ud
    return StateVec(g, sol.Q + mu * sol.rho + wu, mu_dot * sol.rho + wd)


def transversal_family(sol, mu_minus):
    """``c -> Q + (m + c) rho`` with velocity ``-k (m - c) rho``: ``mu_- = m`` fixed, ``mu_+ = c``."""
    return lambda c: mu_compose(sol, c, mu_minus)


def stable_family(sol):
    """``a -> (Q + a rho, -a k rho)``: the linear stable direction."""
    return lambda a: mu_compose(sol, 0.0, a)


# exponential quadrature weights ---------------------------------------------------

def _phi_weights(x):
    """``(phi1(x), psi(x))`` with ``phi1 = (e^x - 1)/x`` and ``psi = (e^x (x - 1) + 1)/x^2``."""
    x = np.asarray(x)
    small = np.abs(x) < 0.5
    xs = np.where(small, 1.0, x)  # dummy argument where the series is used
    ex = np.exp(xs)
    phi1 = (ex - 1) / xs
    psi = (ex * (xs - 1) + 1) / xs ** 2
    xx = np.where(small, x, 0.0)
    s1 = np.zeros_like(xx)
    s2 = np.zeros_like(xx)
    term = np.ones_like(xx)  # x^n / n!
    for n in range(0, 24):
        s1 = s1 + term / (n + 1)
        s2 = s2 + term / (n + 2)
        term = term * xx / (n + 1)
    return np.where(small, s1, phi1), np.where(small, s2, psi)


def linear_weights(z, tau):
    """``I0 = int_0^tau e^{z r}(1 - r/tau) dr`` and ``I1 = int_0^tau e^{z r} (r/tau) dr``."""
    phi1, psi = _phi_weights(np.asarray(z) * tau)
    return tau * (phi1 - psi), tau * psi


# fixed point --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ManifoldPoint:
    w0: StateVec = field(repr=False)
    mu_minus0: float = 0.0
    mu_plus0: float = 0.0
    residual: float = 0.0
    horizon: float = 0.0
    iterations: int = 0
    t: np.ndarray = field(default=None, repr=False)
    mu_plus: np.ndarray = field(default=None, repr=False)
    mu_minus: np.ndarray = field(default=None, repr=False)
    zeta: np.ndarray = field(default=None, repr=False)
    w_phys: np.ndarray = field(default=None, repr=False)
    measure: object = field(default=None, repr=False)
    sol: object = field(default=None, repr=False)
    tail_bound: float = 0.0
    history: list = field(default_factory=list, repr=False)

    @property
    def mu(self):
        return self.mu_plus + self.mu_minus

    @property
    def state0(self):
        """Initial datum ``Q + mu(0) rho + w0`` with ``mu_dot(0) = k (mu_+ - mu_-)``."""
        return mu_compose(self.sol, self.mu_plus0, self.mu_minus0, self.w0)


@dataclass(frozen=True)
class ManifoldOpts:
    T: Optional[float] = None  # default max(30/k, 30)
    tau: float = 0.05
    tol: float = 1e-10
    max_iter: int = 200
    damping: float = 0.5
    seed: str = "zero"
    nonlinear: bool = True


class _Setup:
    def __init__(self, sol, m, T, tau):
        self.sol, self.m = sol, m
        self.g = sol.grid
        self.k = sol.k
        nt = int(np.ceil(T / tau))
        self.tau = T / nt
        self.T = T
        self.t = np.linspace(0.0, T, nt + 1)
        self.omega = m.omega
        self.wmu = m.weights * m.mu1
        self.rot = np.exp(1j * self.omega * self.tau)
        self.Iz0, self.Iz1 = linear_weights(1j * self.omega, self.tau)
        self.Ik0, self.Ik1 = (float(v) for v in linear_weights(-self.k, self.tau))
        self.ek = np.exp(-self.k * self.tau)
        self.theta = m.theta
        self.rho = sol.rho
        self.xw = (1 + self.g.x ** 2) ** -2  # <x>^-4 weight for the local norm

    def to_coeffs(self, F):
        """Distorted transform of each row of ``F`` (rows already orthogonal to rho)."""
        return self.g.weight * (F @ self.theta.T)

    def to_phys(self, Cw):
        return (Cw * self.wmu) @ self.theta

    def project(self, F):
        return F - np.outer(self.g.weight * (F @ self.rho), self.rho)


def _radiation(setup, zeta0, n):
    out = np.empty((n.shape[0], zeta0.size), dtype=complex)
    z = zeta0.copy()
    out[0] = z
    for j in range(n.shape[0] - 1):
        z = setup.rot * z + setup.Iz1 * n[j] + setup.Iz0 * n[j + 1]
        out[j + 1] = z
    return out


def _modes(setup, Nr, mu_minus0):
    k = setup.k
    nt = Nr.size
    mm = np.empty(nt)
    mp = np.empty(nt)
    mm[0] = mu_minus0
    for j in range(nt - 1):
        mm[j + 1] = setup.ek * mm[j] - (setup.Ik1 * Nr[j] + setup.Ik0 * Nr[j + 1]) / (2 * k)
    mp[-1] = 0.0
    for j in range(nt - 2, -1, -1):
        mp[j] = setup.ek * mp[j + 1] - (setup.Ik0 * Nr[j] + setup.Ik1 * Nr[j + 1]) / (2 * k)
    return mp, mm


def _x_norm(setup, dmu, dw, p):
    t = setup.t
    g = setup.g
    mu_part = np.trapezoid(np.abs(dmu), t) + np.max(np.abs(dmu))
    s = np.sqrt(g.integrate(power_nonlinearity(np.abs(dw), 2 * p)))
    strich = np.trapezoid(s, t) ** (1.0 / p)
    loc = np.sqrt(np.trapezoid(g.integrate(setup.xw * dw ** 2), t))
    return float(mu_part + strich + loc)


def center_stable_solve(w0, mu_minus0, params, opts=None, measure=None, sol=None):
    """Graph value ``mu_+(0)`` of the center-stable manifold over ``(w0, mu_-(0))``.

    Iterates the Duhamel map on ``[0, T]`` until successive iterates differ by
    at most ``opts.tol`` in the norm ``||mu||_{L1 cap Linf} + ||w||_{L^p L^2p}
    + ||<x>^-2 w||_{L2 L2}``.

    Raises
    ------
    NoContraction
        The defect fails to decrease (data too large).
    HorizonTooShort
        The neglected tail ``exp(-kT)`` term exceeds ``tol / 10``.
    """
    opts = opts or ManifoldOpts()
    g = w0.grid
    sol = sol or soliton_on(params, g)
    m = measure or spectral.spectral_measure(spectral.assemble_L("plus", params, g))
    k = sol.k
    T = opts.T if opts.T is not None else max(30.0 / k, 30.0)
    S = _Setup(sol, m, T, opts.tau)
    p = params.p
    # initial radiation, projected off rho
    wu = spectral.continuous_part(w0.u, m)
    wd = spectral.continuous_part(w0.ud, m)
    a0, _ = spectral.distorted_ft(wu, m, check=False)
    b0, _ = spectral.distorted_ft(wd, m, check=False)
    zeta0 = b0 + 1j * S.omega * a0
    nt = S.t.size
    if opts.seed == "free":
        zeta = zeta0[None, :] * np.exp(1j * np.outer(S.t, S.omega))
        mm = mu_minus0 * np.exp(-k * S.t)
        mp = np.zeros(nt)
    else:
        zeta = np.zeros((nt, zeta0.size), dtype=complex)
        mm = np.zeros(nt)
        mp = np.zeros(nt)
    w_phys = S.to_phys(zeta.imag / S.omega)
    w_phys = S.project(w_phys)
    history = []
    prev = np.inf
    damp = 1.0
    Q = sol.Q
    for it in range(1, opts.max_iter + 1):
        mu = mp + mm
        v = mu[:, None] * sol.rho[None, :] + w_phys
        if opts.nonlinear:
            N = (power_nonlinearity(Q[None, :] + v, p) - power_nonlinearity(Q, p)[None, :]
                 - p * (Q ** (p - 1))[None, :] * v)
        else:
            N = np.zeros_like(v)
        Nr = g.weight * (N @ sol.rho)
        n = S.to_coeffs(S.project(N))
        zeta_new = _radiation(S, zeta0, n)
        mp_new, mm_new = _modes(S, Nr, mu_minus0)
        w_new = S.project(S.to_phys(zeta_new.imag / S.omega))
        if not (np.all(np.isfinite(w_new)) and np.all(np.isfinite(mp_new))):
            raise NoContraction(f"iterate {it} is not finite")
        defect = _x_norm(S, (mp_new + mm_new) - (mp + mm), w_new - w_phys, p)
        history.append(defect)
        if defect > prev:
            damp = opts.damping
        else:
            damp = 1.0
        if it > 8 and defect > 1e3 * min(history) or not np.isfinite(defect):
            raise NoContraction(f"defect grew to {defect:.3e} after {it} sweeps")
        zeta = zeta + damp * (zeta_new - zeta)
        mp = mp + damp * (mp_new - mp)
        mm = mm + damp * (mm_new - mm)
        w_phys = w_phys + damp * (w_new - w_phys)
        prev = defect
        if defect <= opts.tol:
            break
    else:
        raise NoContraction(f"no convergence in {opts.max_iter} sweeps (defect {defect:.3e})")
    tail = abs(Nr[-1]) * np.exp(-k * T) / (2 * k * k)
    if tail > opts.tol / 10:
        raise HorizonTooShort(f"tail estimate {tail:.2e} exceeds tol/10")
    w0c = StateVec(g, wu, wd)
    return ManifoldPoint(w0c, float(mu_minus0), float(mp[0]), float(defect), T, it, S.t, mp, mm,
                         zeta, w_phys, m, sol, float(tail), history)


def point_distance(p1, p2, params):
    """Distance of two solutions on the same time grid in the fixed-point norm."""
    S = _Setup(p1.sol, p1.measure, p1.horizon, p1.t[1] - p1.t[0])
    return _x_norm(S, p1.mu - p2.mu, p1.w_phys - p2.w_phys, params.p)


# scattering data ------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ScatteringData:
    w_inf: StateVec = field(repr=False)
    coeffs: np.ndarray = field(repr=False)
    energy_norm2: float = 0.0
    energy: float = 0.0
    JQ: float = 0.0
    identity_defect: float = 0.0
    tail_bound: float = 0.0
    t_dist: np.ndarray = field(default=None, repr=False)
    dist: np.ndarray = field(default=None, repr=False)


def scattering_data(point, params):
    """Asymptotic free wave ``w_inf`` of the radiation and the energy identity.

    ``w_inf = w(0) - int_0^inf sin(s omega)/omega P_c N ds`` and
    ``w_inf_t = w_t(0) + int_0^inf cos(s omega) P_c N ds`` (truncated at ``T``),
    so that ``E = J(Q) + (<L_+ w_inf, w_inf> + ||w_inf_t||^2) / 2``.
    """
    m = point.measure
    omega = m.omega
    zeta_inf = np.exp(-1j * omega * point.t[-1]) * point.zeta[-1]
    a = zeta_inf.imag / omega
    b = zeta_inf.real
    z = np.zeros_like(a)
    w_inf = StateVec(point.sol.grid, spectral.inverse_distorted_ft(a, z, m),
                     spectral.inverse_distorted_ft(b, z, m))
    wmu = m.weights * m.mu1
    norm2 = float(np.sum(wmu * np.abs(zeta_inf) ** 2))
    E = energy(point.state0, params)
    JQ = point.sol.JQ
    defect = abs(E - JQ - 0.5 * norm2)
    # distance of w(t) to the free wave of w_inf
    ph = np.exp(1j * np.outer(point.t, omega))
    diff = point.zeta - ph * zeta_inf[None, :]
    dist = np.sqrt(np.sum(wmu[None, :] * np.abs(diff) ** 2, axis=1))
    return ScatteringData(w_inf, zeta_inf, norm2, E, JQ, defect, point.tail_bound, point.t, dist)


# shooting ------------------------------------------------------------------------------

@dataclass(frozen=True)
class ShootingResult:
    bracket: tuple
    T_trap: float
    branch: str
    log: list = field(repr=False)
    outcome_lo: str = ""
    outcome_hi: str = ""
    backward: str = ""
    datum: object = field(default=None, repr=False)

    @property
    def width(self):
        return self.bracket[1] - self.bracket[0]

    @property
    def midpoint(self):
        return 0.5 * (self.bracket[0] + self.bracket[1])


@dataclass(frozen=True)
class ShootOpts:
    width_tol: float = 1e-13
    max_iter: int = 80


def _forward(family, a, params, copts):
    r = classify_direction(family(a), params, copts)
    return r.outcome.kind, trapped_horizon(r.traj, params)


def shoot_threshold(family, bracket0, params, copts=None, sopts=None):
    """Bisect ``a`` between data with different forward outcomes.

    The forward fate of each midpoint is decided by evolution (early stop
    once scattering is certain); the converged datum is then classified
    backward to label the branch.

    Raises
    ------
    BracketInvalid
        The endpoint outcomes agree (or are undecided).
    """
    copts = copts or ClassifyOpts(early_stop=True)
    sopts = sopts or ShootOpts()
    lo, hi = (float(v) for v in bracket0)
    o_lo, _ = _forward(family, lo, params, copts)
    o_hi, _ = _forward(family, hi, params, copts)
    if o_lo == o_hi or UNDECIDED in (o_lo, o_hi):
        raise BracketInvalid(f"endpoint outcomes {o_lo} and {o_hi} do not bracket a threshold")
    log = []
    T_trap = 0.0
    for it in range(1, sopts.max_iter + 1):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        o_mid, T_trap = _forward(family, mid, params, copts)
        if o_mid == o_lo:
            lo = mid
        elif o_mid == o_hi:
            hi = mid
        else:
            log.append((it, lo, hi, o_lo, o_hi, T_trap))
            break
        log.append((it, lo, hi, o_lo, o_hi, T_trap))
        if hi - lo <= sopts.width_tol:
            break
    mid = 0.5 * (lo + hi)
    datum = family(mid)
    back = classify_direction(datum.reversed(), params, copts)
    kind = back.outcome.kind
    branch = W_PLUS if kind == SCATTER else W_MINUS if kind == BLOWUP_KIND else UNDECIDED
    return ShootingResult((lo, hi), T_trap, branch, log, o_lo, o_hi, kind, datum)


def trap_regression(result, k=None, min_width=1e-12):
    """Slope of ``T_trap`` against ``-log(width)`` over the bisection log."""
    rows = [r for r in result.log if r[2] - r[1] >= min_width and r[5] > 0]
    if len(rows) < 3:
        return float("nan")
    w = np.array([r[2] - r[1] for r in rows])
    T = np.array([r[5] for r in rows])
    return float(np.polyfit(-np.log(w), T, 1)[0])
