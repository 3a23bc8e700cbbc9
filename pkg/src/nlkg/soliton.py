"""Ground state, energies, K-functionals and the modulation decomposition near +-Q."""
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InconsistentSign, NumericalFailure, OutsideRegion
from .grid import GridSpec, StateVec, _values
from .kernels import power_nonlinearity


@dataclass(frozen=True)
class ModelParams:
    """Nonlinearity exponent and the threshold constants of the trapping/ejection analysis.

    The constants are only constrained by orderings; the defaults satisfy
    ``delta_star <= delta_S``, ``delta_star << delta_X`` and
    ``eps_star << R_star << delta_star``.
    """

    p: float
    delta_E: float = 0.1
    delta_X: float = 0.08
    C_star: float = 1.0
    delta_star: float = 0.01
    R_star: float = 0.003
    eps_star: float = 0.0005
    eps: float = 0.01

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError(f"exponent must exceed 1, got p={self.p}")
        bad = []
        if not 0 < self.delta_X <= self.delta_E:
            bad.append("0 < delta_X <= delta_E")
        if self.C_star < 1:
            bad.append("C_star >= 1")
        if not self.delta_star <= self.delta_S:
            bad.append("delta_star <= delta_S")
        if not self.delta_star <= self.delta_X / 4:
            bad.append("delta_star <= delta_X/4")
        if not 0 < self.eps_star <= self.R_star / 5:
            bad.append("eps_star <= R_star/5")
        if not self.R_star <= self.delta_star / 3:
            bad.append("R_star <= delta_star/3")
        if self.eps <= 0:
            bad.append("eps > 0")
        if bad:
            raise ValueError("threshold constants violate ordering: " + ", ".join(bad))

    @property
    def alpha(self):
        return ((self.p + 1) / 2) ** (1 / (self.p - 1))

    @property
    def beta(self):
        return (self.p - 1) / 2

    @property
    def delta_S(self):
        return self.delta_X / (2 * self.C_star)

    @property
    def delta_trap(self):
        return 3 * self.eps

    @property
    def k_exact(self):
        """Closed-form ``k`` with ``-k^2`` the bottom of ``L_+`` (sech^2 well)."""
        return np.sqrt((self.p - 1) * (self.p + 3)) / 2

    def with_C_star(self, C_star):
        return replace(self, C_star=max(1.0, float(C_star)))


def _logcosh(y):
    y = np.abs(y)
    return y + np.log1p(np.exp(-2 * y)) - np.log(2.0)


def soliton_values(x, params):
    """``alpha cosh(beta x)^(-1/beta)``, evaluated in log form to avoid overflow."""
    a, b = params.alpha, params.beta
    return a * np.exp(-_logcosh(b * np.asarray(x, dtype=float)) / b)


def soliton_derivative(x, params):
    x = np.asarray(x, dtype=float)
    return -np.tanh(params.beta * x) * soliton_values(x, params)


@dataclass(frozen=True)
class SolitonData:
    params: ModelParams
    grid: GridSpec
    Q: np.ndarray = field(repr=False)
    Qp: np.ndarray = field(repr=False)  # odd: half-line samples of Q'
    rho: np.ndarray = field(repr=False)
    k: float = 0.0
    JQ: float = 0.0

    @property
    def state(self):
        return StateVec(self.grid, self.Q, np.zeros_like(self.Q))

    def L_plus(self, f):
        return self.grid.neg_laplacian(f) + (1 - self.params.p * self.Q ** (self.params.p - 1)) * f


def soliton_profile(params, grid, check_resolution=True):
    """Sample ``Q`` on ``grid`` and attach the ground state of ``L_+``.

    Raises
    ------
    NumericalFailure
        When the eigen-solve fails or the static equation is not resolved.
    """
    from .spectral import assemble_L, ground_state

    if params.p <= 3:
        raise ValueError("soliton experiments need p > 3")
    if check_resolution:
        grid.check_resolves(params.beta)
    x = grid.x
    Q = soliton_values(x, params)
    Qp = soliton_derivative(x, params)
    op = assemble_L("plus", params, grid)
    rho, neg = ground_state(op)
    k = float(np.sqrt(-neg))
    sol = SolitonData(params, grid, Q, Qp, rho, k, 0.0)
    sol = replace(sol, JQ=action(Q, params, grid))
    res = grid.l2(grid.neg_laplacian(Q) + Q - nonlinearity(Q, params)) / grid.l2(Q)
    if res > 1e-8:
        raise NumericalFailure(f"static equation residual {res:.2e}: grid too coarse or L too small")
    return sol


# functionals ------------------------------------------------------------------

def nonlinearity(u, params):
    """``|u|^(p-1) u`` with the value 0 at ``u = 0``."""
    return power_nonlinearity(_values(u), params.p)


def _potential_term(u, params):
    return power_nonlinearity(np.abs(u), params.p + 1)


def _dx2(u, grid):
    c = grid.dct(u)
    return grid.weight * np.sum(grid.xi ** 2 * c ** 2, axis=-1)


def action(u, params, grid=None):
    """Static energy ``J(u) = int [(|u_x|^2 + |u|^2)/2 - |u|^(p+1)/(p+1)]``."""
    grid = grid or u.grid
    u = _values(u)
    return float(0.5 * (_dx2(u, grid) + grid.inner(u, u))
                 - grid.integrate(_potential_term(u, params)) / (params.p + 1))


def energy(state, params):
    """Conserved energy of ``(u, u_t)``."""
    g = state.grid
    return action(state.u, params, g) + 0.5 * float(g.inner(state.ud, state.ud))


def k_functionals(u, params, grid=None):
    """``(K0, K2)``: the Nehari and virial functionals."""
    grid = grid or u.grid
    u = _values(u)
    dx2 = _dx2(u, grid)
    pot = grid.integrate(_potential_term(u, params))
    p = params.p
    K0 = dx2 + grid.inner(u, u) - pot
    K2 = dx2 - (p - 1) / (2 * (p + 1)) * pot
    return float(K0), float(K2)


def nonlinear_remainder(v, sol):
    """``N(Q, v) = f(Q + v) - f(Q) - f'(Q) v`` with ``f(u) = |u|^(p-1) u``."""
    p = sol.params.p
    Q = sol.Q
    return (power_nonlinearity(Q + v, p) - power_nonlinearity(Q, p)
            - p * Q ** (p - 1) * v)


# decomposition ------------------------------------------------------------------

def cutoff(r):
    """Smooth step: 1 on ``[0, 1]``, 0 on ``[2, inf)``, quintic in between."""
    t = np.clip(np.asarray(r, dtype=float) - 1.0, 0.0, 1.0)
    return 1.0 - t ** 3 * (10 - 15 * t + 6 * t * t)


@dataclass(frozen=True)
class Decomposition:
    sigma: int
    lam: float
    lam_dot: float
    lam_pm: tuple
    gamma: np.ndarray = field(repr=False)
    gamma_dot: np.ndarray = field(repr=False)
    dist: float = 0.0
    energy_norm: float = 0.0
    energy: float = 0.0
    C: float = 0.0


def choose_sigma(state, sol):
    g = state.grid
    cu = g.dct(state.u)
    cq = g.dct(sol.Q)
    return 1 if np.sum((1 + g.xi ** 2) * cu * cq) >= 0 else -1


def decompose(state, sol, sigma_hint=None):
    """Split ``u = sigma (Q + lam rho + gamma)`` and evaluate the distance ``d_sigma``."""
    params, g = sol.params, state.grid
    sigma = choose_sigma(state, sol) if sigma_hint is None else int(np.sign(sigma_hint) or 1)
    v = sigma * state.u - sol.Q
    vd = sigma * state.ud
    rho, k = sol.rho, sol.k
    lam = float(g.inner(v, rho))
    lam_dot = float(g.inner(vd, rho))
    gamma = v - lam * rho
    gamma_dot = vd - lam_dot * rho
    Lgg = float(g.inner(sol.L_plus(gamma), gamma))
    gnorm = float(g.inner(gamma, gamma) + _dx2(gamma, g))
    if Lgg < -1e-8 * max(1.0, gnorm):
        raise NumericalFailure(f"<L+ gamma|gamma> = {Lgg:.3e} < 0: gamma not orthogonal to rho")
    gd2 = float(g.inner(gamma_dot, gamma_dot))
    quad_g = 0.5 * (Lgg + gd2)
    norm_E2 = 0.5 * (lam_dot ** 2 + k * k * lam ** 2) + quad_g
    E = energy(state, params)
    C = sol.JQ + 0.5 * (lam_dot ** 2 - k * k * lam ** 2) + quad_g - E
    norm_E = np.sqrt(max(norm_E2, 0.0))
    d2 = norm_E2 - cutoff(norm_E / (2 * params.delta_E)) * C
    lam_pm = (0.5 * (lam + lam_dot / k), 0.5 * (lam - lam_dot / k))
    return Decomposition(sigma, lam, lam_dot, lam_pm, gamma, gamma_dot,
                         float(np.sqrt(max(d2, 0.0))), float(norm_E), float(E), float(C))


def distance_to_Q(state, sol):
    return decompose(state, sol).dist


def _sign(x):
    return 1 if x >= 0 else -1


def sign_functional(state, sol, params=None, check_region=True, dec=None):
    """The +-1 functional that reads ``-sign(lam)`` near +-Q and ``sign K0`` away from it.

    Raises
    ------
    OutsideRegion
        ``E >= J(Q) + min(d_Q^2/2, eps^2)`` (when ``check_region``).
    InconsistentSign
        The two rules disagree on the overlap, or ``K0`` and ``K2`` disagree.
    """
    params = params or sol.params
    g = state.grid
    if not np.any(state.u) and not np.any(state.ud):
        return 1
    dec = dec or decompose(state, sol)
    d = dec.dist
    if check_region and not dec.energy < sol.JQ + min(d * d / 2, params.eps ** 2):
        raise OutsideRegion(f"E - J(Q) = {dec.energy - sol.JQ:.3e} not below min(d^2/2, eps^2) "
                            f"with d = {d:.3e}")
    near = -_sign(dec.lam) if d <= params.delta_E else None
    far = None
    if d >= params.delta_star:
        K0, K2 = k_functionals(state.u, params, g)
        far = _sign(K0)
        if _sign(K2) != far and check_region:
            raise InconsistentSign(f"sign K0 != sign K2 (K0={K0:.3e}, K2={K2:.3e})")
    if near is not None and far is not None and near != far:
        raise InconsistentSign(f"-sign(lambda)={near} but sign K0={far} at d={d:.3e}")
    return near if near is not None else far
