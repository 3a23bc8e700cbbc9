"""Spectral theory of the linearized operators ``L_+-``.

Everything here is written for ``calL = -d^2/dx^2 + V`` with an even,
exponentially decaying potential, so that ``L_+- = calL + 1``.  The
generalized eigenfunctions ``theta`` (even) and ``phi`` (odd) and the Jost
solution ``f_+`` are integrated with a fourth-order Magnus scheme
(:func:`nlkg.kernels.magnus_sweep`), which is exact wherever ``V`` is constant
and therefore uniform in the spectral parameter.

Beyond the support of ``V`` the combination ``xi^2 theta^2 + theta'^2`` is
constant; the diagonal spectral densities are

    mu1 = xi / (2 pi (xi^2 theta^2 + theta'^2)),
    mu2 = xi / (2 pi (xi^2 phi^2 + phi'^2)),      xi = sqrt(lambda),

which equal ``Im(-1/(2 m_+))/pi`` and ``Im(m_+/2)/pi`` for the Weyl function
``m_+ = f_+'(0)/f_+(0)`` but never require a complex division.
"""
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, NamedTuple, Optional
import warnings

import numpy as np
from scipy.sparse.linalg import LinearOperator, lobpcg

from .errors import NoNegativeEigenvalue, NonConvergence, QuadratureUnderResolved
from .grid import GridSpec, StateVec, _values, make_grid, sobolev_norm
from .kernels import magnus_sweep
from .soliton import soliton_derivative, soliton_values

GAUSS_OFFSET = np.sqrt(3.0) / 6.0
TAU_RES = 1e-4
PARSEVAL_TOL = 1e-6


# operators ------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SchrodingerOp:
    """``calL f = -f'' + V f`` on even functions of ``grid``.

    ``V_func`` evaluates the potential anywhere (the Magnus integrator needs
    off-grid values); without it the cosine interpolant of the samples is used.
    """

    grid: GridSpec
    V: np.ndarray = field(repr=False)
    tag: str = "custom"
    V_func: Optional[Callable] = field(default=None, repr=False)

    def potential_at(self, x):
        x = np.asarray(x, dtype=float)
        if self.V_func is not None:
            return np.asarray(self.V_func(np.abs(x)), dtype=float) * np.ones_like(x)
        g = self.grid
        c = g.dct(self.V) * np.sqrt(2.0 / g.N)
        c[0] /= np.sqrt(2.0)
        out = np.zeros(x.size)
        flat = np.abs(x).ravel()
        for start in range(0, flat.size, 512):
            sl = slice(start, start + 512)
            out[sl] = np.cos(np.outer(flat[sl], g.xi)) @ c
        return out.reshape(x.shape)

    def apply(self, f):
        return self.grid.neg_laplacian(f) + self.V * f

    def apply_odd(self, f):
        return self.grid.neg_laplacian_odd(f) + self.V * f

    @property
    def L1(self):
        return float(self.grid.integrate(np.abs(self.V)))

    @property
    def x_start(self):
        """Node near ``0.9 L`` where plane-wave data are imposed."""
        return self.grid.x[self.start_index]

    @property
    def start_index(self):
        g = self.grid
        return int(min(g.N - 1, round(0.9 * g.L / g.h - 0.5)))

    def on_grid(self, grid):
        """Same potential sampled on another grid (requires ``V_func``)."""
        if self.V_func is None:
            raise ValueError("re-gridding needs an analytic potential")
        return SchrodingerOp(grid, self.V_func(grid.x), self.tag, self.V_func)

    def tail_ok(self):
        """``|V| <= C e^{-x}`` beyond ``L/2`` with ``C = max |V|``."""
        g = self.grid
        far = g.x > g.L / 2
        C = max(np.max(np.abs(self.V)), 1e-300)
        return bool(np.all(np.abs(self.V[far]) <= C * np.exp(-g.x[far]) + 1e-300))

    @cached_property
    def outward_path(self):
        g = self.grid
        z = np.concatenate([[0.0], g.x])
        return z, self._gauss(z)

    def backward_path(self):
        g = self.grid
        js = self.start_index
        pos = g.x[js::-1]
        z = np.concatenate([pos, [0.0], -pos[::-1]])
        return z, self._gauss(z)

    def _gauss(self, z):
        s = np.diff(z)
        mid = z[:-1] + 0.5 * s
        v1 = self.potential_at(mid - GAUSS_OFFSET * s)
        v2 = self.potential_at(mid + GAUSS_OFFSET * s)
        return s, v1, v2


def assemble_L(kind, params=None, grid=None, V=None, tag=None):
    """``calL = L_+- - 1`` for the soliton of ``params``, or a custom potential.

    ``kind`` is ``"plus"`` (``V = -p Q^(p-1)``), ``"minus"`` (``V = -Q^(p-1)``)
    or ``"custom"`` with ``V`` a callable of ``x`` or an array of samples.
    """
    if kind in ("plus", "minus"):
        c = params.p if kind == "plus" else 1.0
        p = params.p

        def V_func(x, c=c, p=p, params=params):
            return -c * soliton_values(x, params) ** (p - 1)

        tag = tag or f"L{'+' if kind == 'plus' else '-'} - 1, p={p:g}"
        return SchrodingerOp(grid, V_func(grid.x), tag, V_func)
    if kind != "custom":
        raise ValueError(f"unknown operator kind {kind!r}")
    if callable(V):
        return SchrodingerOp(grid, np.asarray(V(grid.x), dtype=float) * np.ones(grid.N),
                             tag or "custom", V)
    V = np.zeros(grid.N) if V is None else np.asarray(_values(V), dtype=float)
    return SchrodingerOp(grid, V, tag or "custom", None)


def free_op(grid):
    return assemble_L("custom", grid=grid, V=lambda x: np.zeros_like(x), tag="free")


def cubic_op(grid):
    """The resonant potential ``-6 sech^2 x`` (linearized cubic equation)."""
    return assemble_L("custom", grid=grid, V=lambda x: -6.0 / np.cosh(x) ** 2, tag="-6 sech^2 x")


# eigenpairs -----------------------------------------------------------------------

def _lobpcg(op, X0, shift=None):
    g = op.grid
    n = g.N
    shift = 1.0 - min(0.0, float(np.min(op.V))) if shift is None else shift
    A = LinearOperator((n, n), matvec=lambda f: op.apply(f.ravel()),
                       matmat=lambda F: op.apply(F.T).T, dtype=float)
    M = LinearOperator((n, n), matvec=lambda f: g.idct(g.dct(f.ravel()) / (g.xi ** 2 + shift)),
                       matmat=lambda F: g.idct(g.dct(F.T) / (g.xi ** 2 + shift)).T, dtype=float)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        w, v = lobpcg(A, X0, M=M, largest=False, tol=1e-11, maxiter=1000)
    return w, v


def even_bound_state_count(op):
    """Number of even eigenvalues of ``calL`` below 0 (zeros of ``theta(., 0)``)."""
    _, (s, v1, v2) = op.outward_path
    y = magnus_sweep(v1, v2, s, np.zeros(1), np.array([[1.0, 0.0]]))[0, 1:, 0]
    y = y[: op.start_index + 1]
    return int(np.count_nonzero(np.signbit(y[1:]) != np.signbit(y[:-1])))


def even_eigenpairs(op):
    """Even eigenpairs of ``calL`` below the continuum, eigenfunctions L2-normalized and positive at 0."""
    count = even_bound_state_count(op)
    if count == 0:
        return np.zeros(0), np.zeros((0, op.grid.N))
    g = op.grid
    width = max(1.0, 1.0 / np.sqrt(max(1e-12, -float(np.min(op.V)))))
    X0 = np.stack([(g.x / width) ** (2 * i) * np.exp(-(g.x / (2 * width)) ** 2)
                   for i in range(count)], axis=1)
    w, v = _lobpcg(op, X0)
    order = np.argsort(w)
    w, v = w[order], v[:, order].T.copy()
    for i in range(count):
        v[i] /= g.l2(v[i])
        if v[i][0] < 0:
            v[i] = -v[i]
    keep = w < 0
    return w[keep], v[keep]


def ground_state(op):
    """Lowest even eigenpair of ``L = calL + 1``: ``(rho, neg_eig)`` with ``rho > 0``, ``||rho|| = 1``.

    Raises
    ------
    NoNegativeEigenvalue
        When the bottom of the even spectrum of ``L`` is nonnegative.
    """
    g = op.grid
    depth = max(1e-12, -float(np.min(op.V)))
    width = max(0.2, 1.0 / np.sqrt(depth))
    X0 = (np.exp(-(g.x / width) ** 2) + np.sqrt(np.abs(op.V) / depth))[:, None]
    w, v = _lobpcg(op, X0)
    lam0 = float(w[0])
    rho = v[:, 0] / g.l2(v[:, 0])
    if np.sum(rho) < 0:
        rho = -rho
    neg = lam0 + 1.0
    if neg >= 0:
        raise NoNegativeEigenvalue(f"bottom of even spectrum of {op.tag} + 1 is {neg:.6g} >= 0")
    res = g.l2(op.apply(rho) - lam0 * rho)
    if res > 1e-6:
        raise NonConvergence(f"ground state residual {res:.2e}")
    return rho, neg


def zero_mode_residuals(params, grid):
    """``(||L_+ Q'|| / ||Q'||, ||L_- Q|| / ||Q||)``; ``Q'`` is handled in the odd (sine) sector."""
    x = grid.x
    Q = soliton_values(x, params)
    Qp = soliton_derivative(x, params)
    p = params.p
    Lp_Qp = grid.neg_laplacian_odd(Qp) + (1 - p * Q ** (p - 1)) * Qp
    Lm_Q = grid.neg_laplacian(Q) + (1 - Q ** (p - 1)) * Q
    return float(grid.l2(Lp_Qp) / grid.l2(Qp)), float(grid.l2(Lm_Q) / grid.l2(Q))


# zero energy ----------------------------------------------------------------------

def _cumulative_from_right(F, h):
    """``I[i] = int_{z_i}^{z_M} F`` with fourth-order cell rules."""
    M = F.shape[-1] - 1
    cells = np.empty(M)
    cells[1:M - 1] = h / 24 * (-F[:M - 2] + 13 * F[1:M - 1] + 13 * F[2:M] - F[3:M + 1])
    cells[0] = h / 24 * (9 * F[0] + 19 * F[1] - 5 * F[2] + F[3])
    cells[M - 1] = h / 24 * (F[M - 3] - 5 * F[M - 2] + 19 * F[M - 1] + 9 * F[M])
    out = np.zeros(M + 1)
    out[:M] = np.cumsum(cells[::-1])[::-1]
    return out


class ZeroEnergyPair(NamedTuple):
    z: np.ndarray
    u0: np.ndarray
    u0p: np.ndarray
    u1: np.ndarray
    u1p: np.ndarray
    iterations: int


def zero_energy_solutions(op, max_iter=2000):
    """``u_{0,+} ~ 1`` and ``u_{1,+} ~ x`` at ``+inf`` by iterating their Volterra equations.

    The iteration runs on ``[0, 0.9 L]`` with spacing ``h / 2``.

    Raises
    ------
    NonConvergence
        When the Neumann series fails to settle (potential tail too long for ``L``).
    """
    g = op.grid
    X = op.x_start
    hz = g.h / 2
    M = int(round(X / hz))
    z = np.linspace(0.0, M * hz, M + 1)
    V = op.potential_at(z)
    out = []
    its = 0
    for base, dbase in ((np.ones_like(z), np.zeros_like(z)), (z.copy(), np.ones_like(z))):
        u = base.copy()
        prev = np.inf
        for it in range(max_iter):
            I0 = _cumulative_from_right(V * u, hz)
            I1 = _cumulative_from_right(z * V * u, hz)
            new = base + I1 - z * I0
            if not np.all(np.isfinite(new)):
                raise NonConvergence("Volterra iteration overflowed")
            delta = np.max(np.abs(new - u) / (1.0 + np.abs(new)))
            u = new
            # stop at round-off: tiny update, or updates no longer shrinking near the floor
            if delta <= 1e-15 or (delta < 1e-12 and delta >= prev):
                break
            prev = delta
        else:
            raise NonConvergence(f"Volterra iteration did not contract in {max_iter} sweeps")
        its = max(its, it + 1)
        up = dbase - _cumulative_from_right(V * u, hz)
        out.extend([u, up])
    return ZeroEnergyPair(z, out[0], out[1], out[2], out[3], its)


# Jost solutions -------------------------------------------------------------------

@dataclass(frozen=True)
class JostData:
    """Jost solution ``f_+(x, lambda) ~ exp(i x sqrt(lambda))`` at ``+inf``.

    ``x`` runs from ``x_start`` down to ``-x_start`` through 0; ``f`` and ``fp``
    are the values and derivatives there.
    """

    lam: float
    x: np.ndarray = field(repr=False)
    f: np.ndarray = field(repr=False)
    fp: np.ndarray = field(repr=False)
    f0: complex = 0j
    fp0: complex = 0j
    W: complex = 0j
    a_plus: complex = 0j
    b_plus: complex = 0j

    @property
    def m_plus(self):
        return self.fp0 / self.f0

    def on_grid(self, grid):
        """``f_+`` at the half-line nodes; plane wave beyond ``x_start``."""
        xi = np.sqrt(self.lam)
        out = np.exp(1j * xi * grid.x)
        n = np.searchsorted(-self.x, 0.0)  # index of x = 0
        pos = self.x[:n][::-1]
        vals = self.f[:n][::-1]
        idx = np.searchsorted(grid.x, pos)
        out[idx] = vals
        return out

    def wronskian_profile(self):
        """``W(f_+, f_-)(x)`` at the sample points, ``f_-(x) = f_+(-x)``."""
        fm = self.f[::-1]
        fmp = -self.fp[::-1]
        return self.f * fmp - self.fp * fm


def jost_solution(op, lam):
    """Integrate ``f_+`` backward from ``x_start`` with plane-wave data; ``lam >= 0``.

    At ``lam = 0`` the connection coefficients use the Volterra pair
    ``u_{0,+}, u_{1,+}``; for ``lam > 0`` the pair is continued in ``lam``
    from the same Cauchy data at ``x = 0``.
    """
    if lam < 0:
        raise ValueError("jost_solution needs lam >= 0")
    z, (s, v1, v2) = op.backward_path()
    y = magnus_sweep(v1, v2, s, np.array([lam, lam]), np.array([[1.0, 0.0], [0.0, 1.0]]))
    xi = np.sqrt(lam)
    xs = z[0]
    c1 = np.exp(1j * xi * xs)
    c2 = 1j * xi * c1
    f = c1 * y[0, :, 0] + c2 * y[1, :, 0]
    fp = c1 * y[0, :, 1] + c2 * y[1, :, 1]
    i0 = int(np.argmin(np.abs(z)))
    f0, fp0 = complex(f[i0]), complex(fp[i0])
    W = -2.0 * f0 * fp0
    zp = _zero_energy_cached(op)
    u0, u0p, u1, u1p = zp.u0[0], zp.u0p[0], zp.u1[0], zp.u1p[0]
    a_plus = -(f0 * u1p - fp0 * u1)
    b_plus = f0 * u0p - fp0 * u0
    return JostData(float(lam), z, f, fp, f0, fp0, complex(W), complex(a_plus), complex(b_plus))


_ZE_CACHE = {}


def _zero_energy_cached(op):
    key = id(op)
    hit = _ZE_CACHE.get(key)
    if hit is None or hit[0] is not op:
        if len(_ZE_CACHE) > 16:
            _ZE_CACHE.clear()
        hit = (op, zero_energy_solutions(op))
        _ZE_CACHE[key] = hit
    return hit[1]


def zero_energy_wronskian(op):
    """``W(0) = W(u_{0,+}, u_{0,-}) = -2 u_{0,+}(0) u_{0,+}'(0)`` from the Volterra pair."""
    zp = _zero_energy_cached(op)
    return -2.0 * zp.u0[0] * zp.u0p[0]


class ResonanceReport(NamedTuple):
    resonant: bool
    W0_abs: float
    W0_abs_doubled: float
    threshold: float


def resonance_check(op, refine=True, tau=TAU_RES):
    """Threshold-resonance test: ``|W(0)| < tau (1 + ||V||_1)``, confirmed under L-doubling.

    The confirmation grid doubles ``L`` and halves ``h``.  A genuine zero of
    ``W(0)`` then shrinks with the fourth-order discretization error (at
    least 4x, or it stays at round-off), while a nonzero ``c0`` is stable.
    """
    W0 = abs(zero_energy_wronskian(op))
    thr = tau * (1 + op.L1)
    W2 = np.nan
    small = W0 < thr
    if refine and op.V_func is not None:
        g = op.grid
        W2 = abs(zero_energy_wronskian(op.on_grid(make_grid(2 * g.L, 4 * g.N))))
        if small:
            small = W2 < thr and (W2 <= W0 / 4 or max(W0, W2) < 1e-13 * (1 + op.L1))
    return ResonanceReport(bool(small), float(W0), float(W2), float(thr))


# spectral measure -----------------------------------------------------------------

def lambda_quadrature(Lambda_max=400.0, panel=0.25, order=16, xi_min=0.0):
    """Composite Gauss-Legendre rule in ``xi = sqrt(lambda)`` on ``[xi_min, sqrt(Lambda_max)]``.

    Returns ``(lam, w)`` with ``sum w F(lam) ~ int F(lambda) dlambda``.  Working
    in ``xi`` removes the ``lambda^(-1/2)`` edge singularity of resonant measures.
    """
    xi_max = np.sqrt(Lambda_max)
    npan = int(np.ceil((xi_max - xi_min) / panel))
    edges = np.linspace(xi_min, xi_max, npan + 1)
    t, wt = np.polynomial.legendre.leggauss(order)
    a, b = edges[:-1, None], edges[1:, None]
    xi = (0.5 * (b - a) * t + 0.5 * (a + b)).ravel()
    wxi = (0.5 * (b - a) * wt).ravel()
    return xi ** 2, 2 * xi * wxi


def table_lambda_grid(Lambda_max=400.0, n_geom=40, n_uniform=200):
    """Reporting grid: geometric on ``[1e-4, 1]``, uniform on ``[1, Lambda_max]``."""
    geo = np.geomspace(1e-4, 1.0, n_geom)
    uni = np.linspace(1.0, Lambda_max, n_uniform + 1)[1:]
    return np.concatenate([geo, uni])


@dataclass(frozen=True, eq=False)
class SpectralMeasure:
    op: SchrodingerOp
    lam: np.ndarray = field(repr=False)
    weights: Optional[np.ndarray] = field(repr=False)
    mu1: np.ndarray = field(repr=False)
    mu2: np.ndarray = field(repr=False)
    W: np.ndarray = field(repr=False)
    m_plus: np.ndarray = field(repr=False)
    theta: np.ndarray = field(repr=False)  # (n_lam, N)
    phi: np.ndarray = field(repr=False)
    eig_values: np.ndarray = field(repr=False)
    eig_vectors: np.ndarray = field(repr=False)

    @property
    def grid(self):
        return self.op.grid

    @property
    def omega(self):
        return np.sqrt(1.0 + self.lam)


def _outward_fundamental(op, lam, chunk=256):
    _, (s, v1, v2) = op.outward_path
    js = op.start_index + 1  # column of x_start in the sweep output
    n = lam.size
    N = op.grid.N
    theta = np.empty((n, N))
    phi = np.empty((n, N))
    th_end = np.empty((n, 2))
    ph_end = np.empty((n, 2))
    for a in range(0, n, chunk):
        sl = slice(a, min(n, a + chunk))
        m = sl.stop - sl.start
        yt = magnus_sweep(v1, v2, s, lam[sl], np.tile([1.0, 0.0], (m, 1)))
        theta[sl] = yt[:, 1:, 0]
        th_end[sl] = yt[:, js]
        del yt
        yp = magnus_sweep(v1, v2, s, lam[sl], np.tile([0.0, 1.0], (m, 1)))
        phi[sl] = yp[:, 1:, 0]
        ph_end[sl] = yp[:, js]
        del yp
    return theta, phi, th_end, ph_end


def spectral_measure(op, lam=None, weights=None, Lambda_max=400.0, keep_eigenfunctions=True):
    """Diagonal spectral measure, Weyl function and generalized eigenfunctions on ``lam``.

    With ``lam=None`` the Gauss rule of :func:`lambda_quadrature` is used and
    its weights are attached, enabling the distorted Fourier transform.
    """
    if lam is None:
        lam, weights = lambda_quadrature(Lambda_max)
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise ValueError("spectral nodes must be positive")
    theta, phi, th, ph = _outward_fundamental(op, lam)
    xi = np.sqrt(lam)
    xs = op.x_start
    mu1 = xi / (2 * np.pi * (xi ** 2 * th[:, 0] ** 2 + th[:, 1] ** 2))
    mu2 = xi / (2 * np.pi * (xi ** 2 * ph[:, 0] ** 2 + ph[:, 1] ** 2))
    e = np.exp(1j * xi * xs)
    f0 = e * (ph[:, 1] - 1j * xi * ph[:, 0])
    fp0 = e * (1j * xi * th[:, 0] - th[:, 1])
    m_plus = fp0 / f0
    W = -2 * f0 * fp0
    ev, evec = even_eigenpairs(op)
    if not keep_eigenfunctions:
        theta = phi = np.zeros((lam.size, 0))
    return SpectralMeasure(op, lam, weights, mu1, mu2, W, m_plus, theta, phi, ev, evec)


def phi_channel(f, m):
    """``int f(x) phi(x, lam) dx`` over the full line, with ``phi`` integrated on both sides of 0.

    Vanishes for even ``f`` exactly in the continuum; the value measures the
    parity defect of the computed ``phi``.
    """
    op = m.op
    g = op.grid
    z = np.concatenate([[0.0], -g.x])
    s, v1, v2 = op._gauss(z)
    y = magnus_sweep(v1, v2, s, m.lam, np.tile([0.0, 1.0], (m.lam.size, 1)))
    phi_neg = y[:, 1:, 0]
    f = _values(f)
    return g.h * (m.phi @ f + phi_neg @ f)


# distorted Fourier transform --------------------------------------------------------

def _require_quadrature(m):
    if m.weights is None or m.theta.shape[1] == 0:
        raise ValueError("measure built without quadrature weights or eigenfunctions")


def eigen_coefficients(f, m):
    g = m.grid
    return g.weight * (m.eig_vectors @ _values(f)) if m.eig_vectors.size else np.zeros(0)


def continuous_part(f, m):
    """``P_c f``: remove the even bound states."""
    f = _values(f)
    c = eigen_coefficients(f, m)
    return f - c @ m.eig_vectors if c.size else f.copy()


def distorted_ft(f, m, check=True):
    """``(F1, F2)`` with ``F1 = int f theta``; ``F2 = int f phi`` vanishes for even ``f``.

    Raises
    ------
    QuadratureUnderResolved
        When the Parseval defect exceeds ``1e-6`` relative.
    """
    _require_quadrature(m)
    g = m.grid
    fv = _values(f)
    F1 = g.weight * (m.theta @ fv)
    F2 = np.zeros_like(F1)
    if check:
        total = g.inner(fv, fv)
        if total > 0:
            c = eigen_coefficients(fv, m)
            rhs = np.sum(c ** 2) + np.sum(m.weights * m.mu1 * F1 ** 2)
            defect = abs(total - rhs) / total
            if defect > PARSEVAL_TOL:
                raise QuadratureUnderResolved(f"Parseval defect {defect:.2e} > {PARSEVAL_TOL:g}")
    return F1, F2


def inverse_distorted_ft(F1, F2, m):
    """Continuous-spectrum reconstruction ``int F1 theta mu1 dlambda`` on the grid."""
    _require_quadrature(m)
    if np.any(np.abs(F2) > 0):
        raise ValueError("phi channel carries odd data; not representable as an even field")
    F1 = np.asarray(F1)
    coef = m.weights * m.mu1 * F1
    return coef @ m.theta if np.isrealobj(coef) else (coef @ m.theta)


def parseval_defect(f, m):
    g = m.grid
    fv = _values(f)
    F1, _ = distorted_ft(fv, m, check=False)
    c = eigen_coefficients(fv, m)
    total = g.inner(fv, fv)
    return abs(total - np.sum(c ** 2) - np.sum(m.weights * m.mu1 * F1 ** 2)) / total


# Klein-Gordon flow relative to L ------------------------------------------------------

def kg_coefficients(state0, m):
    a, _ = distorted_ft(continuous_part(state0.u, m), m, check=False)
    b, _ = distorted_ft(continuous_part(state0.ud, m), m, check=False)
    return a, b


def rotate(a, b, t, omega):
    c, s = np.cos(t * omega), np.sin(t * omega)
    return c * a + s / omega * b, -omega * s * a + c * b


def kg_propagate(state0, t, m):
    """``P_c``-projected linear Klein-Gordon flow ``u_tt + L u = 0`` for time ``t``."""
    a, b = kg_coefficients(state0, m)
    at, bt = rotate(a, b, t, m.omega)
    z = np.zeros_like(at)
    return StateVec(m.grid, inverse_distorted_ft(at, z, m), inverse_distorted_ft(bt, z, m))


def quadratic_energy_coeffs(a, b, m):
    """``<L u, u> + ||u_t||^2`` of a continuous-spectrum state from its coefficients."""
    return float(np.sum(m.weights * m.mu1 * (m.omega ** 2 * a ** 2 + b ** 2)))


def quadratic_energy(state, op):
    g = op.grid
    return float(g.inner(op.apply(state.u) + state.u, state.u) + g.inner(state.ud, state.ud))


def free_kg_propagate(state0, t):
    """Exact free Klein-Gordon flow in the cosine basis (Neumann box)."""
    g = state0.grid
    w = np.sqrt(1 + g.xi ** 2)
    a, b = rotate(g.dct(state0.u), g.dct(state0.ud), t, w)
    return StateVec(g, g.idct(a), g.idct(b))


def local_decay_ratio(f, T, m, dt=0.1, x_max=None, stride=1, sign=1):
    """``max_x <x>^-1 ||exp(+-i t L^(1/2)) P_c f||_{L^2(0,T)}`` over ``||<d_x>^(1/2) f||_2``."""
    if T <= 0:
        raise ValueError("T must be positive")
    _require_quadrature(m)
    g = m.grid
    fv = _values(f)
    den = sobolev_norm(fv, 0.5, g)
    fc = continuous_part(fv, m)
    F1, _ = distorted_ft(fc, m, check=False)
    sel = np.arange(0, g.N, stride)
    if x_max is not None:
        sel = sel[g.x[sel] <= x_max]
    A = m.theta[:, sel].T * (m.weights * m.mu1 * F1)  # (nx, nlam)
    nt = int(np.ceil(T / dt))
    ts = np.linspace(0.0, T, nt + 1)
    wt = np.full(nt + 1, T / nt)
    wt[[0, -1]] *= 0.5
    acc = np.zeros(sel.size)
    for start in range(0, nt + 1, 256):
        sl = slice(start, start + 256)
        u = A @ np.exp(sign * 1j * np.outer(m.omega, ts[sl]))
        acc += np.abs(u) ** 2 @ wt[sl]
    weighted = np.sqrt(acc) / np.sqrt(1 + g.x[sel] ** 2)
    return float(np.max(weighted) / den) if den > 0 else 0.0


# intertwining --------------------------------------------------------------------

def intertwine_U(f, sol_or_params, grid=None, parity="even"):
    """``U f = rho d/dx (f / rho)`` with ``rho = Q^((p+1)/2)``; swaps the even and odd sectors.

    Uses ``rho'/rho = -(p+1)/2 tanh(beta x)`` so no division by the decaying
    weight is needed.
    """
    params = getattr(sol_or_params, "params", sol_or_params)
    grid = grid or sol_or_params.grid
    f = _values(f)
    c = 0.5 * (params.p + 1) * np.tanh(params.beta * grid.x)
    df = grid.deriv_even(f) if parity == "even" else grid.deriv_odd(f)
    return df + c * f


def intertwine_U_adjoint(g_, sol_or_params, grid=None, parity="even"):
    """``U^* g = -g' + (p+1)/2 tanh(beta x) g``."""
    params = getattr(sol_or_params, "params", sol_or_params)
    grid = grid or sol_or_params.grid
    g_ = _values(g_)
    c = 0.5 * (params.p + 1) * np.tanh(params.beta * grid.x)
    dg = grid.deriv_even(g_) if parity == "even" else grid.deriv_odd(g_)
    return -dg + c * g_


def intertwining_defect(f, params, grid):
    """``||(U L_+ - L_- U) f||_2`` for an even ``f`` (the image is odd)."""
    f = _values(f)
    p = params.p
    Q = soliton_values(grid.x, params)
    Lp_f = grid.neg_laplacian(f) + (1 - p * Q ** (p - 1)) * f
    Uf = intertwine_U(f, params, grid)
    Lm_Uf = grid.neg_laplacian_odd(Uf) + (1 - Q ** (p - 1)) * Uf
    return float(grid.l2(intertwine_U(Lp_f, params, grid) - Lm_Uf))
