"""Even functions on a truncated line.

Only the half line ``0 < x < L`` is stored, at the staggered nodes
``x_j = (j + 1/2) h``.  Even functions are expanded in the cosine basis
``cos(pi m x / L)`` (Neumann at both ends), odd functions in the sine basis
``sin(pi (m + 1) x / L)``.  Both transforms are orthonormal DCT-II / DST-II
pairs, so the discrete Plancherel identity is exact.

All integrals are over the full line: a half-line sum is doubled.
"""
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import fft as sfft

from .errors import GridError

MIN_POINTS = 16


@dataclass(frozen=True)
class GridSpec:
    """Uniform staggered grid on ``[0, L]`` representing even functions on ``[-L, L]``."""

    L: float
    N: int

    def __post_init__(self):
        if not np.isfinite(self.L) or self.L <= 0:
            raise GridError(f"half length must be positive, got L={self.L}")
        if int(self.N) != self.N or self.N < MIN_POINTS:
            raise GridError(f"need at least {MIN_POINTS} points, got N={self.N}")

    @property
    def h(self):
        return self.L / self.N

    @cached_property
    def x(self):
        return (np.arange(self.N) + 0.5) * self.h

    @cached_property
    def xi(self):
        """Cosine-mode frequencies ``pi m / L``."""
        return np.pi * np.arange(self.N) / self.L

    @cached_property
    def xi_odd(self):
        """Sine-mode frequencies ``pi (m + 1) / L``."""
        return np.pi * (np.arange(self.N) + 1) / self.L

    @property
    def weight(self):
        # full-line quadrature weight per half-line node
        return 2.0 * self.h

    def check_resolves(self, beta):
        """Raise :class:`GridError` unless ``h <= 0.1 / beta``."""
        if self.h > 0.1 / beta * (1 + 1e-12):
            raise GridError(
                f"grid spacing h={self.h:.4g} does not resolve the soliton scale "
                f"(need h <= 0.1/beta = {0.1 / beta:.4g})")

    # transforms -----------------------------------------------------------

    def dct(self, f):
        return sfft.dct(f, type=2, norm="ortho", axis=-1)

    def idct(self, c):
        return sfft.idct(c, type=2, norm="ortho", axis=-1)

    def dst(self, f):
        return sfft.dst(f, type=2, norm="ortho", axis=-1)

    def idst(self, c):
        return sfft.idst(c, type=2, norm="ortho", axis=-1)

    # calculus -------------------------------------------------------------

    def neg_laplacian(self, f):
        """``-f''`` for an even field."""
        return self.idct(self.xi ** 2 * self.dct(f))

    def neg_laplacian_odd(self, f):
        """``-f''`` for an odd field (half-line samples)."""
        return self.idst(self.xi_odd ** 2 * self.dst(f))

    def deriv_even(self, f):
        """Derivative of an even field; the result is odd (half-line samples)."""
        c = self.dct(f)
        s = np.zeros_like(c)
        s[..., :-1] = -self.xi[1:] * c[..., 1:]
        return self.idst(s)

    def deriv_odd(self, g):
        """Derivative of an odd field; the result is even."""
        s = self.dst(g)
        c = np.zeros_like(s)
        c[..., 1:] = self.xi[1:] * s[..., :-1]
        return self.idct(c)

    # quadrature -----------------------------------------------------------

    def integrate(self, f):
        return self.weight * np.sum(f, axis=-1)

    def inner(self, f, g):
        return self.weight * np.sum(f * g, axis=-1)

    def l2(self, f):
        return np.sqrt(self.inner(f, f))


def make_grid(L, N):
    """Grid with half length ``L`` and ``N`` half-line nodes."""
    return GridSpec(float(L), int(N))


@dataclass(frozen=True)
class EvenField:
    """Samples of an even function at the half-line nodes of ``grid``."""

    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.N,):
            raise GridError(f"expected {self.grid.N} samples, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise GridError("field has non-finite samples")
        object.__setattr__(self, "values", v)

    def _other(self, other):
        if isinstance(other, EvenField):
            if other.grid != self.grid:
                raise GridError("fields live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return EvenField(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return EvenField(self.grid, self.values - self._other(other))

    def __mul__(self, other):
        return EvenField(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __neg__(self):
        return EvenField(self.grid, -self.values)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


@dataclass(frozen=True)
class StateVec:
    """Phase-space point ``(u, u_t)`` in ``H^1 x L^2``, both even."""

    grid: GridSpec
    u: np.ndarray = field(repr=False)
    ud: np.ndarray = field(repr=False)

    def __post_init__(self):
        for name in ("u", "ud"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (self.grid.N,):
                raise GridError(f"{name}: expected {self.grid.N} samples, got {v.shape}")
            object.__setattr__(self, name, v)

    def reversed(self):
        """Time-reversed datum ``(u, -u_t)``."""
        return StateVec(self.grid, self.u, -self.ud)

    def __neg__(self):
        return StateVec(self.grid, -self.u, -self.ud)

    def norm(self):
        """``||(u, u_t)||_{H^1 x L^2}``."""
        return np.sqrt(sobolev_norm(self.u, 1.0, self.grid) ** 2 + self.grid.inner(self.ud, self.ud))


def _values(f):
    return f.values if isinstance(f, EvenField) else np.asarray(f, dtype=float)


def _grid_of(f, grid):
    if grid is None:
        if not isinstance(f, EvenField):
            raise TypeError("pass an EvenField or supply grid=")
        return f.grid
    return grid


def cosine_transform(f, grid=None):
    """Orthonormal cosine coefficients of an even field."""
    return _grid_of(f, grid).dct(_values(f))


def inverse_cosine_transform(coeffs, grid):
    return EvenField(grid, grid.idct(np.asarray(coeffs, dtype=float)))


def sobolev_norm(f, s, grid=None):
    """``(int (1 + xi^2)^s |f^(xi)|^2 dxi)^(1/2)`` over the full line, ``-2 <= s <= 2``."""
    if not -2.0 <= s <= 2.0:
        raise ValueError(f"Sobolev index must lie in [-2, 2], got {s}")
    grid = _grid_of(f, grid)
    c = grid.dct(_values(f))
    return float(np.sqrt(grid.weight * np.sum((1.0 + grid.xi ** 2) ** s * c ** 2)))


def weighted_L2(f, s_w, grid=None):
    """``|| <x>^{-s_w} f ||_2`` with ``<x> = (1 + x^2)^(1/2)``."""
    if s_w < 0:
        raise ValueError("weight exponent must be nonnegative")
    grid = _grid_of(f, grid)
    w = (1.0 + grid.x ** 2) ** (-0.5 * s_w)
    return float(grid.l2(w * _values(f)))


def extend_state(state, N_new, tol=1e-10):
    """Zero-pad ``state`` onto a longer grid with the same spacing.

    Raises :class:`GridError` unless the data are below ``tol`` (relative) at
    the old edge, so that padding does not create a jump.
    """
    g = state.grid
    if N_new < g.N:
        raise GridError("extension cannot shrink the grid")
    if N_new == g.N:
        return state
    scale = max(np.max(np.abs(state.u)), np.max(np.abs(state.ud)), 1e-300)
    edge = max(abs(state.u[-1]), abs(state.ud[-1]))
    if edge > tol * scale:
        raise GridError(f"data not negligible at x=L ({edge:.2e}); cannot zero-pad")
    new = GridSpec(g.h * N_new, N_new)
    pad = np.zeros(N_new - g.N)
    return StateVec(new, np.concatenate([state.u, pad]), np.concatenate([state.ud, pad]))
