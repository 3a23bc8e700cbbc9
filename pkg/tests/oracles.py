"""Independent reference computations (scipy ODE solvers and quadrature).

They share no code with the package beyond the closed-form soliton profile.
Their outputs are frozen as constants in the tests; ``test_oracles.py``
re-derives the frozen values.
"""
import numpy as np
from scipy.integrate import quad, solve_ivp


def soliton(x, p):
    a = ((p + 1) / 2) ** (1 / (p - 1))
    b = (p - 1) / 2
    y = np.abs(b * np.asarray(x, dtype=float))
    logcosh = y + np.log1p(np.exp(-2 * y)) - np.log(2.0)
    return a * np.exp(-logcosh / b)


def zero_energy_wronskian(V, X=30.0):
    """``W(0) = -2 f(0) f'(0)`` for the solution of ``f'' = V f`` with ``f -> 1`` at ``+inf``."""
    sol = solve_ivp(lambda x, y: [y[1], V(x) * y[0]], (X, 0.0), [1.0, 0.0], method="DOP853",
                    rtol=1e-13, atol=1e-15)
    f, fp = sol.y[:, -1]
    return -2.0 * f * fp


def action_of_soliton(p):
    """``J(Q) = (p-1)/(2(p+1)) int Q^(p+1)`` over the full line."""
    val, _ = quad(lambda x: soliton(x, p) ** (p + 1), 0, 40.0, epsabs=1e-13, epsrel=1e-12,
                  limit=200)
    return (p - 1) / (2 * (p + 1)) * 2 * val


def plus_potential(p):
    return lambda x: -p * soliton(x, p) ** (p - 1)


def cubic_potential(x):
    return -6.0 / np.cosh(x) ** 2


def fd_ground_eigenvalue(V, L=15.0, n=3000):
    """Lowest eigenvalue of ``-d^2 + V`` on ``[-L, L]`` (Dirichlet), second-order finite
    differences on ``n`` and ``2n`` interior points with Richardson extrapolation."""
    from scipy.linalg import eigh_tridiagonal

    def one(m):
        x, h = np.linspace(-L, L, m + 2)[1:-1], 2 * L / (m + 1)
        d = 2 / h ** 2 + V(x)
        e = np.full(m - 1, -1 / h ** 2)
        return eigh_tridiagonal(d, e, select="i", select_range=(0, 0), eigvals_only=True)[0]

    a, b = one(n), one(2 * n + 1)  # h halves exactly
    return (4 * b - a) / 3
