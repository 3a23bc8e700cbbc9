import numpy as np
import pytest

from nlkg.errors import GridError, OutsideRegion
from nlkg.grid import StateVec, make_grid
from nlkg.soliton import (ModelParams, action, cutoff, decompose, energy, k_functionals,
                          nonlinear_remainder, sign_functional, soliton_profile, soliton_values)
from test_oracles import JQ_P5, JQ_P7


def test_closed_form_constants():
    P = ModelParams(7.0)
    assert P.alpha == pytest.approx(4 ** (1 / 6))
    assert P.beta == 3.0
    assert P.k_exact ** 2 == pytest.approx(15.0)
    assert P.delta_trap == pytest.approx(3 * P.eps)


@pytest.mark.parametrize("bad", [dict(delta_star=0.05), dict(R_star=0.01), dict(eps_star=0.001),
                                 dict(delta_X=0.2), dict(C_star=0.5)])
def test_constant_orderings_enforced(bad):
    with pytest.raises(ValueError):
        ModelParams(7.0, **bad)


def test_profile_solves_static_equation(sol, grid):
    Q = sol.Q
    res = grid.neg_laplacian(Q) + Q - np.abs(Q) ** 6 * Q
    assert grid.l2(res) / grid.l2(Q) < 1e-10
    assert soliton_values(0.0, sol.params) == pytest.approx(4 ** (1 / 6), rel=1e-14)


def test_profile_values_do_not_overflow():
    v = soliton_values(np.array([0.0, 500.0, 1e4]), ModelParams(7.0))
    assert np.all(np.isfinite(v)) and v[2] == 0.0


def test_profile_monotone_with_exponential_tail():
    P = ModelParams(7.0)
    x = np.linspace(0.0, 40.0, 4001)
    v = soliton_values(x, P)
    assert np.all(np.diff(v) < 0)
    # tail alpha 2^(1/beta) exp(-x): about 5e-18 at x = 40
    assert v[-1] == pytest.approx(P.alpha * 2 ** (1 / P.beta) * np.exp(-40.0), rel=1e-12)


def test_action_matches_quadrature_oracle(sol, grid):
    assert sol.JQ == pytest.approx(JQ_P7, rel=1e-12)
    P5 = ModelParams(5.0)
    g5 = make_grid(30.0, 1024)
    assert action(soliton_values(g5.x, P5), P5, g5) == pytest.approx(JQ_P5, rel=1e-12)


def test_ground_state_is_critical(sol, params, grid):
    K0, K2 = k_functionals(sol.Q, params, grid)
    assert abs(K0) < 1e-10 and abs(K2) < 1e-10
    assert energy(sol.state, params) == pytest.approx(sol.JQ)


def test_underresolved_grid_rejected(params):
    with pytest.raises(GridError):
        soliton_profile(params, make_grid(40.0, 256))


def test_rho_normalized_positive(sol, grid):
    assert grid.l2(sol.rho) == pytest.approx(1.0)
    assert np.all(sol.rho > -1e-12)
    assert sol.k ** 2 == pytest.approx(15.0, rel=1e-8)


def test_nonlinear_remainder_quadratic(sol):
    v = np.exp(-sol.grid.x ** 2)
    n1 = nonlinear_remainder(1e-3 * v, sol)
    n2 = nonlinear_remainder(2e-3 * v, sol)
    ratio = sol.grid.l2(n2) / sol.grid.l2(n1)
    assert ratio == pytest.approx(4.0, rel=0.01)


def test_cutoff_profile():
    r = np.array([0.0, 1.0, 1.5, 2.0, 3.0])
    c = cutoff(r)
    assert c[0] == 1 and c[1] == 1 and c[3] == 0 and c[4] == 0 and c[2] == pytest.approx(0.5)


def test_decomposition_at_soliton(sol, grid):
    d = decompose(sol.state, sol)
    assert d.sigma == 1 and abs(d.lam) < 1e-14 and d.dist < 1e-7
    dm = decompose(-sol.state, sol)
    assert dm.sigma == -1 and dm.dist < 1e-7


def test_decomposition_unstable_direction(sol, grid, params):
    a = 1e-3
    st = StateVec(grid, sol.Q + a * sol.rho, np.zeros(grid.N))
    d = decompose(st, sol)
    assert d.lam == pytest.approx(a, rel=1e-10)
    # d_Q ~ k |lam| for a pure eigenmode displacement (energy norm with the cubic term removed)
    assert d.dist == pytest.approx(sol.k * a / np.sqrt(2), rel=0.02)


def test_sign_functional_near_and_far(sol, grid, params):
    up = StateVec(grid, sol.Q + 1e-3 * sol.rho, np.zeros(grid.N))
    down = StateVec(grid, sol.Q - 1e-3 * sol.rho, np.zeros(grid.N))
    assert sign_functional(up, sol) == -1 and sign_functional(down, sol) == 1
    far = StateVec(grid, 0.5 * sol.Q, np.zeros(grid.N))
    assert sign_functional(far, sol) == 1
    big = StateVec(grid, sol.Q, 0.5 * sol.Q)
    with pytest.raises(OutsideRegion):
        sign_functional(big, sol)
