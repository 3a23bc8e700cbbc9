import numpy as np
import pytest

import oracles
from nlkg import spectral
from nlkg.errors import NoNegativeEigenvalue, QuadratureUnderResolved
from nlkg.experiments import dense_ground_k2, function_suite, poschl_teller_k2
from nlkg.grid import StateVec, make_grid
from nlkg.soliton import ModelParams
from test_oracles import W0_PLUS_P5, W0_PLUS_P7

FD_BOTTOM = {7.0: -16.0, 5.0: -9.0, 3.0: -4.0}  # oracles.fd_ground_eigenvalue, rounded at 1e-7


@pytest.mark.parametrize("p", [7.0, 5.0, 3.0])
def test_ground_state_three_routes(p, wide_grid):
    P = ModelParams(p)
    _, neg = spectral.ground_state(spectral.assemble_L("plus", P, wide_grid))
    k2 = -neg
    assert k2 == pytest.approx(poschl_teller_k2(p), rel=1e-9)
    assert k2 == pytest.approx(-FD_BOTTOM[p] - 1, rel=1e-7)
    assert k2 == pytest.approx(dense_ground_k2(P, 20.0, 512), rel=1e-9)


def test_fd_oracle_bottom():
    assert oracles.fd_ground_eigenvalue(oracles.plus_potential(7.0)) == pytest.approx(-16.0,
                                                                                    abs=1e-6)


def test_no_negative_eigenvalue_for_free_operator():
    with pytest.raises(NoNegativeEigenvalue):
        spectral.ground_state(spectral.free_op(make_grid(20.0, 256)))


def test_even_bound_states_of_p7(params, wide_grid):
    op = spectral.assemble_L("plus", params, wide_grid)
    ev, vec = spectral.even_eigenpairs(op)
    assert ev.shape == (1,) and ev[0] == pytest.approx(-16.0, rel=1e-9)
    assert spectral.even_bound_state_count(spectral.cubic_op(wide_grid)) == 1


def test_zero_modes(params, wide_grid):
    a, b = spectral.zero_mode_residuals(params, wide_grid)
    assert a < 1e-8 and b < 1e-8


@pytest.mark.parametrize("p, frozen", [(7.0, W0_PLUS_P7), (5.0, W0_PLUS_P5)])
def test_zero_energy_wronskian_against_ode_oracle(p, frozen, wide_grid):
    W0 = spectral.zero_energy_wronskian(spectral.assemble_L("plus", ModelParams(p), wide_grid))
    assert abs(W0) == pytest.approx(frozen, rel=1e-6)


def test_resonance_dichotomy(wide_grid):
    for op, expect in ((spectral.assemble_L("plus", ModelParams(7.0), wide_grid), False),
                       (spectral.free_op(wide_grid), True), (spectral.cubic_op(wide_grid), True)):
        assert spectral.resonance_check(op).resonant is expect


def test_free_jost_data(wide_grid):
    op = spectral.free_op(wide_grid)
    for lam in (0.25, 4.0, 50.0):
        J = spectral.jost_solution(op, lam)
        assert J.W == pytest.approx(-2j * np.sqrt(lam), rel=1e-10)
        assert J.m_plus == pytest.approx(1j * np.sqrt(lam), rel=1e-10)


def test_jost_wronskian_is_constant(params, wide_grid):
    J = spectral.jost_solution(spectral.assemble_L("plus", params, wide_grid), 2.0)
    prof = J.wronskian_profile()
    assert np.max(np.abs(prof - J.W)) < 1e-10 * abs(J.W)
    with pytest.raises(ValueError):
        spectral.jost_solution(spectral.free_op(wide_grid), -1.0)


def test_free_measure_closed_form(wide_grid):
    lam = np.geomspace(1e-3, 300, 40)
    m = spectral.spectral_measure(spectral.free_op(wide_grid), lam, keep_eigenfunctions=False)
    xi = np.sqrt(lam)
    assert np.allclose(m.mu1, 1 / (2 * np.pi * xi), rtol=1e-10)
    assert np.allclose(m.mu2, xi / (2 * np.pi), rtol=1e-10)


def test_quadrature_rule_integrates_polynomials_in_xi():
    lam, w = spectral.lambda_quadrature(100.0)
    assert np.sum(w) == pytest.approx(100.0, rel=1e-13)
    assert np.sum(w * np.sqrt(lam)) == pytest.approx(2 / 3 * 1000.0, rel=1e-13)


def test_parseval_and_round_trip(measure, wide_grid):
    g = wide_grid
    for f in function_suite(g, 8):
        assert spectral.parseval_defect(f, measure) < 1e-6
    f = np.exp(-g.x ** 2)
    c = spectral.eigen_coefficients(f, measure)
    F1, F2 = spectral.distorted_ft(f, measure)
    assert not np.any(F2)
    rec = spectral.inverse_distorted_ft(F1, F2, measure) + c @ measure.eig_vectors
    assert g.l2(rec - f) / g.l2(f) < 1e-4  # limited by the Lambda_max = 400 cut


def test_parseval_guard_catches_kinked_data(measure, wide_grid):
    kink = np.exp(-np.abs(wide_grid.x - 1.0) * 4)
    with pytest.raises(QuadratureUnderResolved):
        spectral.distorted_ft(kink, measure)


def test_continuous_part_is_orthogonal_to_rho(measure, sol, wide_grid):
    f = spectral.continuous_part(np.exp(-wide_grid.x ** 2), measure)
    assert abs(wide_grid.inner(f, measure.eig_vectors[0])) < 1e-14


def test_kg_flow_energy_and_composition(measure, wide_grid):
    g = wide_grid
    s0 = StateVec(g, spectral.continuous_part(np.exp(-g.x ** 2), measure), np.zeros(g.N))
    a, b = spectral.kg_coefficients(s0, measure)
    e0 = spectral.quadratic_energy_coeffs(a, b, measure)
    a2, b2 = spectral.rotate(a, b, 7.3, measure.omega)
    assert spectral.quadratic_energy_coeffs(a2, b2, measure) == pytest.approx(e0, rel=1e-13)
    assert e0 == pytest.approx(spectral.quadratic_energy(s0, measure.op), rel=1e-6)
    one = spectral.kg_propagate(s0, 2.0, measure)
    two = spectral.kg_propagate(spectral.kg_propagate(s0, 1.0, measure), 1.0, measure)
    assert g.l2(one.u - two.u) < 1e-5 * g.l2(s0.u)


def test_free_flow_two_routes(wide_grid):
    g = wide_grid
    m = spectral.spectral_measure(spectral.free_op(g), Lambda_max=400.0)
    s0 = StateVec(g, np.exp(-g.x ** 2), np.zeros(g.N))
    a = spectral.kg_propagate(s0, 3.0, m)
    b = spectral.free_kg_propagate(s0, 3.0)
    assert g.l2(a.u - b.u) < 1e-8


def test_local_decay_ratio_guards(measure, wide_grid):
    with pytest.raises(ValueError):
        spectral.local_decay_ratio(np.exp(-wide_grid.x ** 2), 0.0, measure)


def test_intertwining(params, wide_grid):
    for f in function_suite(wide_grid, 6):
        assert spectral.intertwining_defect(f, params, wide_grid) < 1e-8


def test_phi_channel_vanishes_for_even_data(wide_grid, params):
    lam = np.array([0.5, 2.0, 10.0])
    m = spectral.spectral_measure(spectral.assemble_L("plus", params, wide_grid), lam)
    val = spectral.phi_channel(np.exp(-wide_grid.x ** 2), m)
    assert np.max(np.abs(val)) < 1e-8
