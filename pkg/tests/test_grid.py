import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlkg.errors import GridError
from nlkg.grid import (EvenField, StateVec, cosine_transform, extend_state, inverse_cosine_transform,
                       make_grid, sobolev_norm, weighted_L2)


def test_rejects_bad_grids():
    with pytest.raises(GridError):
        make_grid(0.0, 64)
    with pytest.raises(GridError):
        make_grid(10.0, 4)


def test_resolution_guard():
    with pytest.raises(GridError):
        make_grid(40.0, 512).check_resolves(3.0)
    make_grid(40.0, 2048).check_resolves(3.0)


def test_cosine_transform_round_trip():
    g = make_grid(20.0, 256)
    f = EvenField(g, np.exp(-g.x ** 2))
    back = inverse_cosine_transform(cosine_transform(f), g)
    assert np.max(np.abs(back.values - f.values)) < 1e-14


def test_quadrature_of_gaussian():
    g = make_grid(20.0, 256)
    assert g.integrate(np.exp(-g.x ** 2)) == pytest.approx(np.sqrt(np.pi), rel=1e-13)


def test_derivatives_spectral_accuracy():
    g = make_grid(20.0, 512)
    f = np.exp(-g.x ** 2)
    assert np.max(np.abs(g.deriv_even(f) + 2 * g.x * f)) < 1e-11
    assert np.max(np.abs(g.neg_laplacian(f) - (2 - 4 * g.x ** 2) * f)) < 1e-10
    odd = g.x * f
    assert np.max(np.abs(g.deriv_odd(odd) - (1 - 2 * g.x ** 2) * f)) < 1e-11


def test_sobolev_norms_of_gaussian():
    g = make_grid(20.0, 512)
    f = np.exp(-g.x ** 2 / 2)
    # ||f||_2^2 = sqrt(pi); ||f'||_2^2 = sqrt(pi)/2
    assert sobolev_norm(f, 0.0, g) ** 2 == pytest.approx(np.sqrt(np.pi), rel=1e-12)
    assert sobolev_norm(f, 1.0, g) ** 2 == pytest.approx(1.5 * np.sqrt(np.pi), rel=1e-12)
    with pytest.raises(ValueError):
        sobolev_norm(f, 3.0, g)
    assert weighted_L2(f, 0.0, g) == pytest.approx(sobolev_norm(f, 0.0, g), rel=1e-12)


def test_extend_state_pads_with_zeros():
    g = make_grid(20.0, 256)
    s = StateVec(g, np.exp(-g.x ** 2), np.zeros(g.N))
    big = extend_state(s, 512)
    assert big.grid.h == g.h and big.grid.N == 512
    assert np.array_equal(big.u[:256], s.u) and not np.any(big.u[256:])
    with pytest.raises(GridError):
        extend_state(StateVec(g, np.ones(g.N), np.zeros(g.N)), 512)


def test_statevec_shape_and_reversal():
    g = make_grid(10.0, 64)
    with pytest.raises(GridError):
        StateVec(g, np.zeros(10), np.zeros(64))
    s = StateVec(g, np.ones(64), np.ones(64))
    assert np.array_equal(s.reversed().ud, -s.ud)
    assert np.array_equal((-s).u, -s.u)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.3, 3.0), st.floats(0.0, 4.0))
def test_parseval_property(width, freq):
    g = make_grid(30.0, 1024)
    f = np.exp(-(g.x / width) ** 2) * np.cos(freq * g.x)
    c = g.dct(f)
    assert g.weight * np.sum(c ** 2) == pytest.approx(g.inner(f, f), rel=1e-12)
