import math

import numpy as np
import pytest
from numpy.polynomial.hermite_e import HermiteE
from scipy.integrate import trapezoid

from app.services.phase_space import apply_ladder, fourier_indices, ladder_suite, reflect


def _random_kinetic(rng, ops, n_species=2):
    shape = (n_species,) + ops.spatial_shape + ops.hermite_shape
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def test_fourier_indices():
    np.testing.assert_array_equal(fourier_indices(6), [0, 1, 2, -3, -2, -1])


def test_dealias_mask_drops_high_modes(params_1d, grid_small):
    ops = ladder_suite(params_1d, grid_small)
    kept = np.sort(ops.xi[0][ops.dealias_mask])
    np.testing.assert_array_equal(kept, np.arange(-5, 6))
    assert ops.k_max == pytest.approx(5.0)


def test_ladders_are_adjoint(params_2d, grid_2d, rng):
    ops = ladder_suite(params_2d, grid_2d)
    f = _random_kinetic(rng, ops)
    g = _random_kinetic(rng, ops)
    for j in range(2):
        left = np.vdot(g, ops.raise_(f, j))
        right = np.vdot(ops.lower(g, j), f)
        assert left == pytest.approx(right, rel=1e-12)


def test_number_operator_is_kstar_k(params_2d, grid_2d, rng):
    ops = ladder_suite(params_2d, grid_2d)
    f = _random_kinetic(rng, ops)
    composed = sum(ops.raise_(ops.lower(f, j), j) for j in range(2))
    np.testing.assert_allclose(apply_ladder(ops, f, "KstarK"), composed, atol=1e-12)
    assert apply_ladder(ops, f, "K").shape == (2,) + f.shape
    with pytest.raises(ValueError):
        apply_ladder(ops, f, "Q")


def test_transport_of_single_mode(params_1d, grid_small):
    ops = ladder_suite(params_1d, grid_small)
    f = np.zeros((2,) + ops.spatial_shape + ops.hermite_shape, dtype=complex)
    f[:, 1, 0] = 1.0
    out = ops.transport(f)
    np.testing.assert_allclose(out[:, 1, 1], 1j * ops.sigma)
    out[:, 1, 1] = 0.0
    assert not np.any(out)


def test_leray_projection(params_2d, grid_2d, rng):
    ops = ladder_suite(params_2d, grid_2d)
    u = rng.standard_normal((2,) + ops.spatial_shape) + 0j
    projected = ops.leray_project(u)
    assert np.max(np.abs(np.sum(ops.k * projected, axis=0))) < 1e-12
    np.testing.assert_allclose(ops.leray_project(projected), projected, atol=1e-12)
    np.testing.assert_allclose(projected[:, 0, 0], u[:, 0, 0])


def test_dealiased_product_of_cosines(params_1d, grid_small):
    ops = ladder_suite(params_1d, grid_small)
    a = np.zeros(ops.spatial_shape, dtype=complex)
    a[1] = a[-1] = 0.5
    product = ops.dealiased_product(a, a)
    expected = np.zeros_like(a)
    expected[0] = 0.5
    expected[2] = expected[-2] = 0.25
    np.testing.assert_allclose(product, expected, atol=1e-15)


def test_reality_gives_real_fields(params_2d, grid_2d, rng):
    ops = ladder_suite(params_2d, grid_2d)
    f = ops.enforce_reality(_random_kinetic(rng, ops), trailing=2)
    np.testing.assert_allclose(f, np.conj(reflect(f, (1, 2))))
    values = ops.to_physical(f * ops.spatial_factor(ops.dealias_mask, 2), trailing=2)
    assert np.max(np.abs(values.imag)) < 1e-12


def test_moments_of_unit_coefficients(params_1d, grid_small):
    ops = ladder_suite(params_1d, grid_small)
    f = np.zeros((2,) + ops.spatial_shape + ops.hermite_shape, dtype=complex)
    f[:, 0, 0] = 1.0
    f[:, 0, 1] = 1.0
    f[:, 0, 2] = 1.0
    moments = ops.moments(f)
    L = params_1d.domain_length
    np.testing.assert_allclose(moments.density[:, 0], 1.0 / L)
    np.testing.assert_allclose(moments.momentum[:, 0, 0], ops.sigma / L)
    np.testing.assert_allclose(moments.stress[:, 0, 0, 0], ops.sigma**2 * (np.sqrt(2.0) + 1.0) / L)


def test_leray_examples(params_2d, grid_2d):
    ops = ladder_suite(params_2d, grid_2d)
    u = np.zeros((2,) + ops.spatial_shape, dtype=complex)
    u[0, 1, 0] = 1.0
    u[1, 0, 1] = 1.0
    projected = ops.leray_project(u)
    assert projected[0, 1, 0] == 0.0
    assert projected[1, 0, 1] == 0.0
    v = np.zeros_like(u)
    v[1, 1, 0] = 1.0
    np.testing.assert_array_equal(ops.leray_project(v), v)


def test_product_of_exponentials(params_1d, grid_small):
    ops = ladder_suite(params_1d, grid_small)
    a = np.zeros(ops.spatial_shape, dtype=complex)
    a[1] = 1.0
    product = ops.dealiased_product(a, a)
    expected = np.zeros_like(a)
    expected[2] = 1.0
    np.testing.assert_allclose(product, expected, atol=1e-15)
    one = np.zeros_like(a)
    one[0] = 1.0
    np.testing.assert_allclose(ops.dealiased_product(a, one), a, atol=1e-15)


def test_transport_is_skew_without_top_band(params_1d, grid_small, rng):
    ops = ladder_suite(params_1d, grid_small)
    f = _random_kinetic(rng, ops)
    f[..., -1] = 0.0
    assert abs(np.vdot(f, ops.transport(f)).real) < 1e-10


def test_transport_leaves_mean_untouched(params_1d, grid_small, rng):
    ops = ladder_suite(params_1d, grid_small)
    out = ops.transport(_random_kinetic(rng, ops))
    assert not np.any(out[:, 0])


W = np.linspace(-14.0, 14.0, 4001)


def _hermite_series(coefficients: np.ndarray, sigma: float) -> HermiteE:
    """P(w) with sum_n c_n psi_n(v) = (2 pi sigma^2)^(-1/4) P(w) exp(-w^2/4), w = v / sigma."""
    norms = np.sqrt([math.factorial(n) for n in range(coefficients.size)])
    return HermiteE(coefficients / norms) * (2.0 * np.pi * sigma**2) ** -0.25


def _velocity_profile(rng, ops, species: int) -> tuple[np.ndarray, np.ndarray]:
    """Kinetic array holding one random real velocity profile in the mean spatial mode."""
    c = rng.standard_normal(ops.n_v)
    f = np.zeros((2,) + ops.spatial_shape + ops.hermite_shape, dtype=complex)
    f[species, 0] = c
    return c, f


def test_lowering_commutes_with_transport_into_s_operator(params_2d, grid_2d, rng):
    ops = ladder_suite(params_2d, grid_2d)
    f = _random_kinetic(rng, ops)
    f[..., -1, :] = 0.0
    f[..., :, -1] = 0.0
    sigma2 = ops.species_factor(ops.sigma**2)
    for j in range(2):
        commutator = ops.lower(sigma2 * ops.transport(f), j) - sigma2 * ops.transport(ops.lower(f, j))
        np.testing.assert_allclose(commutator, ops.s_operator(f, j), atol=1e-12)


@pytest.mark.parametrize("species", [0, 1])
def test_ladder_inner_product_matches_velocity_quadrature(params_1d, grid_small, rng, species):
    ops = ladder_suite(params_1d, grid_small)
    sigma = ops.sigma[species]
    c, f = _velocity_profile(rng, ops, species)
    b, g = _velocity_profile(rng, ops, species)
    spectral = np.vdot(ops.lower(g, 0)[species, 0], ops.lower(f, 0)[species, 0]).real

    envelope = np.exp(-(W**2) / 4.0)
    kf = sigma * _hermite_series(c, sigma).deriv()(W) * envelope
    kg = sigma * _hermite_series(b, sigma).deriv()(W) * envelope
    assert spectral == pytest.approx(trapezoid(kf * kg, sigma * W), rel=1e-10)


def test_number_operator_matches_physical_kstar_k(params_1d, grid_small, rng):
    ops = ladder_suite(params_1d, grid_small)
    sigma = ops.sigma[1]
    c, f = _velocity_profile(rng, ops, 1)
    P = _hermite_series(c, sigma)
    envelope = np.exp(-(W**2) / 4.0)
    physical = sigma**2 * (-P.deriv(2)(W) + W * P.deriv()(W)) * envelope
    spectral = _hermite_series(ops.number_operator(f)[1, 0].real, sigma)(W) * envelope
    np.testing.assert_allclose(spectral, physical, atol=1e-10)


def test_moments_match_velocity_quadrature(params_1d, grid_small, rng):
    ops = ladder_suite(params_1d, grid_small)
    L = params_1d.domain_length
    for species in range(2):
        sigma = ops.sigma[species]
        c, f = _velocity_profile(rng, ops, species)
        v = sigma * W
        envelope = np.exp(-(W**2) / 4.0)
        profile = _hermite_series(c, sigma)(W) * envelope
        maxwellian_root = (2.0 * np.pi * sigma**2) ** -0.25 * envelope

        moments = ops.moments(f)
        expected = [trapezoid(v**p * maxwellian_root * profile, v) / L for p in range(3)]
        assert moments.density[species, 0].real == pytest.approx(expected[0], rel=1e-10)
        assert moments.momentum[species, 0, 0].real == pytest.approx(expected[1], rel=1e-10)
        assert moments.stress[species, 0, 0, 0].real == pytest.approx(expected[2], rel=1e-10)
