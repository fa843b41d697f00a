import math

import numpy as np
import pytest

from app.core.errors import ConfigError, SupportError
from app.schemas.params import InitialSpec, ModelParams, SpectralGrid
from app.services.model_core import (
    hermite_functions,
    make_initial_state,
    momentum_functional,
    reconstruct_physical,
    validate_params,
)
from app.services.phase_space import ladder_suite, reflect


def test_validate_accepts_defaults(params_1d, grid_small):
    checked = validate_params(params_1d, grid_small)
    assert checked.params == params_1d
    assert checked.flags == []


def test_validate_lists_every_violation():
    params = ModelParams(epsilon=0.0, kappa=-1.0, sizes=(2, 1), dim=4)
    grid = SpectralGrid(n_x=5, n_v=1)
    with pytest.raises(ConfigError) as info:
        validate_params(params, grid)
    violations = info.value.violations
    for expected in (
        "epsilon out of range",
        "kappa must be positive",
        "sizes not increasing",
        "dim must be 1, 2 or 3",
        "n_x must be even",
        "n_v must be at least 4",
    ):
        assert expected in violations


def test_validate_rejects_empty_sizes(grid_small):
    with pytest.raises(ConfigError, match="sizes empty"):
        validate_params(ModelParams(sizes=()), grid_small)


def test_single_unit_species_is_flagged(grid_small):
    checked = validate_params(ModelParams(sizes=(1,)), grid_small)
    assert checked.flags == ["drag_sum_unit"]


def test_hermite_functions_orthonormal():
    sigma = 0.7
    v = np.linspace(-14 * sigma, 14 * sigma, 8001)
    psi = hermite_functions(v, sigma, 6)
    gram = psi.T @ psi * (v[1] - v[0])
    np.testing.assert_allclose(gram, np.eye(6), atol=1e-10)


@pytest.mark.parametrize("profile", ["shear", "density_wave", "homogeneous", "random"])
def test_initial_state_is_compatible(profile, params_2d, grid_2d):
    spec = InitialSpec(amplitude=1e-3, profile=profile, seed=3)
    state = make_initial_state(spec, params_2d, grid_2d)
    ops = ladder_suite(params_2d, grid_2d)

    assert state.u_hat.shape == (2, 8, 8)
    assert state.f_hat.shape == (2, 8, 8, 6, 6)
    np.testing.assert_allclose(state.f_hat[:, 0, 0, 0, 0], 0.0, atol=1e-18)
    assert np.max(np.abs(momentum_functional(ops, state.u_hat, state.f_hat))) < 1e-18

    divergence = np.sum(ops.k * state.u_hat, axis=0)
    assert np.max(np.abs(divergence)) < 1e-18
    np.testing.assert_allclose(state.u_hat, np.conj(reflect(state.u_hat, (1, 2))), atol=1e-18)
    assert not np.any(state.u_hat[:, ~ops.dealias_mask])


def test_random_profile_is_seeded(params_1d, grid_small):
    a = make_initial_state(InitialSpec(profile="random", seed=5), params_1d, grid_small)
    b = make_initial_state(InitialSpec(profile="random", seed=5), params_1d, grid_small)
    c = make_initial_state(InitialSpec(profile="random", seed=6), params_1d, grid_small)
    np.testing.assert_array_equal(a.f_hat, b.f_hat)
    assert not np.allclose(a.f_hat, c.f_hat)


def test_z_factor_scales_amplitude(params_1d, grid_small):
    spec = InitialSpec(profile="density_wave", z_profile="linear", z_coupling=0.5)
    base = make_initial_state(spec, params_1d, grid_small, z=0.0)
    shifted = make_initial_state(spec, params_1d, grid_small, z=1.0)
    np.testing.assert_allclose(shifted.f_hat, 1.5 * base.f_hat, atol=1e-20)


def test_reconstruct_density_wave(grid_small):
    params = ModelParams(sizes=(1,), dim=1, domain_length=2 * math.pi)
    amplitude = 1e-3
    state = make_initial_state(InitialSpec(amplitude=amplitude, profile="density_wave"), params, grid_small)

    x, v = 0.3, 0.2
    sample = reconstruct_physical(state, params, grid_small, [x], [v], species=0)
    psi = hermite_functions(np.array([v]), 1.0, 2)[0]
    L = params.domain_length
    expected = (amplitude * math.cos(x) * psi[0] + 0.5 * amplitude * psi[1]) / math.sqrt(L)
    assert sample.f[0] == pytest.approx(expected, rel=1e-12)
    assert sample.u[0, 0] == pytest.approx(-0.5 * amplitude / L, rel=1e-12)


def test_reconstruct_outside_domain(params_1d, grid_small, density_wave):
    state = make_initial_state(density_wave, params_1d, grid_small)
    with pytest.raises(SupportError):
        reconstruct_physical(state, params_1d, grid_small, [4.0], [0.0], species=0)
    with pytest.raises(SupportError):
        reconstruct_physical(state, params_1d, grid_small, [0.0], [100.0], species=0)
    with pytest.raises(SupportError):
        reconstruct_physical(state, params_1d, grid_small, [0.0], [0.0], species=5)


def test_zero_amplitude_gives_zero_state(params_1d, grid_small):
    state = make_initial_state(InitialSpec(amplitude=0.0, profile="shear"), params_1d, grid_small)
    assert not np.any(state.u_hat)
    assert not np.any(state.f_hat)
    sample = reconstruct_physical(state, params_1d, grid_small, [0.1, -0.2], [0.0, 0.5], species=1)
    assert not np.any(sample.f) and not np.any(sample.u)


def test_reconstruct_single_equilibrium_mode(params_2d, grid_2d):
    ops = ladder_suite(params_2d, grid_2d)
    state = make_initial_state(InitialSpec(amplitude=0.0), params_2d, grid_2d)
    state.f_hat[1, 0, 0, 0, 0] = 1.0
    x = np.array([[0.3, -1.0], [2.0, 0.7]])
    v = np.array([[0.1, 0.2], [-0.4, 0.3]])
    sample = reconstruct_physical(state, params_2d, grid_2d, x, v, species=1)
    psi = hermite_functions(v, ops.sigma[1], 1)[..., 0]
    expected = psi[:, 0] * psi[:, 1] / params_2d.domain_length
    np.testing.assert_allclose(sample.f, expected, rtol=1e-12)
