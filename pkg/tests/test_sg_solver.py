import numpy as np
import pytest

from app.core.errors import NodeRunError
from app.models.gpc import Measure
from app.schemas.params import InitialSpec
from app.services import diagnostics, gpc_service
from app.services.model_core import make_initial_state, momentum_functional
from app.services.phase_space import ladder_suite
from app.services.sg_solver import (
    SgSolver,
    expand_initial,
    project_states,
    reconstruct_at,
    run_collocation,
    sg_step,
)
from app.services.solver import DeterministicSolver


def test_order_one_matches_deterministic(params_1d, grid_small, density_wave):
    basis = gpc_service.build_basis(Measure.uniform(), 1)
    S0, residual = expand_initial(density_wave, basis, params_1d, grid_small)
    assert residual < 1e-18

    sg = SgSolver(params_1d, grid_small, 0.02).run(S0, 0.2, keep_snapshots=False)
    det = DeterministicSolver(params_1d, grid_small, 0.02).run(
        make_initial_state(density_wave, params_1d, grid_small), 0.2, with_reports=False
    )
    np.testing.assert_allclose(sg.final.u_hat[0], det.final.u_hat, atol=1e-16)
    np.testing.assert_allclose(sg.final.f_hat[0], det.final.f_hat, atol=1e-16)


def test_polynomial_data_is_represented_exactly(params_1d, grid_small):
    spec = InitialSpec(profile="density_wave", z_profile="quadratic", z_coupling=0.5)
    basis = gpc_service.build_basis(Measure.uniform(), 4)
    S0, residual = expand_initial(spec, basis, params_1d, grid_small)
    assert residual < 1e-17
    np.testing.assert_allclose(S0.f_hat[3], 0.0, atol=1e-18)
    z = 0.4
    direct = make_initial_state(spec, params_1d, grid_small, z)
    np.testing.assert_allclose(reconstruct_at(S0, z).f_hat, direct.f_hat, atol=1e-18)


def test_linear_sg_agrees_with_collocation(params_1d, grid_small):
    spec = InitialSpec(profile="density_wave", z_profile="linear", z_coupling=0.5)
    basis = gpc_service.build_basis(Measure.uniform(), 3)
    S0, _ = expand_initial(spec, basis, params_1d, grid_small)
    dt, t_end = 0.02, 0.2

    sg = SgSolver(params_1d, grid_small, dt, nonlinear=False).run(S0, t_end, stride=5, keep_snapshots=True)
    reference = run_collocation(
        spec, params_1d, grid_small, basis.nodes, basis.weights, t_end, dt, stride=5, threads=2, nonlinear=False
    )
    assert reference.times == pytest.approx(sg.times)
    for n, S in enumerate(sg.snapshots):
        error = diagnostics.sg_error(S, reference.at(n), basis.nodes, basis.weights, params_1d, grid_small)
        assert error < 1e-24


def test_weighted_energy_series(params_1d, grid_small):
    spec = InitialSpec(profile="density_wave", z_profile="exponential", z_coupling=0.5)
    basis = gpc_service.build_basis(Measure.uniform(), 3)
    S0, _ = expand_initial(spec, basis, params_1d, grid_small)
    result = SgSolver(params_1d, grid_small, 0.02).run(S0, 0.2, stride=2, q=1.0, keep_snapshots=True)
    assert len(result.times) == len(result.weighted_energy) == len(result.snapshots) == 6
    assert result.weighted_energy[0] == pytest.approx(diagnostics.weighted_energy(S0, params_1d, grid_small, 2, 1.0))
    assert result.final.time == pytest.approx(0.2)


def test_sg_step_advances_time(params_1d, grid_small, density_wave, uniform_basis):
    S0, _ = expand_initial(density_wave, uniform_basis, params_1d, grid_small)
    S1 = sg_step(S0, params_1d, grid_small, 0.01)
    assert S1.time == pytest.approx(0.01)
    assert S1.u_hat.shape == S0.u_hat.shape
    assert S1.basis is S0.basis


def test_collocation_failure_names_node(params_1d, grid_small, density_wave):
    nodes, weights = gpc_service.gauss_rule(Measure.uniform(), 3)
    with pytest.raises(NodeRunError) as info:
        run_collocation(density_wave, params_1d, grid_small, nodes, weights, 1.0, 1.0)
    assert info.value.node_id == 0
    assert info.value.code == "NODE_FAILED"


def test_snapshots_are_opt_in(params_1d, grid_small, density_wave, uniform_basis):
    S0, _ = expand_initial(density_wave, uniform_basis, params_1d, grid_small)
    result = SgSolver(params_1d, grid_small, 0.02).run(S0, 0.1)
    assert result.snapshots == []
    assert len(result.weighted_energy) == len(result.times) == 6


def test_steppers_follow_the_tensor(params_1d, grid_small, density_wave):
    solver = SgSolver(params_1d, grid_small, 0.02)
    uniform, _ = expand_initial(density_wave, gpc_service.build_basis(Measure.uniform(), 3), params_1d, grid_small)
    chebyshev, _ = expand_initial(density_wave, gpc_service.build_basis(Measure.chebyshev(), 3), params_1d, grid_small)
    first = solver._stepper(uniform, 0.02)
    assert solver._stepper(uniform, 0.02) is first
    second = solver._stepper(chebyshev, 0.02)
    assert second is not first
    assert second.tensor is chebyshev.tensor


def test_nonlinear_sg_keeps_blockwise_momentum(params_1d, grid_small):
    spec = InitialSpec(amplitude=0.02, profile="random", seed=9, z_profile="exponential", z_coupling=0.5)
    basis = gpc_service.build_basis(Measure.uniform(), 3)
    S0, _ = expand_initial(spec, basis, params_1d, grid_small)
    ops = ladder_suite(params_1d, grid_small)
    before = momentum_functional(ops, S0.u_hat, S0.f_hat)
    result = SgSolver(params_1d, grid_small, 0.02).run(S0, 0.2, stride=5, keep_snapshots=True)
    for S in result.snapshots:
        np.testing.assert_allclose(momentum_functional(ops, S.u_hat, S.f_hat), before, atol=1e-14)


def test_nonlinear_sg_agrees_with_collocation(params_1d, grid_small):
    spec = InitialSpec(amplitude=0.02, profile="density_wave", z_profile="linear", z_coupling=0.5)
    basis = gpc_service.build_basis(Measure.uniform(), 3)
    dt, t_end = 0.02, 0.2
    reference = run_collocation(spec, params_1d, grid_small, basis.nodes, basis.weights, t_end, dt, stride=5)
    states = reference.at(len(reference.times) - 1)
    scale = diagnostics.ensemble_energy(states, basis.weights, params_1d, grid_small, 2)

    S0, _ = expand_initial(spec, basis, params_1d, grid_small)
    final = SgSolver(params_1d, grid_small, dt).run(S0, t_end, stride=5).final
    error = diagnostics.sg_error(final, states, basis.nodes, basis.weights, params_1d, grid_small)
    assert error < 1e-4 * scale

    u_ref, f_ref = project_states(basis, states)
    assert np.linalg.norm(final.u_hat - u_ref) <= 1e-2 * np.linalg.norm(u_ref) + 1e-14
    assert np.linalg.norm(final.f_hat - f_ref) <= 1e-2 * np.linalg.norm(f_ref)

    coarse_basis = gpc_service.build_basis(Measure.uniform(), 1)
    coarse, _ = expand_initial(spec, coarse_basis, params_1d, grid_small)
    coarse_final = SgSolver(params_1d, grid_small, dt).run(coarse, t_end, stride=5).final
    coarse_error = diagnostics.sg_error(coarse_final, states, basis.nodes, basis.weights, params_1d, grid_small)
    assert coarse_error > 1e-2 * scale
