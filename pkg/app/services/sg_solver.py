"""Stochastic Galerkin evolution of the gPC blocks and the collocation reference."""
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from app.core.errors import NodeRunError, NonFiniteState, SimulationError
from app.models.gpc import GpcBasis
from app.models.state import SgState, SimState
from app.schemas.params import InitialSpec, ModelParams, SpectralGrid
from app.services import gpc_service
from app.services.model_core import make_initial_state
from app.services.solver import BlockStepper, DeterministicSolver, is_finite, step_count
from app.workers.sweep_worker import run_tasks

logger = logging.getLogger(__name__)


@dataclass
class SgRunResult:
    times: list[float]
    weighted_energy: list[float]
    final: SgState
    snapshots: list[SgState] = field(default_factory=list)


@dataclass
class CollocationEnsemble:
    nodes: np.ndarray
    weights: np.ndarray
    times: list[float]
    trajectories: list[list[SimState]]  # [node][time]

    def at(self, index: int) -> list[SimState]:
        """States of every node at one observation index."""
        return [trajectory[index] for trajectory in self.trajectories]


def project_states(basis: GpcBasis, states: Sequence[SimState]) -> tuple[np.ndarray, np.ndarray]:
    """Blocks from states given at the basis Gauss nodes."""
    u = np.stack([s.u_hat for s in states])
    f = np.stack([s.f_hat for s in states])
    return gpc_service.project_nodes(basis, u), gpc_service.project_nodes(basis, f)


def expand_initial(
    spec: InitialSpec, basis: GpcBasis, p: ModelParams, g: SpectralGrid
) -> tuple[SgState, float]:
    """gPC coefficients of the initial data and the max reconstruction residual at the nodes."""
    tensor = gpc_service.triple_products(basis)
    states = [make_initial_state(spec, p, g, float(z)) for z in basis.nodes]
    u_blocks, f_blocks = project_states(basis, states)

    table = gpc_service.evaluate_basis(basis, basis.nodes)
    residual = 0.0
    for q, state in enumerate(states):
        residual = max(
            residual,
            float(np.max(np.abs(np.tensordot(table[q], u_blocks, axes=(0, 0)) - state.u_hat))),
            float(np.max(np.abs(np.tensordot(table[q], f_blocks, axes=(0, 0)) - state.f_hat))),
        )
    logger.info("gPC expansion K=%d: nodal reconstruction residual %.3e", basis.order, residual)
    return SgState(u_blocks, f_blocks, basis, tensor, 0.0), residual


def reconstruct_at(S: SgState, z: float) -> SimState:
    phi = gpc_service.evaluate_basis(S.basis, z)
    u = np.tensordot(phi, S.u_hat, axes=(0, 0))
    f = np.tensordot(phi, S.f_hat, axes=(0, 0))
    return SimState(u, f, S.time)


class SgSolver:
    def __init__(self, params: ModelParams, grid: SpectralGrid, dt: float, nonlinear: bool = True):
        self.params = params
        self.grid = grid
        self.dt = dt
        self.nonlinear = nonlinear
        self._steppers: dict[tuple[float, int], BlockStepper] = {}

    def _stepper(self, S: SgState, dt: float) -> BlockStepper:
        key = (dt, S.order)
        stepper = self._steppers.get(key)
        if stepper is None or stepper.tensor is not S.tensor:
            stepper = BlockStepper(self.params, self.grid, dt, S.tensor, self.nonlinear)
            self._steppers[key] = stepper
        return stepper

    def step(self, S: SgState, dt: Optional[float] = None) -> SgState:
        dt = self.dt if dt is None else dt
        u, f = self._stepper(S, dt).step(S.u_hat, S.f_hat)
        return S.with_arrays(u, f, S.time + dt)

    def run(
        self,
        S0: SgState,
        t_end: float,
        stride: int = 1,
        s_order: int = 2,
        q: float = 0.0,
        keep_snapshots: bool = False,
    ) -> SgRunResult:
        from app.services.diagnostics import weighted_energy

        steps, dt = step_count(t_end, self.dt)
        times = [S0.time]
        energies = [weighted_energy(S0, self.params, self.grid, s_order, q)]
        snapshots = [S0] if keep_snapshots else []

        S = S0
        if steps:
            stepper = self._stepper(S0, dt)
            u, f = S0.u_hat, S0.f_hat
            for n in range(1, steps + 1):
                u, f = stepper.step(u, f)
                if not is_finite(u, f):
                    raise NonFiniteState(n)
                if n % stride == 0 or n == steps:
                    S = S0.with_arrays(u, f, S0.time + n * dt)
                    times.append(S.time)
                    energies.append(weighted_energy(S, self.params, self.grid, s_order, q))
                    if keep_snapshots:
                        snapshots.append(S)
        logger.info("sG run K=%d: %d steps, dt=%.3e", S0.order, steps, dt)
        return SgRunResult(times, energies, S, snapshots)


def sg_step(S: SgState, p: ModelParams, g: SpectralGrid, dt: float, nonlinear: bool = True) -> SgState:
    return SgSolver(p, g, dt, nonlinear).step(S)


def run_collocation(
    spec: InitialSpec,
    p: ModelParams,
    g: SpectralGrid,
    nodes: np.ndarray,
    weights: np.ndarray,
    t_end: float,
    dt: float,
    stride: int = 1,
    threads: int = 1,
    nonlinear: bool = True,
) -> CollocationEnsemble:
    """Independent deterministic runs at each node, snapshots at every observation."""
    solver = DeterministicSolver(p, g, dt, nonlinear)

    def node_task(q: int, z: float):
        def task():
            try:
                s0 = make_initial_state(spec, p, g, z)
                return solver.run(s0, t_end, stride=stride, keep_snapshots=True, with_reports=False)
            except SimulationError as exc:
                raise NodeRunError(q, str(exc)) from exc
            except (ArithmeticError, ValueError) as exc:
                raise NodeRunError(q, repr(exc)) from exc

        return task

    tasks = [node_task(q, float(z)) for q, z in enumerate(nodes)]
    results = run_tasks(tasks, threads, labels=[f"collocation node {q} z={z:+.4f}" for q, z in enumerate(nodes)])
    times = [s.time for s in results[0].snapshots]
    return CollocationEnsemble(np.asarray(nodes), np.asarray(weights), times, [r.snapshots for r in results])
