"""Strang-split integrator for the perturbation system.

Each step: half a step of the exact stiff exponential (viscosity, drag,
forcing and Fokker-Planck relaxation), one Heun RK2 step of transport and the
quadratic terms, then the second stiff half-step.

The stepper works on stacked blocks (leading axis K) and forms every quadratic
term through a triple-product tensor, so the deterministic solver is the K=1
case with S = [[[1]]].
"""
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import linalg

from app.core.errors import CFLViolation, ConfigError, NonFiniteState
from app.models.gpc import TripleTensor
from app.models.propagator import StiffPropagator
from app.models.state import SimState
from app.schemas.params import ModelParams, SpectralGrid
from app.schemas.reports import EnergyReport
from app.services.phase_space import LadderSuite, ladder_suite

logger = logging.getLogger(__name__)

Observer = Callable[[int, SimState], None]


def build_stiff_generator(ops: LadderSuite) -> tuple[np.ndarray, np.ndarray]:
    """Generator of the coupled block per mode (*spatial, m, m) and FP rates (N, *hermite)."""
    p = ops.params
    d, N = p.dim, p.n_species
    eps, kappa, volume = p.epsilon, p.kappa, p.volume
    drag = p.drag_weights
    relax = p.relaxation_weights
    sigma = p.sigma

    projector = np.eye(d) - np.einsum("j...,l...->...jl", ops.k, ops.k) * ops.inv_k2[..., None, None]

    m = d + N * d
    generator = np.zeros(ops.spatial_shape + (m, m))
    drag_total = kappa / eps * float(np.sum(drag)) / volume
    for j in range(d):
        generator[..., j, j] = -ops.k2 - drag_total
    for i in range(N):
        for j in range(d):
            col = d + i * d + j
            generator[..., :d, col] = kappa / eps * drag[i] / volume * sigma[i] * projector[..., :, j]
            generator[..., col, j] = drag[i] * sigma[i] / (p.theta_bar * eps)
            generator[..., col, col] = -1.0 / (relax[i] * eps)

    rates = -ops.hermite_order[None] / (relax.reshape((-1,) + (1,) * d) * eps)
    return generator, rates


def precompute_stiff_propagators(p: ModelParams, g: SpectralGrid, dt: float) -> StiffPropagator:
    if dt < 0:
        raise ConfigError(["dt must be non-negative"])
    ops = ladder_suite(p, g)
    generator, rates = build_stiff_generator(ops)
    coupled = linalg.expm(dt * generator)
    decay = np.exp(dt * rates)
    for j in range(p.dim):
        decay[(slice(None),) + ops.unit_index(j)] = 1.0
    return StiffPropagator(dt, coupled, decay)


def transport_bound(p: ModelParams, g: SpectralGrid) -> float:
    ops = ladder_suite(p, g)
    return 1.0 / (ops.k_max * float(np.max(ops.sigma)) * math.sqrt(g.n_v))


def check_cfl(p: ModelParams, g: SpectralGrid, dt: float) -> None:
    bound = transport_bound(p, g)
    if dt > bound:
        raise CFLViolation(dt, 0.9 * bound)


def default_dt(p: ModelParams, g: SpectralGrid, t_end: float) -> float:
    dt = 0.5 * transport_bound(p, g)
    if t_end > 0:
        dt = min(dt, t_end / 200.0)
    return dt


class BlockStepper:
    """One Strang step on stacked arrays u (K, d, *spatial), f (K, N, *spatial, *hermite)."""

    def __init__(
        self,
        params: ModelParams,
        grid: SpectralGrid,
        dt: float,
        tensor: Optional[TripleTensor] = None,
        nonlinear: bool = True,
    ):
        check_cfl(params, grid, dt)
        self.params = params
        self.grid = grid
        self.dt = dt
        self.tensor = tensor or TripleTensor.unit()
        self.nonlinear = nonlinear
        self.ops = ladder_suite(params, grid)
        self.half = precompute_stiff_propagators(params, grid, 0.5 * dt)

        d = params.dim
        self._decay = self.half.decay.reshape((params.n_species,) + (1,) * d + self.ops.hermite_shape)
        self._coupling = self.ops.species_factor(params.drag_weights / (params.theta_bar * params.epsilon))
        self._drag = params.kappa / params.epsilon

    @property
    def order(self) -> int:
        return self.tensor.order

    def apply_stiff(self, u: np.ndarray, f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        ops = self.ops
        d, N = self.params.dim, self.params.n_species
        spatial = (slice(None),) * d
        lead = u.shape[: -(d + 1)]

        f = f * self._decay
        c = np.stack([f[(Ellipsis,) + ops.unit_index(j)] for j in range(d)], axis=-(d + 1))
        y = np.concatenate([u, c.reshape(lead + (N * d,) + ops.spatial_shape)], axis=-(d + 1))
        y = np.moveaxis(y, -(d + 1), -1)
        y = np.matmul(self.half.coupled, y[..., None])[..., 0]
        y = np.moveaxis(y, -1, -(d + 1))

        u = y[(Ellipsis, slice(0, d)) + spatial]
        c = y[(Ellipsis, slice(d, None)) + spatial].reshape(lead + (N, d) + ops.spatial_shape)
        for j in range(d):
            f[(Ellipsis,) + ops.unit_index(j)] = c[(Ellipsis, j) + spatial]
        return u, f

    def _galerkin(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        a, b = np.broadcast_arrays(a, b)
        out = np.zeros((self.order,) + a.shape[1:], dtype=complex)
        for j, l, ks, values in self.tensor.pairs:
            product = a[j] * b[l]
            for k, s in zip(ks, values):
                out[k] += s * product
        return out

    def explicit_rhs(self, u: np.ndarray, f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        ops = self.ops
        p = self.params
        d = p.dim
        df = -ops.transport(f)
        if not self.nonlinear:
            return np.zeros_like(u), df

        U = ops.to_physical(u)
        dU = ops.to_physical(1j * u[:, :, None] * ops.k[None, None])
        conv = sum(self._galerkin(U[:, l][:, None], dU[:, :, l]) for l in range(d))

        rho = np.einsum("i,ki...->k...", p.drag_weights, f[(Ellipsis,) + (0,) * d]) / p.volume
        drag = self._galerkin(U, ops.to_physical(rho)[:, None])
        du = -ops.leray_project(ops.to_spectral(conv + self._drag * drag))

        F = ops.to_physical(f, trailing=d)
        field_shape = U.shape[:1] + (1,) + U.shape[2:] + (1,) * d
        coupling = sum(
            self._galerkin(U[:, j].reshape(field_shape), ops.raise_(F, j)) for j in range(d)
        )
        df = df + self._coupling * ops.to_spectral(coupling, trailing=d)
        return du, df

    def step(self, u: np.ndarray, f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        dt = self.dt
        u, f = self.apply_stiff(u, f)
        du, df = self.explicit_rhs(u, f)
        u1, f1 = u + dt * du, f + dt * df
        du, df = self.explicit_rhs(u1, f1)
        u = 0.5 * (u + u1 + dt * du)
        f = 0.5 * (f + f1 + dt * df)
        u, f = self.apply_stiff(u, f)
        return self.ops.enforce_reality(u), self.ops.enforce_reality(f, trailing=self.params.dim)


def is_finite(u: np.ndarray, f: np.ndarray) -> bool:
    return bool(np.all(np.isfinite(u)) and np.all(np.isfinite(f)))


def step_count(t_end: float, dt: float) -> tuple[int, float]:
    """Number of steps to reach t_end and the step that lands on it exactly."""
    if t_end < 0:
        raise ConfigError(["t_end must be non-negative"])
    if t_end == 0:
        return 0, dt
    steps = max(1, math.ceil(t_end / dt - 1e-9))
    return steps, t_end / steps


@dataclass
class RunResult:
    reports: list[EnergyReport]
    final: SimState
    snapshots: list[SimState] = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.reports])


class DeterministicSolver:
    def __init__(self, params: ModelParams, grid: SpectralGrid, dt: float, nonlinear: bool = True):
        self.params = params
        self.grid = grid
        self.dt = dt
        self.nonlinear = nonlinear
        self._stepper = lru_cache(maxsize=4)(self._make_stepper)

    def _make_stepper(self, dt: float) -> BlockStepper:
        return BlockStepper(self.params, self.grid, dt, nonlinear=self.nonlinear)

    def step(self, state: SimState, dt: Optional[float] = None) -> SimState:
        dt = self.dt if dt is None else dt
        u, f = self._stepper(dt).step(state.u_hat[None], state.f_hat[None])
        return SimState(u[0], f[0], state.time + dt)

    def run(
        self,
        s0: SimState,
        t_end: float,
        stride: int = 1,
        observers: Sequence[Observer] = (),
        reporter: Optional[Callable[[SimState], EnergyReport]] = None,
        keep_snapshots: bool = False,
        with_reports: bool = True,
    ) -> RunResult:
        from app.services.diagnostics import Reporter

        if with_reports:
            reporter = reporter or Reporter(self.params, self.grid, reference=s0)
        else:
            reporter = None
        steps, dt = step_count(t_end, self.dt)
        stepper = self._stepper(dt) if steps else None

        reports = [reporter(s0)] if reporter else []
        snapshots = [s0] if keep_snapshots else []
        for observer in observers:
            observer(0, s0)

        u, f = s0.u_hat[None], s0.f_hat[None]
        state = s0
        for n in range(1, steps + 1):
            u, f = stepper.step(u, f)
            if not is_finite(u, f):
                raise NonFiniteState(n)
            if n % stride == 0 or n == steps:
                state = SimState(u[0], f[0], s0.time + n * dt)
                if reporter:
                    reports.append(reporter(state))
                    logger.debug("t=%.4f E=%.6e", state.time, reports[-1].E_s0)
                if keep_snapshots:
                    snapshots.append(state)
                for observer in observers:
                    observer(n, state)

        logger.info("deterministic run: %d steps, dt=%.3e, t_end=%.3f", steps, dt, t_end)
        return RunResult(reports, state, snapshots)
