import logging
from dataclasses import dataclass, field

import numpy as np

from app.core.errors import ConfigError, SupportError
from app.models.state import SimState
from app.schemas.params import InitialSpec, ModelParams, SpectralGrid
from app.services.phase_space import LadderSuite, ladder_suite

logger = logging.getLogger(__name__)

VELOCITY_WINDOW = 8.0


@dataclass(frozen=True)
class CheckedConfig:
    params: ModelParams
    grid: SpectralGrid
    flags: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class PhysicalSample:
    u: np.ndarray  # (P, d)
    f: np.ndarray  # (P,)


def validate_params(p: ModelParams, g: SpectralGrid) -> CheckedConfig:
    """Return the normalized configuration or raise ConfigError listing every violation."""
    violations = []
    if not 0.0 < p.epsilon <= 1.0:
        violations.append("epsilon out of range")
    if not p.kappa > 0.0:
        violations.append("kappa must be positive")
    if not p.theta_bar > 0.0:
        violations.append("theta_bar must be positive")
    if not p.sizes:
        violations.append("sizes empty")
    else:
        if any(i <= 0 for i in p.sizes):
            violations.append("sizes must be positive")
        if any(b <= a for a, b in zip(p.sizes, p.sizes[1:])):
            violations.append("sizes not increasing")
    if p.dim not in (1, 2, 3):
        violations.append("dim must be 1, 2 or 3")
    if not p.domain_length > 0.0:
        violations.append("domain_length must be positive")
    if g.n_x % 2:
        violations.append("n_x must be even")
    if g.n_x < 4:
        violations.append("n_x must be at least 4")
    if g.n_v < 4:
        violations.append("n_v must be at least 4")
    if violations:
        raise ConfigError(violations)

    flags = []
    if abs(float(np.sum(p.drag_weights)) - 1.0) < 1e-14:
        flags.append("drag_sum_unit")
        logger.warning("sum of i^(1/3) equals 1: the mean-velocity drag coefficient of G1 vanishes")
    return CheckedConfig(p, g, flags)


def hermite_functions(v, sigma: float, n_v: int) -> np.ndarray:
    """Orthonormal Hermite functions psi_0..psi_{n_v-1} for variance sigma^2; shape v.shape + (n_v,)."""
    w = np.asarray(v, dtype=float) / sigma
    out = np.empty(w.shape + (n_v,))
    out[..., 0] = (2.0 * np.pi * sigma * sigma) ** -0.25 * np.exp(-0.25 * w * w)
    if n_v > 1:
        out[..., 1] = w * out[..., 0]
    for n in range(1, n_v - 1):
        out[..., n + 1] = (w * out[..., n] - np.sqrt(n) * out[..., n - 1]) / np.sqrt(n + 1)
    return out


def momentum_functional(ops: LadderSuite, u_hat: np.ndarray, f_hat: np.ndarray) -> np.ndarray:
    """u_bar + kappa sum_i i m_i, with m_i the per-volume momentum of f_i; shape (..., d)."""
    d = ops.dim
    p = ops.params
    mean = (0,) * d
    sizes = np.asarray(p.sizes, dtype=float)
    momentum = ops.moments(f_hat).momentum[(Ellipsis,) + mean].real  # (..., N, d)
    ubar = u_hat[(Ellipsis,) + mean].real  # (..., d)
    return ubar + p.kappa * np.einsum("i,...ij->...j", sizes, momentum)


def enforce_compatibility(ops: LadderSuite, u_hat: np.ndarray, f_hat: np.ndarray):
    """Zero species mass and set u_bar so the momentum functional vanishes."""
    d = ops.dim
    mean = (0,) * d
    f_hat = f_hat.copy()
    u_hat = u_hat.copy()
    f_hat[(Ellipsis,) + mean + mean] = 0.0
    u_hat[(Ellipsis,) + mean] = 0.0
    u_hat[(Ellipsis,) + mean] = -momentum_functional(ops, u_hat, f_hat)
    return u_hat, f_hat


def _mode(ops: LadderSuite, xi: tuple[int, ...]) -> tuple[int, ...]:
    return tuple(x % ops.grid.n_x for x in xi)


def _profile_coefficients(spec: InitialSpec, ops: LadderSuite, amplitude: float):
    d, n_v = ops.dim, ops.n_v
    N = ops.params.n_species
    sigma = ops.sigma
    u_hat = np.zeros((d,) + ops.spatial_shape, dtype=complex)
    f_hat = np.zeros((N,) + ops.spatial_shape + ops.hermite_shape, dtype=complex)
    zero = (0,) * d
    plus = _mode(ops, (1,) + (0,) * (d - 1))
    minus = _mode(ops, (-1,) + (0,) * (d - 1))
    e1 = ops.unit_index(0)

    if spec.profile == "shear":
        component = 1 if d >= 2 else 0
        hermite = ops.unit_index(component)
        for mode in (plus, minus):
            if d >= 2:
                u_hat[(component,) + mode] = 0.5 * amplitude
            for i in range(N):
                f_hat[(i,) + mode + hermite] = 0.5 * amplitude / sigma[i]

    elif spec.profile == "density_wave":
        for i in range(N):
            for mode in (plus, minus):
                f_hat[(i,) + mode + zero] = 0.5 * amplitude
            f_hat[(i,) + zero + e1] = 0.5 * amplitude

    elif spec.profile == "homogeneous":
        for i in range(N):
            f_hat[(i,) + zero + e1] = amplitude
            if n_v > 2:
                f_hat[(i,) + zero + tuple(2 * x for x in e1)] = 0.5 * amplitude
            if d >= 2:
                f_hat[(i,) + zero + tuple(a + b for a, b in zip(e1, ops.unit_index(1)))] = amplitude / 3.0

    elif spec.profile == "random":
        rng = np.random.default_rng(spec.seed)
        band = min(2, ops.grid.dealias_cut)
        low = np.all(np.abs(ops.xi) <= band, axis=0)
        hermite_cap = np.all(np.stack(np.meshgrid(*([np.arange(n_v)] * d), indexing="ij")) <= 3, axis=0)
        noise_u = rng.standard_normal(u_hat.shape) + 1j * rng.standard_normal(u_hat.shape)
        noise_f = rng.standard_normal(f_hat.shape) + 1j * rng.standard_normal(f_hat.shape)
        u_hat = amplitude * noise_u * low
        damping = np.exp(-ops.hermite_order) * hermite_cap
        f_hat = amplitude * noise_f * ops.spatial_factor(low, d) * damping

    return u_hat, f_hat


def make_initial_state(spec: InitialSpec, p: ModelParams, g: SpectralGrid, z: float = 0.0) -> SimState:
    ops = ladder_suite(p, g)
    amplitude = spec.amplitude * spec.z_factor(z)
    u_hat, f_hat = _profile_coefficients(spec, ops, amplitude)

    u_hat = ops.enforce_reality(u_hat) * ops.dealias_mask
    f_hat = ops.enforce_reality(f_hat, trailing=p.dim) * ops.spatial_factor(ops.dealias_mask, p.dim)
    u_hat = ops.leray_project(u_hat)
    u_hat, f_hat = enforce_compatibility(ops, u_hat, f_hat)
    return SimState(u_hat, f_hat, 0.0)


def reconstruct_physical(
    s: SimState, p: ModelParams, g: SpectralGrid, x_points, v_points, species: int
) -> PhysicalSample:
    """Point values of u(x) and f_i(x, v) by direct summation over the basis."""
    ops = ladder_suite(p, g)
    d = p.dim
    x = np.atleast_2d(np.asarray(x_points, dtype=float)).reshape(-1, d)
    v = np.atleast_2d(np.asarray(v_points, dtype=float)).reshape(-1, d)
    half = 0.5 * p.domain_length
    if np.any(np.abs(x) > half + 1e-12):
        raise SupportError("x point outside the torus")
    window = VELOCITY_WINDOW * float(np.max(ops.sigma))
    if np.any(np.abs(v) > window):
        raise SupportError("v point outside the velocity window")
    if not 0 <= species < p.n_species:
        raise SupportError(f"no species with index {species}")

    phase = np.exp(1j * np.einsum("pj,j...->p...", x, ops.k))  # (P, *spatial)
    u = (phase.reshape(phase.shape[0], -1) @ s.u_hat.reshape(d, -1).T).real

    psi = hermite_functions(v, ops.sigma[species], g.n_v)  # (P, d, n_v)
    basis_v = psi[:, 0]
    for j in range(1, d):
        basis_v = np.einsum("p...,pn->p...n", basis_v, psi[:, j])
    c = s.f_hat[species].reshape((-1,) + ops.hermite_shape)
    coeff_v = np.tensordot(c, basis_v, axes=(tuple(range(1, d + 1)), tuple(range(1, d + 1))))  # (modes, P)
    f = np.einsum("mp,pm->p", coeff_v, phase.reshape(phase.shape[0], -1)).real
    return PhysicalSample(u, f * p.volume**-0.5)
