"""Energy functionals, dissipation terms, conservation residuals and decay fits.

All norms are evaluated on coefficients. With plain Fourier coefficients for u
and orthonormal coefficients for f:
    ||u||_s^2 = L^d sum_xi w_s(xi) |u_hat|^2
    ||f||_s^2 = sum_xi w_s(xi) sum_n |c|^2
where w_s(xi) = sum_{|alpha|<=s} prod_j k_j^(2 alpha_j).
"""
import logging
from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from typing import Optional

import numpy as np
from scipy import stats

from app.core.errors import DecayFitError, GridMismatch
from app.models.state import SgState, SimState
from app.schemas.params import ModelParams, SpectralGrid
from app.schemas.reports import EnergyReport
from app.services import gpc_service
from app.services.model_core import momentum_functional
from app.services.phase_space import LadderSuite, ladder_suite

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EnergyParts:
    total: float
    fluid: float
    kinetic: np.ndarray  # per species
    mean: float


@dataclass(frozen=True)
class GoodTerms:
    g1: float  # printed coefficient (sum i^(1/3) - 1)
    g1_balance: float  # coefficient sum i^(1/3) of the linearized energy balance
    g2: np.ndarray  # per species


@dataclass(frozen=True)
class ConservationResiduals:
    mass: np.ndarray  # per species
    momentum: float
    ubar: float


@dataclass(frozen=True)
class DecayFit:
    lambda_hat: float
    r2: float
    samples: int


@dataclass(frozen=True)
class SrEnergy:
    mean: float
    per_node: np.ndarray
    by_order: np.ndarray  # quadrature mean of each z-derivative order


@lru_cache(maxsize=32)
def _sobolev_weight_cached(params: ModelParams, grid: SpectralGrid, s: int) -> np.ndarray:
    ops = ladder_suite(params, grid)
    weight = np.zeros(ops.spatial_shape)
    for alpha in product(range(s + 1), repeat=params.dim):
        if sum(alpha) > s:
            continue
        term = np.ones(ops.spatial_shape)
        for j, a in enumerate(alpha):
            term = term * ops.k[j] ** (2 * a)
        weight += term
    return weight


def sobolev_weights(params: ModelParams, grid: SpectralGrid, s: int) -> np.ndarray:
    if s < 0:
        raise ValueError("Sobolev order must be non-negative")
    return _sobolev_weight_cached(params, grid, s)


def _species_sum(ops: LadderSuite, values: np.ndarray) -> np.ndarray:
    """Sum a kinetic-layout array over everything except the species axis."""
    axis = values.ndim - (2 * ops.dim + 1)
    moved = np.moveaxis(values, axis, 0)
    return moved.reshape(moved.shape[0], -1).sum(axis=1)


def _kinetic_norms(ops: LadderSuite, f_hat: np.ndarray, weight: np.ndarray) -> np.ndarray:
    return _species_sum(ops, np.abs(f_hat) ** 2 * ops.spatial_factor(weight, ops.dim))


def _inner(ops: LadderSuite, a: np.ndarray, b: np.ndarray, weight: np.ndarray) -> np.ndarray:
    return _species_sum(ops, np.real(np.conj(a) * b) * ops.spatial_factor(weight, ops.dim))


def _mean_velocity(u_hat: np.ndarray) -> np.ndarray:
    d = u_hat.shape[0]
    return u_hat[(slice(None),) + (0,) * d].real


def energy_parts(state: SimState, params: ModelParams, grid: SpectralGrid, s: int) -> EnergyParts:
    ops = ladder_suite(params, grid)
    weight = sobolev_weights(params, grid, s)
    fluid = params.volume * float(np.sum(weight * np.sum(np.abs(state.u_hat) ** 2, axis=0)))
    kinetic = _kinetic_norms(ops, state.f_hat, weight)
    mean = float(np.sum(_mean_velocity(state.u_hat) ** 2))
    total = fluid + params.kappa * params.theta_bar * float(np.sum(kinetic)) + mean
    return EnergyParts(total, fluid, kinetic, mean)


def energy(state: SimState, params: ModelParams, grid: SpectralGrid, s: int = 2) -> float:
    """E_{s,0}"""
    return energy_parts(state, params, grid, s).total


def good_terms(state: SimState, params: ModelParams, grid: SpectralGrid, s: int = 2) -> GoodTerms:
    """G1 with the printed mean-mode coefficient, its energy-balance variant, and G2_i = |u sqrt(mu_i) - K_i f_i|_s^2."""
    ops = ladder_suite(params, grid)
    d = params.dim
    weight = sobolev_weights(params, grid, s)
    ubar = _mean_velocity(state.u_hat)
    gradient = params.volume * float(np.sum(weight * ops.k2 * np.sum(np.abs(state.u_hat) ** 2, axis=0)))
    rate = params.kappa / params.epsilon
    drag_sum = float(np.sum(params.drag_weights))
    mean = rate * float(np.sum(ubar**2)) / params.volume

    zero = (0,) * d
    g2 = np.zeros(params.n_species)
    for j in range(d):
        residual = -ops.lower(state.f_hat, j)
        residual[(slice(None),) + (slice(None),) * d + zero] += state.u_hat[j]
        g2 += _kinetic_norms(ops, residual, weight)
    return GoodTerms(
        g1=gradient + (drag_sum - 1.0) * mean,
        g1_balance=gradient + drag_sum * mean,
        g2=rate * params.drag_weights * g2,
    )


def g2_expanded(state: SimState, params: ModelParams, grid: SpectralGrid, s: int = 2) -> np.ndarray:
    """G2_i from the expanded quadratic form |u|^2 - 2 Re<u, flux_i> + <K*K f_i, f_i>."""
    ops = ladder_suite(params, grid)
    weight = sobolev_weights(params, grid, s)
    u = state.u_hat
    flux = params.volume * ops.moments(state.f_hat).momentum  # lower_j f at n = 0
    fluid = float(np.sum(weight * np.sum(np.abs(u) ** 2, axis=0)))
    cross = np.array([np.sum(weight * np.sum(np.real(np.conj(u) * flux[i]), axis=0)) for i in range(params.n_species)])
    relaxation = _inner(ops, state.f_hat, ops.number_operator(state.f_hat), weight)
    return params.kappa / params.epsilon * params.drag_weights * (fluid - 2.0 * cross + relaxation)


def hypo_functionals(
    state: SimState, params: ModelParams, grid: SpectralGrid, s: int = 2
) -> tuple[np.ndarray, np.ndarray]:
    """(f_i, f_i)_{s,0} and [f_i, f_i]_{s,0} per species."""
    ops = ladder_suite(params, grid)
    weight = sobolev_weights(params, grid, s)
    eps = params.epsilon
    f = state.f_hat
    d = params.dim

    kf = [ops.lower(f, j) for j in range(d)]
    sf = [ops.s_operator(f, j) for j in range(d)]
    kk = sum(_inner(ops, a, a, weight) for a in kf)
    ss = sum(_inner(ops, a, a, weight) for a in sf)
    ks = sum(_inner(ops, a, b, weight) for a, b in zip(kf, sf))
    k2 = sum(_inner(ops, ops.lower(a, l), ops.lower(a, l), weight) for a in kf for l in range(d))
    kshift = sum(_inner(ops, ops.lower(b, j), ops.lower(b, j), weight) for b in sf for j in range(d))

    pair = (2.0 * kk + 2.0 * eps**2 * ks + eps**3 * ss) / params.drag_weights
    bracket = kk + eps**4 * ss + eps**2 * k2 + eps**4 * kshift
    return pair, bracket


def poincare_ratio(state: SimState, params: ModelParams, grid: SpectralGrid) -> float:
    """sum ||f||^2 / sum (||K f||^2 + eps^2 ||S f||^2); 0 for the equilibrium."""
    ops = ladder_suite(params, grid)
    weight = sobolev_weights(params, grid, 0)
    f = state.f_hat
    numerator = float(np.sum(_kinetic_norms(ops, f, weight)))
    denominator = 0.0
    for j in range(params.dim):
        denominator += float(np.sum(_kinetic_norms(ops, ops.lower(f, j), weight)))
        denominator += params.epsilon**2 * float(np.sum(_kinetic_norms(ops, ops.s_operator(f, j), weight)))
    if numerator == 0.0:
        return 0.0
    return numerator / denominator if denominator > 0 else float("inf")


def conservation_report(
    state: SimState, params: ModelParams, grid: SpectralGrid, reference: Optional[np.ndarray] = None
) -> ConservationResiduals:
    ops = ladder_suite(params, grid)
    d = params.dim
    zero = (0,) * d
    mass = np.abs(state.f_hat[(slice(None),) + zero + zero])
    functional = momentum_functional(ops, state.u_hat, state.f_hat)
    reference = np.zeros(d) if reference is None else reference
    drift = float(np.linalg.norm(functional - reference))
    return ConservationResiduals(mass, drift, float(np.linalg.norm(functional)))


def hydro_residual(state: SimState, params: ModelParams, grid: SpectralGrid) -> np.ndarray:
    """||J_i - i n_i u||_0 per species with n_i = L^-d + rho_i."""
    ops = ladder_suite(params, grid)
    d = params.dim
    moments = ops.moments(state.f_hat)
    sizes = np.asarray(params.sizes, dtype=float)
    out = np.zeros(params.n_species)
    for i in range(params.n_species):
        residual = moments.momentum[i] - state.u_hat / params.volume
        residual -= np.stack([ops.dealiased_product(moments.density[i], state.u_hat[j]) for j in range(d)])
        out[i] = sizes[i] * np.sqrt(params.volume * float(np.sum(np.abs(residual) ** 2)))
    return out


def fit_decay_rate(times, values, window: Optional[tuple[float, float]] = None) -> DecayFit:
    """Least-squares slope of -log E against t over [t_end/2, t_end] by default."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if window is None:
        window = (0.5 * times[-1], times[-1])
    selected = (times >= window[0] - 1e-12) & (times <= window[1] + 1e-12)
    t, e = times[selected], values[selected]
    if t.size < 10:
        raise DecayFitError(f"need at least 10 samples in the fit window, got {t.size}")
    if np.any(e <= 0) or not np.all(np.isfinite(e)):
        raise DecayFitError("non-positive energy in the fit window")

    y = -np.log(e)
    if np.ptp(y) == 0.0:
        return DecayFit(0.0, 1.0, int(t.size))
    fit = stats.linregress(t, y)
    return DecayFit(float(fit.slope), float(fit.rvalue**2), int(t.size))


def fit_geometric_rate(orders, errors, floor: float = 0.0) -> DecayFit:
    """Slope of -log E^e against K; points at or below floor are dropped."""
    orders = np.asarray(orders, dtype=float)
    errors = np.asarray(errors, dtype=float)
    kept = np.isfinite(errors) & (errors > floor)
    if np.count_nonzero(kept) < 2:
        raise DecayFitError("need two orders with error above round-off")
    fit = stats.linregress(orders[kept], -np.log(errors[kept]))
    return DecayFit(float(fit.slope), float(fit.rvalue**2), int(np.count_nonzero(kept)))


def weighted_energy(S: SgState, params: ModelParams, grid: SpectralGrid, s: int, q: float) -> float:
    """E^K_{s,q} = sum_k k^{2q} (block energy)."""
    total = 0.0
    for k in range(S.order):
        total += (k + 1) ** (2 * q) * energy(S.block(k), params, grid, s)
    return total


def _node_states(S: SgState, z: np.ndarray, derivative: int) -> tuple[np.ndarray, np.ndarray]:
    table = gpc_service.evaluate_basis_derivatives(S.basis, z, derivative)[derivative]  # (Q, K)
    u = np.tensordot(table, S.u_hat, axes=(1, 0))
    f = np.tensordot(table, S.f_hat, axes=(1, 0))
    return u, f


def energy_sr(S: SgState, params: ModelParams, grid: SpectralGrid, s: int, r: int) -> SrEnergy:
    """Quadrature in z of sum_{g<=r} E_{s,0}(d^g/dz^g of the reconstruction)."""
    if r >= S.order:
        raise ValueError(f"derivative order {r} not representable with K={S.order}")
    nodes, weights = S.basis.nodes, S.basis.weights
    per_node = np.zeros(nodes.size)
    by_order = np.zeros(r + 1)
    for g in range(r + 1):
        u, f = _node_states(S, nodes, g)
        values = np.array([energy(SimState(u[q], f[q]), params, grid, s) for q in range(nodes.size)])
        per_node += values
        by_order[g] = float(np.dot(weights, values))
    return SrEnergy(float(np.dot(weights, per_node)), per_node, by_order)


def ensemble_energy(states: list[SimState], weights: np.ndarray, params: ModelParams, grid: SpectralGrid, s: int) -> float:
    """r = 0 quadrature of E_{s,0} over a collocation ensemble."""
    values = np.array([energy(state, params, grid, s) for state in states])
    return float(np.dot(weights, values))


def sg_error(
    S: SgState,
    reference: list[SimState],
    nodes: np.ndarray,
    weights: np.ndarray,
    params: ModelParams,
    grid: SpectralGrid,
    s: int = 2,
) -> float:
    """E^e: quadrature over reference nodes of the energy of (reconstruction - reference)."""
    if len(reference) != len(nodes):
        raise GridMismatch("reference ensemble and node set differ in size")
    table = gpc_service.evaluate_basis(S.basis, np.asarray(nodes))
    total = 0.0
    for q, ref in enumerate(reference):
        if ref.u_hat.shape != S.u_hat.shape[1:] or ref.f_hat.shape != S.f_hat.shape[1:]:
            raise GridMismatch("reference state grid differs from the gPC blocks")
        u = np.tensordot(table[q], S.u_hat, axes=(0, 0)) - ref.u_hat
        f = np.tensordot(table[q], S.f_hat, axes=(0, 0)) - ref.f_hat
        total += weights[q] * energy(SimState(u, f), params, grid, s)
    return float(total)


class Reporter:
    """Builds an EnergyReport per observed state; momentum drift is measured against the first state."""

    def __init__(
        self,
        params: ModelParams,
        grid: SpectralGrid,
        s_order: int = 2,
        lambda4: float = 0.01,
        reference: Optional[SimState] = None,
    ):
        self.params = params
        self.grid = grid
        self.s_order = s_order
        self.lambda4 = lambda4
        self.reference = None
        if reference is not None:
            ops = ladder_suite(params, grid)
            self.reference = momentum_functional(ops, reference.u_hat, reference.f_hat)

    def __call__(self, state: SimState) -> EnergyReport:
        p, g, s = self.params, self.grid, self.s_order
        if self.reference is None:
            ops = ladder_suite(p, g)
            self.reference = momentum_functional(ops, state.u_hat, state.f_hat)

        e = energy(state, p, g, s)
        good = good_terms(state, p, g, s)
        pair, bracket = hypo_functionals(state, p, g, s)
        residuals = conservation_report(state, p, g, self.reference)
        return EnergyReport(
            t=state.time,
            E_s0=e,
            G1=good.g1,
            G1_balance=good.g1_balance,
            G2=good.g2.tolist(),
            hypo_pair=pair.tolist(),
            hypo_bracket=bracket.tolist(),
            E_tilde=e + self.lambda4 * p.kappa * p.theta_bar * float(np.sum(pair)),
            mass_residual=residuals.mass.tolist(),
            momentum_residual=residuals.momentum,
            ubar_residual=residuals.ubar,
            hydro_residual=hydro_residual(state, p, g).tolist(),
            poincare_ratio=poincare_ratio(state, p, g),
            dissipation=2.0 * (good.g1_balance + float(np.sum(good.g2))),
        )
