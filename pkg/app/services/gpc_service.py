"""Orthonormal polynomial chaos in one random variable z.

Bases come from three-term recurrences: closed forms for the uniform and
Chebyshev measures, the discretized Stieltjes procedure for any other density.
Gauss rules are the Golub-Welsch eigenvalues of the Jacobi matrix.
"""
import logging
import math
from dataclasses import dataclass, replace
from itertools import combinations_with_replacement, permutations

import numpy as np
from scipy import linalg, special, stats

from app.core.errors import MeasureError, SupportError
from app.models.gpc import GpcBasis, Measure, TripleTensor

logger = logging.getLogger(__name__)

STIELTJES_PANELS = 256
STIELTJES_POINTS = 16
SUPPORT_TOL = 1e-12


@dataclass(frozen=True)
class GrowthFit:
    p_hat: float
    degenerate: bool


def _composite_rule(a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    x, w = special.roots_legendre(STIELTJES_POINTS)
    edges = np.linspace(a, b, STIELTJES_PANELS + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _stieltjes(measure: Measure, n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = _composite_rule(*measure.support)
    rho = measure.density(x)
    if np.any(rho < 0) or not np.all(np.isfinite(rho)):
        raise MeasureError("density must be finite and non-negative")
    w = w * rho
    mass = float(w.sum())
    if abs(mass - 1.0) > 1e-10:
        raise MeasureError(f"density integrates to {mass:.12f}, expected 1")

    alpha = np.zeros(n)
    beta = np.zeros(n)
    beta[0] = mass
    q_prev = np.zeros_like(x)
    q = np.full_like(x, 1.0 / math.sqrt(mass))
    alpha[0] = np.sum(w * x * q * q)
    for m in range(n - 1):
        r = (x - alpha[m]) * q - math.sqrt(beta[m]) * q_prev
        beta[m + 1] = np.sum(w * r * r)
        q_prev, q = q, r / math.sqrt(beta[m + 1])
        alpha[m + 1] = np.sum(w * x * q * q)
    return alpha, beta


def recurrence_coefficients(measure: Measure, n: int) -> tuple[np.ndarray, np.ndarray]:
    """First n monic recurrence coefficients (alpha_m, beta_m), beta_0 = total mass."""
    m = np.arange(n, dtype=float)
    if measure.kind == "uniform":
        beta = np.where(m > 0, m * m / (4.0 * m * m - 1.0), 1.0)
        return np.zeros(n), beta
    if measure.kind == "chebyshev":
        beta = np.full(n, 0.25)
        beta[0] = 1.0
        if n > 1:
            beta[1] = 0.5
        return np.zeros(n), beta
    return _stieltjes(measure, n)


def _gauss_from_recurrence(alpha: np.ndarray, beta: np.ndarray, q: int) -> tuple[np.ndarray, np.ndarray]:
    if q == 1:
        return alpha[:1].copy(), beta[:1].copy()
    nodes, vectors = linalg.eigh_tridiagonal(alpha[:q], np.sqrt(beta[1:q]))
    weights = beta[0] * vectors[0, :] ** 2
    return nodes, weights


def gauss_rule(measure: Measure, q: int) -> tuple[np.ndarray, np.ndarray]:
    """Q-point Gauss rule, exact for polynomials up to degree 2Q-1."""
    if q < 1:
        raise MeasureError("a Gauss rule needs at least one node")
    alpha, beta = recurrence_coefficients(measure, q)
    return _gauss_from_recurrence(alpha, beta, q)


def _evaluate(alpha: np.ndarray, beta: np.ndarray, order: int, z: np.ndarray) -> np.ndarray:
    values = np.empty(z.shape + (order,))
    values[..., 0] = 1.0 / math.sqrt(beta[0])
    if order > 1:
        values[..., 1] = (z - alpha[0]) * values[..., 0] / math.sqrt(beta[1])
    for m in range(1, order - 1):
        values[..., m + 1] = (
            (z - alpha[m]) * values[..., m] - math.sqrt(beta[m]) * values[..., m - 1]
        ) / math.sqrt(beta[m + 1])
    return values


def build_basis(measure: Measure, order: int, quad_points: int | None = None) -> GpcBasis:
    if order < 1:
        raise MeasureError("gPC order must be at least 1")
    q = quad_points or 2 * order
    needed = math.ceil((3 * order - 2) / 2)
    if q < needed:
        raise MeasureError(f"Q={q} cannot integrate triple products of order {order}, need Q >= {needed}")

    alpha, beta = recurrence_coefficients(measure, max(order, q))
    nodes, weights = _gauss_from_recurrence(alpha, beta, q)

    phi = _evaluate(alpha, beta, order, nodes)
    gram = phi.T @ (weights[:, None] * phi)
    defect = float(np.max(np.abs(gram - np.eye(order))))
    if defect > 1e-10:
        raise MeasureError(f"basis not orthonormal, defect {defect:.2e}")

    logger.debug("gPC basis %s K=%d Q=%d", measure.label or measure.kind, order, q)
    return GpcBasis(measure, order, alpha, beta, nodes, weights)


def _check_support(basis: GpcBasis, z: np.ndarray) -> None:
    a, b = basis.measure.support
    if np.any(z < a - SUPPORT_TOL) or np.any(z > b + SUPPORT_TOL):
        raise SupportError(f"z outside support [{a}, {b}]")


def evaluate_basis(basis: GpcBasis, z) -> np.ndarray:
    """phi_1(z)..phi_K(z); shape z.shape + (K,)."""
    z = np.asarray(z, dtype=float)
    _check_support(basis, z)
    return _evaluate(basis.alpha, basis.beta, basis.order, z)


def evaluate_basis_derivatives(basis: GpcBasis, z, order: int) -> np.ndarray:
    """d^g phi_k / dz^g for g = 0..order; shape (order + 1,) + z.shape + (K,)."""
    z = np.asarray(z, dtype=float)
    _check_support(basis, z)
    K = basis.order
    alpha, beta = basis.alpha, basis.beta
    out = np.zeros((order + 1,) + z.shape + (K,))
    out[0] = _evaluate(alpha, beta, K, z)
    for g in range(1, order + 1):
        cur, prev = out[g], out[g - 1]
        if K > 1:
            cur[..., 1] = (g * prev[..., 0] + (z - alpha[0]) * cur[..., 0]) / math.sqrt(beta[1])
        for m in range(1, K - 1):
            cur[..., m + 1] = (
                g * prev[..., m] + (z - alpha[m]) * cur[..., m] - math.sqrt(beta[m]) * cur[..., m - 1]
            ) / math.sqrt(beta[m + 1])
    return out


def project_nodes(basis: GpcBasis, values: np.ndarray) -> np.ndarray:
    """Quadrature projection of nodal values (Q, ...) onto the basis, giving (K, ...)."""
    phi = evaluate_basis(basis, basis.nodes)
    return np.tensordot(phi * basis.weights[:, None], values, axes=(0, 0))


def triple_products(basis: GpcBasis) -> TripleTensor:
    K = basis.order
    phi = evaluate_basis(basis, basis.nodes)
    raw = np.einsum("q,qj,ql,qk->jlk", basis.weights, phi, phi, phi)
    raw[0] = np.eye(K)

    values = np.zeros((K, K, K))
    for j, l, k in combinations_with_replacement(range(K), 3):
        if k > j + l:
            continue
        if basis.measure.is_symmetric and (j + l + k) % 2:
            continue
        for index in set(permutations((j, l, k))):
            values[index] = raw[j, l, k]

    pairs = []
    for j in range(K):
        for l in range(K):
            ks = np.flatnonzero(values[j, l])
            if ks.size:
                pairs.append((j, l, ks, values[j, l, ks]))
    return TripleTensor(values, tuple(pairs))


def galerkin_product(a: np.ndarray, b: np.ndarray, tensor: TripleTensor) -> np.ndarray:
    """c_k = sum_jl S_jlk a_j b_l over the leading axis."""
    S = tensor.values
    return 0.5 * (np.einsum("jlk,j...,l...->k...", S, a, b) + np.einsum("jlk,j...,l...->k...", S, b, a))


def estimate_growth_exponent(basis: GpcBasis, z_grid=None) -> GrowthFit:
    """Slope of log max|phi_k| against log k over k = 2..K."""
    if z_grid is None:
        z_grid = np.linspace(*basis.measure.support, 2001)
    z_grid = np.asarray(z_grid, dtype=float)
    if z_grid.size < 1000:
        raise MeasureError("growth fit needs at least 1000 grid points")
    if basis.order == 1:
        return GrowthFit(0.0, True)

    peaks = np.max(np.abs(evaluate_basis(basis, z_grid)), axis=0)
    ks = np.arange(1, basis.order + 1, dtype=float)
    first = 0 if basis.order == 2 else 1
    fit = stats.linregress(np.log(ks[first:]), np.log(peaks[first:]))
    degenerate = basis.order == 2
    if degenerate:
        logger.warning("growth exponent from a single segment (K=2)")
    return GrowthFit(float(fit.slope), degenerate)


def with_growth_exponent(basis: GpcBasis, z_grid=None) -> GpcBasis:
    return replace(basis, p_hat=estimate_growth_exponent(basis, z_grid).p_hat)


def measure_from_config(kind: str, beta_a: float = 2.0, beta_b: float = 2.0) -> Measure:
    if kind == "uniform":
        return Measure.uniform()
    if kind == "chebyshev":
        return Measure.chebyshev()
    if kind == "beta":
        return Measure.beta(beta_a, beta_b)
    raise MeasureError(f"unknown measure {kind}")
