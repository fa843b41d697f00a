"""Spectral realizations of the phase-space operators.

Layouts (leading batch axes allowed everywhere):
    fluid arrays    (..., d, *spatial)
    kinetic arrays  (..., N, *spatial, *hermite)
Hermite ladders act on the trailing d axes; species factors broadcast from
axis -(2d+1).
"""
import logging
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
from scipy import fft

from app.schemas.params import ModelParams, SpectralGrid

logger = logging.getLogger(__name__)


def fourier_indices(n: int) -> np.ndarray:
    """Integer wavenumbers in FFT order."""
    return np.rint(fft.fftfreq(n, d=1.0 / n)).astype(int)


def reflect(a: np.ndarray, axes: tuple[int, ...]) -> np.ndarray:
    """a(-xi) on the FFT-ordered axes."""
    for axis in axes:
        n = a.shape[axis]
        a = np.take(a, (-np.arange(n)) % n, axis=axis)
    return a


@dataclass(frozen=True)
class Moments:
    """Field-convention Fourier coefficients of the velocity moments."""

    density: np.ndarray  # (..., N, *spatial)
    momentum: np.ndarray  # (..., N, d, *spatial)
    stress: np.ndarray  # (..., N, d, d, *spatial)


class LadderSuite:
    """Ladder factors, Fourier symbols and padded transforms for one configuration."""

    def __init__(self, params: ModelParams, grid: SpectralGrid):
        self.params = params
        self.grid = grid
        self.dim = params.dim
        self.n_v = grid.n_v
        self.sigma = params.sigma
        self.sqrt_n = np.sqrt(np.arange(grid.n_v, dtype=float))

        idx = fourier_indices(grid.n_x)
        self.xi = np.stack(np.meshgrid(*([idx] * self.dim), indexing="ij"))
        self.k = (2.0 * np.pi / params.domain_length) * self.xi
        self.k2 = np.sum(self.k**2, axis=0)
        self.inv_k2 = np.divide(1.0, self.k2, out=np.zeros_like(self.k2), where=self.k2 > 0)

        nyquist = np.any(self.xi == -(grid.n_x // 2), axis=0)
        self.dealias_mask = np.all(np.abs(self.xi) <= grid.dealias_cut, axis=0) & ~nyquist

        n = np.arange(grid.n_v)
        hermite = np.meshgrid(*([n] * self.dim), indexing="ij")
        self.hermite_order = np.sum(hermite, axis=0)

        self._src, self._dst = self._padding_indices()

    @property
    def spatial_shape(self) -> tuple[int, ...]:
        return (self.grid.n_x,) * self.dim

    @property
    def hermite_shape(self) -> tuple[int, ...]:
        return (self.n_v,) * self.dim

    @cached_property
    def k_max(self) -> float:
        return float(np.sqrt(np.max(self.k2[self.dealias_mask])))

    def unit_index(self, j: int) -> tuple[int, ...]:
        """Hermite multi-index e_j"""
        index = [0] * self.dim
        index[j] = 1
        return tuple(index)

    def species_factor(self, values: np.ndarray) -> np.ndarray:
        """Per-species values shaped to broadcast against kinetic arrays."""
        return np.asarray(values).reshape((-1,) + (1,) * (2 * self.dim))

    def spatial_factor(self, values: np.ndarray, trailing: int) -> np.ndarray:
        return values.reshape(values.shape + (1,) * trailing)

    # ladders

    def lower(self, f: np.ndarray, j: int) -> np.ndarray:
        axis = f.ndim - self.dim + j
        out = np.zeros_like(f)
        src = [slice(None)] * f.ndim
        dst = [slice(None)] * f.ndim
        src[axis] = slice(1, self.n_v)
        dst[axis] = slice(0, self.n_v - 1)
        shape = [1] * f.ndim
        shape[axis] = self.n_v - 1
        out[tuple(dst)] = f[tuple(src)] * self.sqrt_n[1:].reshape(shape)
        return out * self.species_factor(self.sigma)

    def raise_(self, f: np.ndarray, j: int) -> np.ndarray:
        axis = f.ndim - self.dim + j
        out = np.zeros_like(f)
        src = [slice(None)] * f.ndim
        dst = [slice(None)] * f.ndim
        src[axis] = slice(0, self.n_v - 1)
        dst[axis] = slice(1, self.n_v)
        shape = [1] * f.ndim
        shape[axis] = self.n_v - 1
        out[tuple(dst)] = f[tuple(src)] * self.sqrt_n[1:].reshape(shape)
        return out * self.species_factor(self.sigma)

    def number_operator(self, f: np.ndarray) -> np.ndarray:
        """K*K f = sigma^2 |n|_1 f"""
        return f * self.species_factor(self.sigma**2) * self.hermite_order

    def s_operator(self, f: np.ndarray, j: int) -> np.ndarray:
        """S_j f = (theta_bar^2 / i^2) d/dx_j f"""
        symbol = self.spatial_factor(1j * self.k[j], self.dim)
        return f * self.species_factor(self.sigma**4) * symbol

    def transport(self, f: np.ndarray) -> np.ndarray:
        """Coefficients of v . grad_x f."""
        out = np.zeros_like(f)
        for j in range(self.dim):
            symbol = self.spatial_factor(1j * self.k[j], self.dim)
            out += symbol * (self.lower(f, j) + self.raise_(f, j))
        return out

    def leray_project(self, u_hat: np.ndarray) -> np.ndarray:
        div = np.sum(self.k * u_hat, axis=-(self.dim + 1))
        return u_hat - self.k * np.expand_dims(div * self.inv_k2, axis=-(self.dim + 1))

    # moments

    def moments(self, f_hat: np.ndarray) -> Moments:
        d = self.dim
        scale = self.params.volume ** -1.0
        hermite_axes = (slice(None),) * (f_hat.ndim - d)
        zero = (0,) * d

        density = scale * f_hat[hermite_axes + zero]
        sigma = self.sigma.reshape((-1,) + (1,) * d)
        momentum = np.stack(
            [scale * sigma * f_hat[hermite_axes + self.unit_index(j)] for j in range(d)],
            axis=-(d + 1),
        )

        stress = np.zeros(density.shape[:-d] + (d, d) + density.shape[-d:], dtype=f_hat.dtype)
        for j in range(d):
            for l in range(d):
                index = [0] * d
                index[j] += 1
                index[l] += 1
                weight = np.sqrt(2.0) if j == l else 1.0
                if max(index) < self.n_v:
                    stress[(Ellipsis, j, l) + (slice(None),) * d] = weight * f_hat[hermite_axes + tuple(index)]
                if j == l:
                    stress[(Ellipsis, j, l) + (slice(None),) * d] += f_hat[hermite_axes + zero]
        stress = stress * scale * (self.sigma**2).reshape((-1, 1, 1) + (1,) * d)
        return Moments(density, momentum, stress)

    # pseudospectral products

    def _padding_indices(self):
        n = self.grid.n_x
        m = self.grid.padded_size
        idx = fourier_indices(n)
        keep = np.flatnonzero(idx != -(n // 2))
        src = keep
        dst = np.where(idx[keep] >= 0, idx[keep], m + idx[keep])
        return np.ix_(*([src] * self.dim)), np.ix_(*([dst] * self.dim))

    def _index(self, ndim: int, trailing: int, spatial) -> tuple:
        lead = ndim - trailing - self.dim
        return (slice(None),) * lead + tuple(spatial) + (slice(None),) * trailing

    def _axes(self, ndim: int, trailing: int) -> tuple[int, ...]:
        start = ndim - trailing - self.dim
        return tuple(range(start, start + self.dim))

    def to_physical(self, a_hat: np.ndarray, trailing: int = 0) -> np.ndarray:
        """Values on the 3n/2 padded grid."""
        axes = self._axes(a_hat.ndim, trailing)
        shape = list(a_hat.shape)
        for axis in axes:
            shape[axis] = self.grid.padded_size
        padded = np.zeros(shape, dtype=complex)
        padded[self._index(a_hat.ndim, trailing, self._dst)] = a_hat[self._index(a_hat.ndim, trailing, self._src)]
        return fft.ifftn(padded, axes=axes, norm="forward")

    def to_spectral(self, values: np.ndarray, trailing: int = 0) -> np.ndarray:
        """Coefficients on the retained grid, truncated by the dealias cut."""
        axes = self._axes(values.ndim, trailing)
        full = fft.fftn(values, axes=axes, norm="forward")
        shape = list(values.shape)
        for axis in axes:
            shape[axis] = self.grid.n_x
        out = np.zeros(shape, dtype=complex)
        out[self._index(values.ndim, trailing, self._src)] = full[self._index(values.ndim, trailing, self._dst)]
        return out * self.spatial_factor(self.dealias_mask, trailing)

    def dealiased_product(self, a_hat: np.ndarray, b_hat: np.ndarray) -> np.ndarray:
        return self.to_spectral(self.to_physical(a_hat) * self.to_physical(b_hat))

    def enforce_reality(self, a_hat: np.ndarray, trailing: int = 0) -> np.ndarray:
        axes = self._axes(a_hat.ndim, trailing)
        return 0.5 * (a_hat + np.conj(reflect(a_hat, axes)))


def apply_ladder(ops: LadderSuite, f_hat: np.ndarray, which: str) -> np.ndarray:
    """K and Kstar and S return a leading component axis of size d; KstarK keeps the shape."""
    if which == "K":
        return np.stack([ops.lower(f_hat, j) for j in range(ops.dim)])
    if which == "Kstar":
        return np.stack([ops.raise_(f_hat, j) for j in range(ops.dim)])
    if which == "KstarK":
        return ops.number_operator(f_hat)
    if which == "S":
        return np.stack([ops.s_operator(f_hat, j) for j in range(ops.dim)])
    raise ValueError(f"unknown ladder operator {which}")


def transport_term(ops: LadderSuite, f_hat: np.ndarray) -> np.ndarray:
    return ops.transport(f_hat)


def leray_project(ops: LadderSuite, u_hat: np.ndarray) -> np.ndarray:
    return ops.leray_project(u_hat)


def moments(ops: LadderSuite, f_hat: np.ndarray) -> Moments:
    return ops.moments(f_hat)


def dealiased_product(ops: LadderSuite, a_hat: np.ndarray, b_hat: np.ndarray) -> np.ndarray:
    return ops.dealiased_product(a_hat, b_hat)


@lru_cache(maxsize=32)
def ladder_suite(params: ModelParams, grid: SpectralGrid) -> LadderSuite:
    """Shared, read-only operator tables per configuration."""
    return LadderSuite(params, grid)
