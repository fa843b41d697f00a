from dataclasses import dataclass, replace

import numpy as np

from app.models.gpc import GpcBasis, TripleTensor


@dataclass(frozen=True)
class SimState:
    """Spectral state at one value of z.

    u_hat: (d, *spatial) plain Fourier coefficients of u.
    f_hat: (N, *spatial, *hermite) coefficients of f_i in the orthonormal
    basis L^{-d/2} e^{ik.x} psi_n(v).
    """

    u_hat: np.ndarray
    f_hat: np.ndarray
    time: float = 0.0

    @property
    def dim(self) -> int:
        return self.u_hat.shape[0]

    def with_time(self, time: float) -> "SimState":
        return replace(self, time=time)

    def copy(self) -> "SimState":
        return SimState(self.u_hat.copy(), self.f_hat.copy(), self.time)


@dataclass(frozen=True)
class SgState:
    """K stacked SimState blocks; u_hat (K, d, *spatial), f_hat (K, N, *spatial, *hermite)."""

    u_hat: np.ndarray
    f_hat: np.ndarray
    basis: GpcBasis
    tensor: TripleTensor
    time: float = 0.0

    @property
    def order(self) -> int:
        return self.u_hat.shape[0]

    def block(self, k: int) -> SimState:
        return SimState(self.u_hat[k], self.f_hat[k], self.time)

    def with_arrays(self, u_hat: np.ndarray, f_hat: np.ndarray, time: float) -> "SgState":
        return replace(self, u_hat=u_hat, f_hat=f_hat, time=time)
