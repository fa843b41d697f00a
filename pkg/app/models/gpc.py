from dataclasses import dataclass, field
from typing import Callable, Literal, Optional

import numpy as np
from scipy import stats

MeasureKind = Literal["uniform", "chebyshev", "custom"]


@dataclass(frozen=True)
class Measure:
    kind: MeasureKind
    support: tuple[float, float] = (-1.0, 1.0)
    density_fn: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)
    label: str = ""

    @classmethod
    def uniform(cls) -> "Measure":
        return cls("uniform", label="uniform")

    @classmethod
    def chebyshev(cls) -> "Measure":
        return cls("chebyshev", label="chebyshev")

    @classmethod
    def custom(cls, density: Callable, a: float, b: float, label: str = "custom") -> "Measure":
        return cls("custom", (float(a), float(b)), density, label)

    @classmethod
    def beta(cls, a: float, b: float) -> "Measure":
        dist = stats.beta(a, b, loc=-1.0, scale=2.0)
        return cls.custom(dist.pdf, -1.0, 1.0, label=f"beta({a:g},{b:g})")

    @property
    def is_symmetric(self) -> bool:
        return self.kind in ("uniform", "chebyshev")

    def density(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if self.kind == "uniform":
            return np.full_like(z, 0.5)
        if self.kind == "chebyshev":
            return 1.0 / (np.pi * np.sqrt(1.0 - z * z))
        return np.asarray(self.density_fn(z), dtype=float)


@dataclass(frozen=True)
class GpcBasis:
    """Orthonormal polynomials phi_1..phi_K (deg phi_k = k-1) and a Q-point Gauss rule.

    alpha, beta hold the monic recurrence p_{m+1} = (z - alpha_m) p_m - beta_m p_{m-1},
    with beta_0 the total mass.
    """

    measure: Measure
    order: int
    alpha: np.ndarray
    beta: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray
    p_hat: Optional[float] = None

    @property
    def K(self) -> int:
        return self.order

    @property
    def quad_points(self) -> int:
        return self.nodes.size


@dataclass(frozen=True)
class TripleTensor:
    """S_jlk with exact permutation symmetry; pairs groups the nonzeros by (j, l)."""

    values: np.ndarray
    pairs: tuple[tuple[int, int, np.ndarray, np.ndarray], ...]

    @property
    def order(self) -> int:
        return self.values.shape[0]

    @classmethod
    def unit(cls) -> "TripleTensor":
        return cls(np.ones((1, 1, 1)), ((0, 0, np.array([0]), np.array([1.0])),))

    @property
    def nnz(self) -> int:
        return int(np.count_nonzero(self.values))
