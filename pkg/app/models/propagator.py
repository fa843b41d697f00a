from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class StiffPropagator:
    """Exact exponential of the stiff linear block over one interval dt.

    coupled: (*spatial, m, m) acting on (u_hat_1..d, c_i(e_j) for i, j) with m = d + N d.
    decay: (N, *hermite) scalar Fokker-Planck factors for every other Hermite index.
    """

    dt: float
    coupled: np.ndarray
    decay: np.ndarray
