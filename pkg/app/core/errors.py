"""Error types raised by the simulator and harness.

Every error is a ``ValueError`` carrying a short machine code in ``code``
(the same ``ValueError("CODE")`` convention used across the services).
"""


class SimulationError(ValueError):
    code = "SIMULATION_ERROR"

    def __init__(self, message: str | None = None):
        self.message = message or self.code
        super().__init__(self.message)


class ConfigError(SimulationError):
    code = "CONFIG_INVALID"

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations) or self.code)


class CFLViolation(SimulationError):
    code = "CFL"

    def __init__(self, dt: float, suggested_dt: float):
        self.dt = dt
        self.suggested_dt = suggested_dt
        super().__init__(f"dt={dt:.3e} violates the transport bound, use dt <= {suggested_dt:.3e}")


class NonFiniteState(SimulationError):
    code = "NON_FINITE"

    def __init__(self, step_index: int):
        self.step_index = step_index
        super().__init__(f"non-finite values after step {step_index}")


class NodeRunError(SimulationError):
    code = "NODE_FAILED"

    def __init__(self, node_id: int, reason: str = ""):
        self.node_id = node_id
        super().__init__(f"collocation node {node_id} failed: {reason}".rstrip(": "))


class GridMismatch(SimulationError):
    code = "GRID_MISMATCH"


class SupportError(SimulationError):
    code = "OUT_OF_SUPPORT"


class MeasureError(SimulationError):
    code = "MEASURE_INVALID"


class DecayFitError(SimulationError):
    code = "FIT_INVALID"


class EmitError(SimulationError):
    code = "EMIT_FAILED"

    def __init__(self, message: str, path: str | None = None):
        self.path = path
        super().__init__(message)


class SweepAborted(SimulationError):
    """A preset stopped on a solver failure; ``results`` holds what completed before it."""

    code = "SWEEP_ABORTED"

    def __init__(self, cause: SimulationError, results=None):
        self.cause = cause
        self.results = results
        self.code = cause.code
        super().__init__(f"{cause.code}: {cause}")
