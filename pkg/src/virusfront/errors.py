"""Exception types shared across the solver stack.

Configuration mistakes raise plain ``ValueError`` (or ``ConfigError`` from the
CLI layer); everything that goes wrong *inside* a numerical routine derives
from :class:`SolverError` so callers can map failures to a single exit path.
"""

from __future__ import annotations


class SolverError(RuntimeError):
    """Base class for numerical failures (iteration, positivity, step size)."""


class ThresholdError(SolverError):
    """Parameters sit at or below a threshold where the requested object
    (positive far-field limit, positive chain link, ...) does not exist."""


class IterationError(SolverError):
    """An iterative solver stalled or ran out of iterations.

    Carries the last residual / update size in ``residual`` when available.
    """

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class PositivityError(SolverError):
    """A converged or evolving state left the physical (nonnegative) cone."""


class StepSizeError(SolverError):
    """Requested time step violates the advection stability guard."""


class ModelConsistencyError(SolverError):
    """The computed state contradicts model structure (e.g. a contracting
    front, which the expansion law forbids for nonnegative data)."""


class ContinuationError(SolverError):
    """Domain continuation hit its length cap before the window stabilised."""


class ConsistencyError(SolverError):
    """An invariant that the algorithm maintains by construction (bracket
    ordering, shared observer grids) was violated beyond tolerance."""


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""
