"""Exception and warning categories raised by walsh_filter_mcp.

Every error derives from ValueError so that FastMCP surfaces it as a ToolError.
"""

from __future__ import annotations


class WalshFilterError(ValueError):
    """Base class for all domain errors."""


class DomainError(WalshFilterError):
    """An argument lies outside its documented domain."""


class SizeError(WalshFilterError):
    """A request exceeds a resource guard."""


class RankError(WalshFilterError):
    """A Paley order does not fit in the requested Hadamard rank."""


class NoSignChangeError(WalshFilterError):
    """A root bracket does not contain a sign change."""


class SpecError(WalshFilterError):
    """A JSON or CLI spec could not be parsed."""

    def __init__(self, message: str, key: str | None = None) -> None:
        super().__init__(message)
        self.key: str | None = key


class OptimizationError(WalshFilterError):
    """The optimizer did not improve on its seed point."""


class IllConditionedFitWarning(RuntimeWarning):
    """Polynomial fit residual exceeds its threshold."""


class PoorFitWarning(RuntimeWarning):
    """Log-log slope fit residual exceeds 0.1 decades."""


class DivergenceWarning(RuntimeWarning):
    """Overlap integrand does not decay at the grid edges."""


class WeakNoiseWarning(RuntimeWarning):
    """Smallness parameter is outside the weak-noise regime."""


class StepSizeWarning(RuntimeWarning):
    """Propagation step is too coarse for the Hamiltonian magnitude."""


class MaxIterationsWarning(RuntimeWarning):
    """Optimizer stopped at its iteration limit."""


class AngleLossWarning(RuntimeWarning):
    """Smoothed envelope no longer delivers the square sequence's rotation angle."""
