"""Stopband cost, filter-order estimators and the first-order infidelity overlap."""

from __future__ import annotations

import logging
import math
import warnings
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import integrate

from .control import ControlSequence
from .errors import DivergenceWarning, DomainError, PoorFitWarning
from .filters import FilterSamples, Quadrature, filter_values, frequency_grid
from .types import CostRecord, OrderRecord

if TYPE_CHECKING:
    from .simulate import NoiseModel

logger: logging.Logger = logging.getLogger(__name__)

DEFAULT_POINTS_PER_DECADE: int = 1000
MIN_POINTS_PER_DECADE: int = 200
ORDER_POINTS_PER_DECADE: int = 50
LOW_FREQUENCY_SPLIT: float = 1e-9
POOR_FIT_DECADES: float = 0.1
EDGE_DECAY_RATIO: float = 1e-3


@dataclass(frozen=True)
class CostBand:
    """Integration band [omega_low, omega_high] for one quadrature."""

    omega_low: float
    omega_high: float
    quadrature: Quadrature = Quadrature.DEPHASING
    points_per_decade: int = DEFAULT_POINTS_PER_DECADE

    def __post_init__(self) -> None:
        if not 0 <= self.omega_low < self.omega_high or not math.isfinite(self.omega_high):
            raise DomainError(
                f"Cost band needs 0 <= omega_low < omega_high, got [{self.omega_low}, {self.omega_high}]"
            )
        if self.points_per_decade < MIN_POINTS_PER_DECADE:
            raise DomainError(
                f"Cost quadrature needs at least {MIN_POINTS_PER_DECADE} points per decade, got {self.points_per_decade}"
            )
        object.__setattr__(self, "quadrature", Quadrature(self.quadrature))


@dataclass(frozen=True)
class OrderEstimate:
    """Log-log slope 2p of F over a band and the implied filter order p - 1."""

    slope: float
    omega_low: float
    omega_high: float
    residual: float
    quadrature: Quadrature = Quadrature.DEPHASING

    @property
    def order(self) -> float:
        return self.slope / 2.0 - 1.0

    @property
    def poor_fit(self) -> bool:
        return self.residual > POOR_FIT_DECADES

    def to_record(self) -> OrderRecord:
        return {
            "quadrature": self.quadrature.value,
            "omega_low": self.omega_low,
            "omega_high": self.omega_high,
            "slope": self.slope,
            "order": self.order,
            "residual": self.residual,
            "poor_fit": self.poor_fit,
        }


def band_integral(
    func: Callable[[NDArray[np.float64]], NDArray[np.float64]],
    omega_low: float,
    omega_high: float,
    points_per_decade: int = DEFAULT_POINTS_PER_DECADE,
    split: float = LOW_FREQUENCY_SPLIT,
) -> float:
    """Trapezoid integral of func on a decade-anchored log lattice.

    A band starting at zero is cut at ``split``; the piece below it is taken
    from a power law fitted over the decade above the cut.
    """
    if omega_low > 0:
        grid: NDArray[np.float64] = frequency_grid(omega_low, omega_high, points_per_decade)
        return float(integrate.trapezoid(func(grid), grid))
    edge: float = min(split, omega_high)
    head: float = _power_law_tail(func, edge)
    if omega_high <= split:
        return head
    return head + band_integral(func, split, omega_high, points_per_decade, split)


def _power_law_tail(
    func: Callable[[NDArray[np.float64]], NDArray[np.float64]], edge: float
) -> float:
    """Integral over [0, edge] of the power law through func on [edge / 10, edge]."""
    points: NDArray[np.float64] = np.geomspace(edge / 10.0, edge, 11)
    values: NDArray[np.float64] = func(points)
    if values[-1] <= 0:
        return 0.0
    mask: NDArray[np.bool_] = values > 0
    if mask.sum() < 2:
        return 0.0
    slope: float = float(np.polyfit(np.log10(points[mask]), np.log10(values[mask]), 1)[0])
    if slope <= -1.0:
        warnings.warn(
            f"Integrand grows as omega^{slope:.2f} towards zero; low-frequency tail diverges",
            DivergenceWarning,
            stacklevel=3,
        )
        return math.inf
    return float(values[-1] * edge / (slope + 1.0))


def cost(seq: ControlSequence, band: CostBand, threads: int = 1) -> float:
    """A_i = integral of F_i over the band."""
    value: float = band_integral(
        lambda w: filter_values(seq, band.quadrature, w, threads),
        band.omega_low,
        band.omega_high,
        band.points_per_decade,
        split=LOW_FREQUENCY_SPLIT / seq.duration,
    )
    logger.debug("Cost %s over [%g, %g] = %g", band.quadrature.value, band.omega_low, band.omega_high, value)
    return value


def cost_record(seq: ControlSequence, band: CostBand, threads: int = 1) -> CostRecord:
    return {
        "quadrature": band.quadrature.value,
        "omega_low": band.omega_low,
        "omega_high": band.omega_high,
        "cost": cost(seq, band, threads),
    }


def filter_order(
    seq: ControlSequence,
    quadrature: Quadrature,
    band: tuple[float, float],
    points_per_decade: int = ORDER_POINTS_PER_DECADE,
) -> OrderEstimate:
    """Least-squares log-log slope of F_i over the band."""
    grid: NDArray[np.float64] = frequency_grid(band[0], band[1], points_per_decade)
    log_w: NDArray[np.float64] = np.log10(grid)
    log_f: NDArray[np.float64] = _safe_log10(filter_values(seq, quadrature, grid))
    slope, intercept = np.polyfit(log_w, log_f, 1)
    residual: float = float(np.sqrt(np.mean((log_f - (slope * log_w + intercept)) ** 2)))
    estimate = OrderEstimate(
        slope=float(slope),
        omega_low=float(band[0]),
        omega_high=float(band[1]),
        residual=residual,
        quadrature=Quadrature(quadrature),
    )
    if estimate.poor_fit:
        warnings.warn(
            f"Power-law fit residual {residual:.3f} decades exceeds {POOR_FIT_DECADES}",
            PoorFitWarning,
            stacklevel=2,
        )
    return estimate


def instantaneous_order(
    seq: ControlSequence, quadrature: Quadrature, grid: ArrayLike
) -> NDArray[np.float64]:
    """Local order p* - 1 = (d log F / d log omega) / 2 - 1 at each grid point."""
    omega: NDArray[np.float64] = np.asarray(grid, dtype=float)
    if omega.size < 2:
        raise DomainError("Instantaneous order needs at least two frequencies")
    log_f: NDArray[np.float64] = _safe_log10(filter_values(seq, quadrature, omega))
    return np.gradient(log_f, np.log10(omega)) / 2.0 - 1.0


def predicted_infidelity(
    target: ControlSequence | FilterSamples,
    models: Sequence[NoiseModel],
    points_per_decade: int = DEFAULT_POINTS_PER_DECADE,
) -> float:
    """First-order infidelity <a_1^2> = sum_i (1 / 2 pi) int S_i F_i / omega^2 over both signs."""
    total: float = 0.0
    for model in models:
        quadrature: Quadrature = Quadrature(model.quadrature)
        if isinstance(target, FilterSamples):
            grid: NDArray[np.float64] = target.grid
            integrand: NDArray[np.float64] = (
                model.psd(grid) * target.values(quadrature) / grid**2
            )
            _check_edges(grid, integrand, model)
            total += float(integrate.trapezoid(integrand, grid)) / math.pi
            continue
        seq: ControlSequence = target

        def overlap(
            w: NDArray[np.float64], model: NoiseModel = model, quadrature: Quadrature = quadrature
        ) -> NDArray[np.float64]:
            return model.psd(w) * filter_values(seq, quadrature, w) / w**2

        if model.amplitude == 0:
            continue
        total += band_integral(overlap, model.omega_low, model.omega_high, points_per_decade) / math.pi
    return total


def _check_edges(
    grid: NDArray[np.float64], integrand: NDArray[np.float64], model: NoiseModel
) -> None:
    peak: float = float(np.max(np.abs(integrand))) if integrand.size else 0.0
    if peak == 0:
        return
    open_low: bool = model.omega_low < grid[0] * (1 - 1e-9)
    open_high: bool = model.omega_high > grid[-1] * (1 + 1e-9)
    if (open_low and abs(integrand[0]) > EDGE_DECAY_RATIO * peak) or (
        open_high and abs(integrand[-1]) > EDGE_DECAY_RATIO * peak
    ):
        warnings.warn(
            "Overlap integrand does not decay at the grid edges; widen the grid",
            DivergenceWarning,
            stacklevel=3,
        )


def _safe_log10(values: NDArray[np.float64]) -> NDArray[np.float64]:
    return np.log10(np.maximum(values, np.finfo(float).tiny))
