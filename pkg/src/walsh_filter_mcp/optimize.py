"""Nelder-Mead search over variational Walsh amplitudes (band cost or time
moments), first-order root finding and dense cost maps."""

from __future__ import annotations

import csv
import io
import logging
import math
import warnings
from collections.abc import Callable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import optimize as scipy_optimize

from .catalog import build, wamf03_first_order
from .config import FAMILY_PARAMETERS, CatalogSpec
from .control import ControlSequence, total_rotation
from .errors import (
    DomainError,
    MaxIterationsWarning,
    NoSignChangeError,
    OptimizationError,
    PoorFitWarning,
    WalshFilterError,
)
from .filters import Quadrature, first_moment, frequency_grid, time_moments
from .spectral import (
    ORDER_POINTS_PER_DECADE,
    CostBand,
    OrderEstimate,
    cost,
    filter_order,
    instantaneous_order,
)
from .types import OptimizationRecord, RootRecord

logger: logging.Logger = logging.getLogger(__name__)

REFLECTION: float = 1.0
EXPANSION: float = 2.0
CONTRACTION: float = 0.5
SHRINKAGE: float = 0.5
DEFAULT_STEP: float = 0.1 * math.pi
DEFAULT_XTOL: float = 1e-8
DEFAULT_FTOL: float = 1e-10
DEFAULT_MAX_ITERATIONS: int = 2000
DEFAULT_RESTARTS: int = 3
RESTART_JITTER: float = 0.5
BISECTION_XTOL: float = 1e-12
ROOT_XTOL: float = 1e-15
ROOT_SAMPLES: int = 41
MOMENT_TOLERANCE: float = 1e-9
POLISH_TOLERANCE: float = 1e-14
TINY: float = float(np.finfo(float).tiny)


@dataclass(frozen=True)
class OptimizationProblem:
    """Objective over the variational vector with the fixed amplitudes bound in."""

    objective: Callable[[NDArray[np.float64]], float]
    initial: tuple[float, ...]
    names: tuple[str, ...] = ()
    fixed: Mapping[str, float] = field(default_factory=dict)
    step: float = DEFAULT_STEP
    xtol: float = DEFAULT_XTOL
    ftol: float = DEFAULT_FTOL
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    restarts: int = DEFAULT_RESTARTS
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "initial", tuple(float(v) for v in self.initial))
        if not self.initial:
            raise DomainError("Optimization needs at least one variational parameter")
        if self.names and len(self.names) != len(self.initial):
            raise DomainError(
                f"Got {len(self.names)} names for {len(self.initial)} variational parameters"
            )
        if not (self.xtol > 0 and self.ftol > 0 and self.step > 0):
            raise DomainError("Step and tolerances must be positive")
        if self.max_iterations < 1 or self.restarts < 0:
            raise DomainError(
                f"Need max_iterations >= 1 and restarts >= 0, got {self.max_iterations}, {self.restarts}"
            )

    @property
    def dimension(self) -> int:
        return len(self.initial)


@dataclass(frozen=True, eq=False)
class OptimizationResult:
    argmin: NDArray[np.float64]
    value: float
    seed_value: float
    iterations: int
    evaluations: int
    converged: bool
    trace: tuple[float, ...] = ()

    @property
    def improved(self) -> bool:
        return self.value < self.seed_value


class _Counted:
    """Objective wrapper counting calls and mapping non-finite values to +inf."""

    def __init__(self, objective: Callable[[NDArray[np.float64]], float]) -> None:
        self.objective = objective
        self.calls: int = 0

    def __call__(self, x: NDArray[np.float64]) -> float:
        self.calls += 1
        value: float = float(self.objective(x))
        return value if math.isfinite(value) else math.inf


def _simplex_search(
    f: _Counted,
    start: NDArray[np.float64],
    steps: NDArray[np.float64],
    problem: OptimizationProblem,
    trace: list[float],
    strict: bool = True,
) -> tuple[NDArray[np.float64], float, int, bool]:
    n: int = start.size
    points: NDArray[np.float64] = np.vstack([start, start + np.diag(steps)])
    values: NDArray[np.float64] = np.array([f(p) for p in points])
    if strict and not np.all(np.isfinite(values)):
        raise DomainError("Objective is not finite on the initial simplex")
    for iteration in range(1, problem.max_iterations + 1):
        order: NDArray[np.int64] = np.argsort(values, kind="stable")
        points, values = points[order], values[order]
        trace.append(float(values[0]))
        diameter: float = float(np.max(np.linalg.norm(points[1:] - points[0], axis=1)))
        if diameter < problem.xtol or values[-1] - values[0] < problem.ftol:
            return points[0], float(values[0]), iteration, True

        centroid: NDArray[np.float64] = points[:-1].mean(axis=0)
        worst: NDArray[np.float64] = points[-1]
        reflected: NDArray[np.float64] = centroid + REFLECTION * (centroid - worst)
        fr: float = f(reflected)
        if fr < values[0]:
            expanded: NDArray[np.float64] = centroid + EXPANSION * (reflected - centroid)
            fe: float = f(expanded)
            if fe < fr:
                points[-1], values[-1] = expanded, fe
            else:
                points[-1], values[-1] = reflected, fr
            continue
        if fr < values[n - 1]:
            points[-1], values[-1] = reflected, fr
            continue
        if fr < values[-1]:
            # outside contraction
            contracted: NDArray[np.float64] = centroid + CONTRACTION * (reflected - centroid)
            fc: float = f(contracted)
            accept: bool = fc <= fr
        else:
            contracted = centroid + CONTRACTION * (worst - centroid)
            fc = f(contracted)
            accept = fc < values[-1]
        if accept:
            points[-1], values[-1] = contracted, fc
            continue
        points[1:] = points[0] + SHRINKAGE * (points[1:] - points[0])
        values[1:] = [f(p) for p in points[1:]]
    best: int = int(np.argmin(values))
    return points[best], float(values[best]), problem.max_iterations, False


def nelder_mead(problem: OptimizationProblem) -> OptimizationResult:
    """Minimize with reflection/expansion/contraction/shrink (1, 2, 0.5, 0.5).

    After the first search, ``restarts`` further searches start from the best
    point with axis steps jittered by a seeded generator; the best result wins.
    """
    f = _Counted(problem.objective)
    start: NDArray[np.float64] = np.array(problem.initial)
    seed_value: float = f(start)
    if not math.isfinite(seed_value):
        raise DomainError(f"Objective is not finite at the seed point {problem.initial}")
    rng: np.random.Generator = np.random.default_rng(problem.seed)
    trace: list[float] = []
    best_x, best_f = start, seed_value
    total_iterations: int = 0
    converged: bool = True
    steps: NDArray[np.float64] = np.full(problem.dimension, problem.step)
    for attempt in range(problem.restarts + 1):
        x, value, iterations, done = _simplex_search(
            f, best_x.copy(), steps, problem, trace, strict=attempt == 0
        )
        total_iterations += iterations
        converged = converged and done
        logger.info(
            "Nelder-Mead search %d/%d: %.6g after %d iterations",
            attempt + 1,
            problem.restarts + 1,
            value,
            iterations,
        )
        if value < best_f:
            best_x, best_f = x, value
        jitter: NDArray[np.float64] = 1.0 + RESTART_JITTER * rng.uniform(-1.0, 1.0, problem.dimension)
        steps = problem.step * jitter * rng.choice((-1.0, 1.0), problem.dimension)
    if not converged:
        warnings.warn(
            f"Nelder-Mead hit {problem.max_iterations} iterations before converging",
            MaxIterationsWarning,
            stacklevel=2,
        )
    return OptimizationResult(
        argmin=np.asarray(best_x, dtype=float),
        value=best_f,
        seed_value=seed_value,
        iterations=total_iterations,
        evaluations=f.calls,
        converged=converged,
        trace=tuple(trace),
    )


def first_order_residual(seq: ControlSequence) -> float:
    """First moment projected on (0, sin(Theta/2), cos(Theta/2)), in units of tau.

    For palindromic amplitude-modulated sequences the moment lies along that
    axis, so the square of the residual is C_2^(z).
    """
    moment: NDArray[np.float64] = first_moment(seq, Quadrature.DEPHASING)
    theta, _ = total_rotation(seq)
    axis: NDArray[np.float64] = np.array([0.0, math.sin(theta / 2.0), math.cos(theta / 2.0)])
    return float(moment @ axis) / seq.duration


def _bracketed(func: Callable[[float], float], low: float, high: float) -> float | None:
    f_low, f_high = func(low), func(high)
    if f_low == 0:
        return low
    if f_high == 0:
        return high
    if f_low * f_high > 0:
        raise NoSignChangeError(
            f"No sign change on [{low:.6g}, {high:.6g}]: {f_low:.3g}, {f_high:.3g}"
        )
    return None


def find_c2_zero(
    x0: float, bracket: tuple[float, float], xtol: float = BISECTION_XTOL
) -> float:
    """X_3 in the bracket where the analytic WAMF_{0,3} C_2^(z) vanishes, by bisection."""
    low, high = sorted(float(b) for b in bracket)
    if (low <= abs(x0) <= high) or (low <= -abs(x0) <= high):
        raise DomainError(f"Bracket [{low:.6g}, {high:.6g}] contains the singular point |X3| = |X0|")

    def residual(x3: float) -> float:
        return wamf03_first_order(x0, x3)

    exact: float | None = _bracketed(residual, low, high)
    if exact is not None:
        return exact
    return float(scipy_optimize.bisect(residual, low, high, xtol=xtol))


def find_first_order_zero(
    builder: Callable[[float], ControlSequence],
    bracket: tuple[float, float],
    samples: int = ROOT_SAMPLES,
    xtol: float = ROOT_XTOL,
) -> float:
    """First root of first_order_residual(builder(x)) inside the bracket."""
    low, high = sorted(float(b) for b in bracket)
    if samples < 2:
        raise DomainError(f"Need at least two scan samples, got {samples}")

    def residual(x: float) -> float:
        return first_order_residual(builder(x))

    grid: NDArray[np.float64] = np.linspace(low, high, samples)
    values: NDArray[np.float64] = np.array([residual(x) for x in grid])
    exact: NDArray[np.int64] = np.flatnonzero(values == 0)
    if exact.size:
        return float(grid[exact[0]])
    changes: NDArray[np.int64] = np.flatnonzero(np.sign(values[:-1]) != np.sign(values[1:]))
    if not changes.size:
        raise NoSignChangeError(
            f"First-order residual keeps its sign over [{low:.6g}, {high:.6g}]"
        )
    i: int = int(changes[0])
    return float(scipy_optimize.brentq(residual, grid[i], grid[i + 1], xtol=xtol))


def _band_order(seq: ControlSequence, band: CostBand) -> OrderEstimate:
    """Log-log order over the band; a band from zero is fitted over its top three decades."""
    low: float = band.omega_low if band.omega_low > 0 else band.omega_high * 1e-3
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PoorFitWarning)
        return filter_order(seq, band.quadrature, (low, band.omega_high))


def root_record(
    family: str,
    parameter: str,
    value: float,
    bracket: tuple[float, float],
    seq: ControlSequence,
    band: CostBand,
) -> RootRecord:
    estimate: OrderEstimate = _band_order(seq, band)
    return {
        "family": family,
        "parameter": parameter,
        "value": value,
        "bracket": [float(b) for b in bracket],
        "residual": first_order_residual(seq),
        "cost": cost(seq, band),
        "order": estimate.order,
        "slope": estimate.slope,
        "poor_fit": estimate.poor_fit,
    }


def _family_builder(
    family: str, fixed: Mapping[str, float], names: Sequence[str], tau: float
) -> Callable[[NDArray[np.float64]], ControlSequence]:
    required, optional = FAMILY_PARAMETERS[family]
    for name in list(fixed) + list(names):
        if name not in required and name not in optional:
            raise DomainError(f"Unknown parameter '{name}' for family {family}")
    overlap: set[str] = set(fixed) & set(names)
    if overlap:
        raise DomainError(f"Parameters both fixed and variational: {sorted(overlap)}")
    missing: list[str] = [n for n in required if n not in fixed and n not in names]
    if missing:
        raise DomainError(f"Family {family} needs a value for {missing}")

    def make(x: NDArray[np.float64]) -> ControlSequence:
        params: dict[str, float] = dict(fixed)
        params.update(zip(names, (float(v) for v in x)))
        return build(CatalogSpec(family=family, params=params, tau=tau))

    return make


def log_cost_objective(
    make: Callable[[NDArray[np.float64]], ControlSequence], band: CostBand
) -> Callable[[NDArray[np.float64]], float]:
    """log10 A over the band; points outside the family's domain score +inf."""

    def objective(x: NDArray[np.float64]) -> float:
        try:
            seq: ControlSequence = make(x)
        except WalshFilterError:
            return math.inf
        return math.log10(max(cost(seq, band), TINY))

    return objective


def moment_residual(seq: ControlSequence, quadrature: Quadrature, order: int) -> float:
    """Norm of the time moments M_0 ... M_{order-1}; zero for a filter of that order."""
    return float(np.linalg.norm(time_moments(seq, quadrature, order)))


def log_moment_objective(
    make: Callable[[NDArray[np.float64]], ControlSequence], quadrature: Quadrature, order: int
) -> Callable[[NDArray[np.float64]], float]:
    """log10 of the squared moment residual; points outside the domain score +inf."""

    def objective(x: NDArray[np.float64]) -> float:
        try:
            seq: ControlSequence = make(x)
        except WalshFilterError:
            return math.inf
        return math.log10(max(moment_residual(seq, quadrature, order) ** 2, TINY))

    return objective


class Objective(str, Enum):
    COST = "cost"
    MOMENTS = "moments"


@dataclass(frozen=True, eq=False)
class FamilyOptimization:
    """Optimized sequence with its band cost and the filter order it reaches over the band."""

    family: str
    names: tuple[str, ...]
    sequence: ControlSequence
    result: OptimizationResult
    objective: Objective
    band_cost: float
    seed_cost: float
    order: OrderEstimate
    median_instantaneous_order: float

    def to_record(self) -> OptimizationRecord:
        return {
            "family": self.family,
            "objective": self.objective.value,
            "variational": list(self.names),
            "argmin": [float(v) for v in self.result.argmin],
            "objective_value": 10.0**self.result.value,
            "seed_objective_value": 10.0**self.result.seed_value,
            "cost": self.band_cost,
            "seed_cost": self.seed_cost,
            "iterations": self.result.iterations,
            "evaluations": self.result.evaluations,
            "converged": self.result.converged,
            "order": self.order.order,
            "slope": self.order.slope,
            "poor_fit": self.order.poor_fit,
            "median_instantaneous_order": self.median_instantaneous_order,
        }


def _summarize(
    family: str,
    problem: OptimizationProblem,
    make: Callable[[NDArray[np.float64]], ControlSequence],
    result: OptimizationResult,
    band: CostBand,
    objective: Objective,
) -> FamilyOptimization:
    seq: ControlSequence = make(result.argmin)
    estimate: OrderEstimate = _band_order(seq, band)
    orders: NDArray[np.float64] = instantaneous_order(
        seq,
        band.quadrature,
        frequency_grid(estimate.omega_low, estimate.omega_high, ORDER_POINTS_PER_DECADE),
    )
    logger.info(
        "%s optimum of %s: order %.3f over [%g, %g]",
        objective.value,
        family,
        estimate.order,
        estimate.omega_low,
        estimate.omega_high,
    )
    return FamilyOptimization(
        family=family,
        names=problem.names,
        sequence=seq,
        result=result,
        objective=objective,
        band_cost=cost(seq, band),
        seed_cost=cost(make(np.array(problem.initial)), band),
        order=estimate,
        median_instantaneous_order=float(np.median(orders)),
    )


def _problem(
    objective: Callable[[NDArray[np.float64]], float],
    fixed: Mapping[str, float],
    variational: Mapping[str, float],
    restarts: int,
    seed: int,
    step: float,
    max_iterations: int,
) -> OptimizationProblem:
    if not variational:
        raise DomainError("Empty variational set: nothing to optimize")
    return OptimizationProblem(
        objective=objective,
        initial=tuple(variational.values()),
        names=tuple(variational),
        fixed=dict(fixed),
        step=step,
        max_iterations=max_iterations,
        restarts=restarts,
        seed=seed,
    )


def optimize_family(
    family: str,
    fixed: Mapping[str, float],
    variational: Mapping[str, float],
    band: CostBand,
    tau: float = 1.0,
    restarts: int = DEFAULT_RESTARTS,
    seed: int = 0,
    step: float = DEFAULT_STEP,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> FamilyOptimization:
    """Minimize log10 A over the variational amplitudes with the rest held fixed.

    Inside the Taylor regime the band-cost optimum is a notch filter: the
    reported order is the log-log fit over the whole band, not the notch.
    """
    make = _family_builder(family, fixed, tuple(variational), tau)
    problem = _problem(
        log_cost_objective(make, band), fixed, variational, restarts, seed, step, max_iterations
    )
    result: OptimizationResult = nelder_mead(problem)
    if not result.improved:
        raise OptimizationError(
            f"Optimizer did not improve on the seed cost {10.0**result.seed_value:.6g}"
        )
    return _summarize(family, problem, make, result, band, Objective.COST)


def optimize_order(
    family: str,
    fixed: Mapping[str, float],
    variational: Mapping[str, float],
    band: CostBand,
    order: int = 2,
    tau: float = 1.0,
    restarts: int = DEFAULT_RESTARTS,
    seed: int = 0,
    step: float = DEFAULT_STEP,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    tolerance: float = MOMENT_TOLERANCE,
) -> FamilyOptimization:
    """Null the time moments M_0 ... M_{order-1} of the band's quadrature.

    Nelder-Mead on the log squared residual, then a least-squares polish of the
    moment vector. Raises OptimizationError when the residual stays above
    ``tolerance`` or the seed is not improved.
    """
    if order < 1:
        raise DomainError(f"Target filter order must be at least 1, got {order}")
    make = _family_builder(family, fixed, tuple(variational), tau)
    problem = _problem(
        log_moment_objective(make, band.quadrature, order),
        fixed,
        variational,
        restarts,
        seed,
        step,
        max_iterations,
    )
    result: OptimizationResult = _polish(make, band.quadrature, order, nelder_mead(problem))
    residual: float = math.sqrt(10.0**result.value)
    if not result.improved or residual > tolerance:
        raise OptimizationError(
            f"Order-{order} search of {family} stopped at moment residual {residual:.3g}"
        )
    return _summarize(family, problem, make, result, band, Objective.MOMENTS)


def _polish(
    make: Callable[[NDArray[np.float64]], ControlSequence],
    quadrature: Quadrature,
    order: int,
    result: OptimizationResult,
) -> OptimizationResult:
    """Least-squares refinement of the moment vector, kept only when it improves."""

    def moments(x: NDArray[np.float64]) -> NDArray[np.float64]:
        return time_moments(make(x), quadrature, order).ravel()

    try:
        fit = scipy_optimize.least_squares(
            moments, result.argmin, xtol=POLISH_TOLERANCE, ftol=POLISH_TOLERANCE, gtol=POLISH_TOLERANCE
        )
    except WalshFilterError:
        return result
    value: float = math.log10(max(float(np.sum(fit.fun**2)), TINY))
    logger.debug("Least-squares polish: %.6g -> %.6g in %d evaluations", result.value, value, fit.nfev)
    if value >= result.value:
        return result
    return replace(
        result,
        argmin=np.asarray(fit.x, dtype=float),
        value=value,
        evaluations=result.evaluations + int(fit.nfev),
    )


@dataclass(frozen=True, eq=False)
class CostMap:
    """log10 A sampled on a rectangular grid; rows follow the y axis."""

    x_name: str
    x_values: NDArray[np.float64]
    y_name: str
    y_values: NDArray[np.float64]
    log_cost: NDArray[np.float64]

    def minimum(self) -> tuple[float, float, float]:
        """(x, y, log10 A) at the smallest finite entry."""
        masked: NDArray[np.float64] = np.where(np.isfinite(self.log_cost), self.log_cost, np.inf)
        row, col = np.unravel_index(int(np.argmin(masked)), masked.shape)
        return float(self.x_values[col]), float(self.y_values[row]), float(masked[row, col])

    def to_csv(self, path: str | Path | None = None) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow([f"{self.y_name}\\{self.x_name}"] + [f"{x:.17g}" for x in self.x_values])
        for y, row in zip(self.y_values, self.log_cost):
            writer.writerow([f"{y:.17g}"] + [f"{v:.17g}" for v in row])
        text: str = buffer.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


def cost_map(
    family: str,
    fixed: Mapping[str, float],
    x_axis: tuple[str, ArrayLike],
    y_axis: tuple[str, ArrayLike],
    band: CostBand,
    tau: float = 1.0,
    threads: int = 1,
) -> CostMap:
    """Dense log10 A over two parameters; out-of-domain points are NaN."""
    x_name, y_name = x_axis[0], y_axis[0]
    xs: NDArray[np.float64] = np.asarray(x_axis[1], dtype=float)
    ys: NDArray[np.float64] = np.asarray(y_axis[1], dtype=float)
    if xs.ndim != 1 or ys.ndim != 1 or xs.size == 0 or ys.size == 0:
        raise DomainError("Cost-map axes must be non-empty one-dimensional grids")
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
        raise DomainError("Cost-map axes must be finite")
    if x_name == y_name:
        raise DomainError(f"Both axes name the same parameter '{x_name}'")
    make = _family_builder(family, fixed, (x_name, y_name), tau)
    objective = log_cost_objective(make, band)

    def row(y: float) -> NDArray[np.float64]:
        values: NDArray[np.float64] = np.array([objective(np.array([x, y])) for x in xs])
        return np.where(np.isinf(values), np.nan, values)

    logger.info("Cost map of %s: %d x %d points", family, ys.size, xs.size)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows: list[NDArray[np.float64]] = list(pool.map(row, ys))
    else:
        rows = [row(y) for y in ys]
    return CostMap(x_name, xs, y_name, ys, np.vstack(rows))
