"""Shared record definitions for Walsh Filter MCP."""

from __future__ import annotations

from typing import TypedDict


class SegmentRecord(TypedDict):
    """One row of a segment table, times in units of the total duration."""

    omega: float
    tau: float
    phi: float


class SequenceRecord(TypedDict):
    """Control sequence returned by build_sequence and the catalog command."""

    label: str
    duration: float
    total_rotation: float
    effective_rotation: float
    segments: list[SegmentRecord]


class FilterRow(TypedDict):
    """Filter-transfer values at one frequency."""

    omega_tau: float
    F_z: float
    F_omega: float


class CostRecord(TypedDict):
    """Stopband cost over one band."""

    quadrature: str
    omega_low: float
    omega_high: float
    cost: float


class OrderRecord(TypedDict):
    """Fitted log-log slope and filter order over a band."""

    quadrature: str
    omega_low: float
    omega_high: float
    slope: float
    order: float
    residual: float
    poor_fit: bool


class RootRecord(TypedDict):
    """Tuned spectral amplitude cancelling the first-order dephasing term."""

    family: str
    parameter: str
    value: float
    bracket: list[float]
    residual: float
    cost: float
    order: float
    slope: float
    poor_fit: bool


class OptimizationRecord(TypedDict, total=False):
    """Result of a Nelder-Mead run over variational amplitudes."""

    family: str
    objective: str
    variational: list[str]
    argmin: list[float]
    objective_value: float
    seed_objective_value: float
    cost: float
    seed_cost: float
    iterations: int
    evaluations: int
    converged: bool
    order: float
    slope: float
    poor_fit: bool
    median_instantaneous_order: float


class SimulationRecord(TypedDict):
    """One Monte-Carlo run next to its first-order prediction."""

    run: str
    seed: int
    n_realizations: int
    infidelity: float
    standard_error: float
    predicted: float
