"""Monte-Carlo validation: harmonic-sum noise synthesis, noisy SU(2) propagation
and ensemble-averaged operational fidelity."""

from __future__ import annotations

import logging
import math
import warnings
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Literal, NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, model_validator

from .control import ControlSequence, ideal_unitary
from .errors import DomainError, StepSizeWarning, WeakNoiseWarning
from .filters import Quadrature

logger: logging.Logger = logging.getLogger(__name__)

MIN_HARMONICS: int = 1000
MIN_REALIZATIONS: int = 100
MAX_STEP_PHASE: float = 0.05
AUTO_STEP_PHASE: float = 0.025
BATCH_SIZE: int = 128


class NoiseModel(BaseModel):
    """Band-limited one-quadrature PSD S(omega) >= 0 on [omega_low, omega_high].

    ``flat`` is S = amplitude; ``power_law`` is S = amplitude * omega^-alpha.
    Flat bands are synthesized on a linear harmonic grid, power laws on a
    logarithmic one.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    quadrature: Quadrature = Quadrature.DEPHASING
    family: Literal["flat", "power_law"] = "flat"
    amplitude: float = Field(default=0.0, ge=0.0)
    alpha: float = 0.0
    omega_low: PositiveFloat = 1e-2
    omega_high: PositiveFloat = 20.0
    harmonics: int = Field(default=MIN_HARMONICS, ge=MIN_HARMONICS)

    @model_validator(mode="after")
    def _band(self) -> NoiseModel:
        if self.omega_low >= self.omega_high:
            raise ValueError(
                f"omega_low {self.omega_low} must be below omega_high {self.omega_high}"
            )
        return self

    def psd(self, omega: ArrayLike) -> NDArray[np.float64]:
        w: NDArray[np.float64] = np.abs(np.asarray(omega, dtype=float))
        inside: NDArray[np.bool_] = (w >= self.omega_low) & (w <= self.omega_high)
        if self.family == "flat":
            return np.where(inside, self.amplitude, 0.0)
        safe: NDArray[np.float64] = np.where(inside, w, 1.0)
        return np.where(inside, self.amplitude * safe ** (-self.alpha), 0.0)

    def integrated_psd(self) -> float:
        """One-sided integral of S over its band."""
        low, high = self.omega_low, self.omega_high
        if self.family == "flat":
            return self.amplitude * (high - low)
        if math.isclose(self.alpha, 1.0):
            return self.amplitude * math.log(high / low)
        power: float = 1.0 - self.alpha
        return self.amplitude * (high**power - low**power) / power

    def total_power(self) -> float:
        """Variance (1 / 2 pi) int S over both signs of omega."""
        return self.integrated_psd() / math.pi

    def smallness(self, duration: float = 1.0) -> float:
        """xi^2 = tau^2 int S over both signs of omega."""
        return 2.0 * duration**2 * self.integrated_psd()

    def with_smallness(self, target: float, duration: float = 1.0) -> NoiseModel:
        """Copy with the amplitude rescaled so that smallness equals target."""
        unit: float = self.model_copy(update={"amplitude": 1.0}).smallness(duration)
        return self.model_copy(update={"amplitude": target / unit})

    def harmonic_grid(self) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        """Component frequencies and the bandwidth each one carries."""
        if self.family == "flat":
            edges = np.linspace(self.omega_low, self.omega_high, self.harmonics + 1)
            centres = 0.5 * (edges[1:] + edges[:-1])
        else:
            edges = np.geomspace(self.omega_low, self.omega_high, self.harmonics + 1)
            centres = np.sqrt(edges[1:] * edges[:-1])
        return centres, np.diff(edges)

    def harmonic_amplitudes(self) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        """Frequencies and amplitudes a_j = sqrt(2 S(omega_j) d_omega_j / pi)."""
        centres, widths = self.harmonic_grid()
        return centres, np.sqrt(2.0 * self.psd(centres) * widths / math.pi)


@dataclass(frozen=True, eq=False)
class NoiseRealization:
    """beta(t) = sum_j a_j cos(omega_j t + phi_j) for one draw of phases."""

    frequencies: NDArray[np.float64]
    amplitudes: NDArray[np.float64]
    phases: NDArray[np.float64]
    seed: int | None = None
    times: NDArray[np.float64] | None = None
    values: NDArray[np.float64] | None = None

    @classmethod
    def constant(cls, value: float) -> NoiseRealization:
        """Static noise beta(t) = value."""
        return cls(np.zeros(1), np.array([float(value)]), np.zeros(1))

    def at(self, times: ArrayLike) -> NDArray[np.float64]:
        t: NDArray[np.float64] = np.asarray(times, dtype=float)
        return np.cos(np.multiply.outer(t, self.frequencies) + self.phases) @ self.amplitudes

    @property
    def bound(self) -> float:
        """Upper bound on |beta| and on its fastest frequency."""
        return float(max(np.max(self.frequencies), np.sum(np.abs(self.amplitudes))))


class EnsembleEstimate(NamedTuple):
    infidelity: float
    standard_error: float


def realize_noise(
    model: NoiseModel, n_times: int, seed: int, duration: float = 1.0
) -> NoiseRealization:
    """Draw one realization and sample it at n_times points on [0, duration]."""
    if n_times < 1:
        raise DomainError(f"Need at least one sample time, got {n_times}")
    frequencies, amplitudes = model.harmonic_amplitudes()
    phases: NDArray[np.float64] = np.random.default_rng(seed).uniform(
        0.0, 2.0 * math.pi, frequencies.size
    )
    realization = NoiseRealization(frequencies, amplitudes, phases, seed)
    times: NDArray[np.float64] = np.linspace(0.0, duration, n_times)
    return NoiseRealization(
        frequencies, amplitudes, phases, seed, times, realization.at(times)
    )


def _substep_counts(
    seq: ControlSequence, substeps: int | None, bound: float
) -> NDArray[np.int64]:
    if substeps is not None:
        if substeps < 1:
            raise DomainError(f"Substeps must be positive, got {substeps}")
        return np.full(len(seq), substeps, dtype=np.int64)
    rate: NDArray[np.float64] = np.maximum(seq.rabi_rates, bound)
    return np.maximum(1, np.ceil(rate * seq.durations / AUTO_STEP_PHASE)).astype(np.int64)


def _midpoints(
    seq: ControlSequence, counts: NDArray[np.int64]
) -> tuple[NDArray[np.float64], NDArray[np.int64], NDArray[np.float64]]:
    """Substep midpoints, owning segment and substep length."""
    index: NDArray[np.int64] = np.repeat(np.arange(len(seq)), counts)
    dt: NDArray[np.float64] = np.repeat(seq.durations / counts, counts)
    offsets: NDArray[np.float64] = np.concatenate([np.arange(c) + 0.5 for c in counts])
    return seq.boundaries[index] + offsets * dt, index, dt


def _propagate(
    seq: ControlSequence,
    index: NDArray[np.int64],
    dt: NDArray[np.float64],
    beta_z: NDArray[np.float64],
    beta_omega: NDArray[np.float64],
) -> NDArray[np.complex128]:
    """Products of exact substep exponentials for a batch of noise traces (R, T)."""
    rabi: NDArray[np.float64] = seq.rabi_rates[index]
    phase: NDArray[np.float64] = seq.phases[index]
    worst: float = float(
        np.max(np.maximum(rabi, np.max(np.abs(beta_z), axis=0)) * dt)
    )
    if worst >= MAX_STEP_PHASE:
        warnings.warn(
            f"Step phase {worst:.3g} exceeds {MAX_STEP_PHASE}; increase substeps",
            StepSizeWarning,
            stacklevel=3,
        )
    drive: NDArray[np.float64] = 0.5 * rabi * (1.0 + beta_omega)
    hx: NDArray[np.float64] = drive * np.cos(phase)
    hy: NDArray[np.float64] = drive * np.sin(phase)
    hz: NDArray[np.float64] = beta_z
    angle: NDArray[np.float64] = np.sqrt(hx**2 + hy**2 + hz**2) * dt
    c: NDArray[np.float64] = np.cos(angle)
    scaled: NDArray[np.float64] = dt * np.sinc(angle / math.pi)
    steps: NDArray[np.complex128] = np.empty(angle.shape + (2, 2), dtype=complex)
    steps[..., 0, 0] = c - 1j * scaled * hz
    steps[..., 1, 1] = c + 1j * scaled * hz
    steps[..., 0, 1] = -1j * scaled * (hx - 1j * hy)
    steps[..., 1, 0] = -1j * scaled * (hx + 1j * hy)
    out: NDArray[np.complex128] = np.broadcast_to(
        np.eye(2, dtype=complex), (angle.shape[0], 2, 2)
    ).copy()
    for t in range(angle.shape[1]):
        out = steps[:, t] @ out
    return out


def evolve(
    seq: ControlSequence,
    dephasing: NoiseRealization | None = None,
    amplitude: NoiseRealization | None = None,
    substeps: int | None = None,
) -> NDArray[np.complex128]:
    """U for H = (1 + beta_Omega)(Omega / 2) sigma_phi + beta_z sigma_z, noise frozen at substep midpoints."""
    bound: float = max(
        [0.0] + [n.bound for n in (dephasing, amplitude) if n is not None]
    )
    counts: NDArray[np.int64] = _substep_counts(seq, substeps, bound)
    times, index, dt = _midpoints(seq, counts)
    beta_z: NDArray[np.float64] = (
        dephasing.at(times) if dephasing is not None else np.zeros_like(times)
    )
    beta_omega: NDArray[np.float64] = (
        amplitude.at(times) if amplitude is not None else np.zeros_like(times)
    )
    return _propagate(seq, index, dt, beta_z[np.newaxis], beta_omega[np.newaxis])[0]


def average_gate_fidelity(
    target: NDArray[np.complex128], actual: NDArray[np.complex128]
) -> NDArray[np.float64]:
    """F_av = |Tr(U_c^dagger U)|^2 / 4, broadcast over leading axes."""
    trace: NDArray[np.complex128] = np.einsum("ij,...ij->...", target.conj(), actual)
    return 0.25 * np.abs(trace) ** 2


def ensemble_infidelity(
    seq: ControlSequence,
    models: Sequence[NoiseModel],
    n_realizations: int = 500,
    seed: int = 0,
    substeps: int | None = None,
    threads: int = 1,
) -> EnsembleEstimate:
    """Mean 1 - F_av over independent realizations and its standard error."""
    if n_realizations < MIN_REALIZATIONS:
        raise DomainError(
            f"Need at least {MIN_REALIZATIONS} realizations, got {n_realizations}"
        )
    for model in models:
        xi2: float = model.smallness(seq.duration)
        if xi2 >= 1.0:
            warnings.warn(
                f"Smallness xi^2 = {xi2:.3g} is outside the weak-noise regime",
                WeakNoiseWarning,
                stacklevel=2,
            )
    by_quadrature: dict[Quadrature, tuple[NDArray[np.float64], NDArray[np.float64]]] = {}
    for model in models:
        if model.quadrature in by_quadrature:
            raise DomainError(f"Two noise models for quadrature {model.quadrature.value}")
        by_quadrature[model.quadrature] = model.harmonic_amplitudes()
    bound: float = max(
        [0.0]
        + [max(float(f[-1]), float(np.sum(a))) for f, a in by_quadrature.values()]
    )
    counts: NDArray[np.int64] = _substep_counts(seq, substeps, bound)
    times, index, dt = _midpoints(seq, counts)
    bases: dict[Quadrature, tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]] = {
        q: (np.cos(np.multiply.outer(times, f)), np.sin(np.multiply.outer(times, f)), a)
        for q, (f, a) in by_quadrature.items()
    }
    children: list[np.random.SeedSequence] = np.random.SeedSequence(seed).spawn(n_realizations)
    target: NDArray[np.complex128] = ideal_unitary(seq)

    def run_batch(batch: slice) -> NDArray[np.float64]:
        members: list[np.random.SeedSequence] = children[batch]
        traces: dict[Quadrature, NDArray[np.float64]] = {
            q: np.zeros((len(members), times.size)) for q in Quadrature
        }
        draws: list[np.random.Generator] = [np.random.default_rng(s) for s in members]
        for q in (Quadrature.DEPHASING, Quadrature.AMPLITUDE):
            if q not in bases:
                continue
            cos_basis, sin_basis, amps = bases[q]
            phases: NDArray[np.float64] = np.stack(
                [g.uniform(0.0, 2.0 * math.pi, amps.size) for g in draws]
            )
            traces[q] = (
                cos_basis @ (amps * np.cos(phases)).T - sin_basis @ (amps * np.sin(phases)).T
            ).T
        unitaries: NDArray[np.complex128] = _propagate(
            seq, index, dt, traces[Quadrature.DEPHASING], traces[Quadrature.AMPLITUDE]
        )
        return 1.0 - average_gate_fidelity(target, unitaries)

    batches: list[slice] = [
        slice(i, min(i + BATCH_SIZE, n_realizations))
        for i in range(0, n_realizations, BATCH_SIZE)
    ]
    logger.info(
        "Simulating %d realizations over %d substeps in %d batches",
        n_realizations,
        times.size,
        len(batches),
    )
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts: list[NDArray[np.float64]] = list(pool.map(run_batch, batches))
    else:
        parts = [run_batch(b) for b in batches]
    samples: NDArray[np.float64] = np.concatenate(parts)
    return EnsembleEstimate(
        infidelity=float(np.mean(samples)),
        standard_error=float(np.std(samples, ddof=1) / math.sqrt(samples.size)),
    )
