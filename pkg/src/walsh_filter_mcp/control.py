"""Piecewise-constant control sequences, SU(2) segment propagators and control
history matrices."""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any

import numpy as np
from numpy.typing import NDArray

from .errors import DomainError, SpecError
from .types import SegmentRecord

TWO_PI: float = 2.0 * math.pi
COALESCE_TOLERANCE: float = 1e-12

IDENTITY: NDArray[np.complex128] = np.eye(2, dtype=complex)
PAULI: NDArray[np.complex128] = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)


@dataclass(frozen=True)
class Segment:
    """One constant-drive segment (Omega, tau, phi).

    A negative Rabi rate is stored as (|Omega|, phi + pi) with ``sign = -1`` so
    the signed rotation angle survives normalization.
    """

    rabi: float
    duration: float
    phase: float = 0.0
    sign: int = 1

    def __post_init__(self) -> None:
        for name in ("rabi", "duration", "phase"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"Segment {name} must be finite")
        if not self.duration > 0:
            raise DomainError(
                f"Segment duration must be positive, got {self.duration}"
            )
        if self.sign not in (1, -1):
            raise DomainError(f"Segment sign must be +1 or -1, got {self.sign}")
        rabi: float = float(self.rabi)
        phase: float = float(self.phase)
        sign: int = self.sign
        if rabi < 0:
            rabi, phase, sign = -rabi, phase + math.pi, -sign
        phase %= TWO_PI
        if phase >= TWO_PI:
            phase = 0.0
        object.__setattr__(self, "rabi", rabi)
        object.__setattr__(self, "duration", float(self.duration))
        object.__setattr__(self, "phase", phase)
        object.__setattr__(self, "sign", sign)

    @property
    def angle(self) -> float:
        return self.rabi * self.duration

    @property
    def signed_angle(self) -> float:
        return self.sign * self.angle

    @property
    def signed_rabi(self) -> float:
        return self.sign * self.rabi

    @property
    def base_phase(self) -> float:
        """Phase before sign normalization."""
        if self.sign > 0:
            return self.phase
        return (self.phase - math.pi) % TWO_PI


@dataclass(frozen=True)
class ControlSequence:
    """Ordered segments making up one gate."""

    segments: tuple[Segment, ...]
    label: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "segments", tuple(self.segments))
        if not self.segments:
            raise DomainError("A control sequence needs at least one segment")

    def __len__(self) -> int:
        return len(self.segments)

    @classmethod
    def from_table(
        cls,
        rows: Iterable[Mapping[str, Any]],
        duration: float = 1.0,
        label: str = "",
    ) -> ControlSequence:
        """Build from {omega, tau, phi} rows, times in units of ``duration``."""
        segments: list[Segment] = []
        for index, row in enumerate(rows):
            for key in ("omega", "tau"):
                if key not in row:
                    raise SpecError(f"Segment {index} is missing '{key}'", key=key)
            unknown: set[str] = set(row) - {"omega", "tau", "phi"}
            if unknown:
                key = sorted(unknown)[0]
                raise SpecError(f"Segment {index} has unknown key '{key}'", key=key)
            segments.append(
                Segment(
                    rabi=float(row["omega"]) / duration,
                    duration=float(row["tau"]) * duration,
                    phase=float(row.get("phi", 0.0)),
                )
            )
        return cls(tuple(segments), label)

    def to_table(self) -> list[SegmentRecord]:
        """Segment rows with times in units of the total duration."""
        tau: float = self.duration
        return [
            {
                "omega": s.signed_rabi * tau,
                "tau": s.duration / tau,
                "phi": s.base_phase,
            }
            for s in self.segments
        ]

    @cached_property
    def durations(self) -> NDArray[np.float64]:
        return np.array([s.duration for s in self.segments])

    @cached_property
    def rabi_rates(self) -> NDArray[np.float64]:
        return np.array([s.rabi for s in self.segments])

    @cached_property
    def phases(self) -> NDArray[np.float64]:
        return np.array([s.phase for s in self.segments])

    @cached_property
    def angles(self) -> NDArray[np.float64]:
        return self.rabi_rates * self.durations

    @cached_property
    def boundaries(self) -> NDArray[np.float64]:
        """Boundary times t_0 = 0 < t_1 < ... < t_n."""
        return np.concatenate(([0.0], np.cumsum(self.durations)))

    @property
    def duration(self) -> float:
        return float(self.boundaries[-1])

    def coalesced(self) -> ControlSequence:
        """Merge consecutive segments sharing Rabi rate, phase and sign."""
        merged: list[Segment] = [self.segments[0]]
        for s in self.segments[1:]:
            last: Segment = merged[-1]
            if (
                s.sign == last.sign
                and math.isclose(s.rabi, last.rabi, rel_tol=COALESCE_TOLERANCE)
                and abs(_wrapped(s.phase - last.phase)) <= COALESCE_TOLERANCE
            ):
                merged[-1] = Segment(
                    last.rabi, last.duration + s.duration, last.phase, last.sign
                )
            else:
                merged.append(s)
        return ControlSequence(tuple(merged), self.label)

    def concatenate(self, other: ControlSequence) -> ControlSequence:
        label: str = "+".join(x for x in (self.label, other.label) if x)
        return ControlSequence(self.segments + other.segments, label)


def _wrapped(angle: float) -> float:
    """Map an angle difference onto [-pi, pi)."""
    return (angle + math.pi) % TWO_PI - math.pi


def segment_unitary(s: Segment) -> NDArray[np.complex128]:
    """P = exp(-i theta sigma_phi / 2)."""
    return _segment_unitaries(
        np.array([s.angle]), np.array([s.phase])
    )[0]


def _segment_unitaries(
    angles: NDArray[np.float64], phases: NDArray[np.float64]
) -> NDArray[np.complex128]:
    c: NDArray[np.float64] = np.cos(angles / 2.0)
    s: NDArray[np.float64] = np.sin(angles / 2.0)
    out: NDArray[np.complex128] = np.empty((angles.size, 2, 2), dtype=complex)
    out[:, 0, 0] = c
    out[:, 1, 1] = c
    out[:, 0, 1] = -1j * s * np.exp(-1j * phases)
    out[:, 1, 0] = -1j * s * np.exp(1j * phases)
    return out


def cumulative_stack(seq: ControlSequence) -> NDArray[np.complex128]:
    """Q_0..Q_n stacked into an (n + 1, 2, 2) array."""
    steps: NDArray[np.complex128] = _segment_unitaries(seq.angles, seq.phases)
    out: NDArray[np.complex128] = np.empty((len(seq) + 1, 2, 2), dtype=complex)
    out[0] = IDENTITY
    for index, step in enumerate(steps, start=1):
        out[index] = step @ out[index - 1]
    return out


def cumulative_operators(seq: ControlSequence) -> list[NDArray[np.complex128]]:
    """Q_0 = I and Q_l = P_l Q_{l-1}."""
    return list(cumulative_stack(seq))


def ideal_unitary(seq: ControlSequence) -> NDArray[np.complex128]:
    """Noise-free gate U_c = Q_n."""
    return cumulative_stack(seq)[-1]


def history_matrices(stack: NDArray[np.complex128]) -> NDArray[np.float64]:
    """Lambda_ij = Tr[Q^dagger sigma_i Q sigma_j] / 2 for a stack of Q."""
    q: NDArray[np.complex128] = np.asarray(stack, dtype=complex)
    rotated: NDArray[np.complex128] = np.einsum(
        "...ba,ibc,...cd->...iad", q.conj(), PAULI, q
    )
    return 0.5 * np.einsum("...iad,jda->...ij", rotated, PAULI).real


def history_matrix(q: NDArray[np.complex128]) -> NDArray[np.float64]:
    """Control history matrix of one cumulative operator."""
    return history_matrices(np.asarray(q)[np.newaxis])[0]


def total_rotation(seq: ControlSequence) -> tuple[float, float]:
    """Signed net angle Theta and its value modulo 2 pi."""
    theta: float = math.fsum(s.signed_angle for s in seq.segments)
    return theta, theta % TWO_PI


def sequence_from_arrays(
    rabi_rates: Sequence[float],
    durations: Sequence[float],
    phases: Sequence[float] | None = None,
    label: str = "",
) -> ControlSequence:
    """Zip parallel Rabi, duration and phase lists into a sequence."""
    if len(rabi_rates) != len(durations):
        raise DomainError(
            f"Got {len(rabi_rates)} Rabi rates but {len(durations)} durations"
        )
    phase_list: Sequence[float] = phases if phases is not None else [0.0] * len(durations)
    if len(phase_list) != len(durations):
        raise DomainError(
            f"Got {len(phase_list)} phases but {len(durations)} durations"
        )
    return ControlSequence(
        tuple(
            Segment(float(o), float(t), float(p))
            for o, t, p in zip(rabi_rates, durations, phase_list)
        ),
        label,
    )
