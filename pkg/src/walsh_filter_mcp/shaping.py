"""Gaussian, trapezoidal and Butterworth-smoothed envelopes discretized into
fine-grained control sequences."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import signal, special

from .config import parse_params
from .control import ControlSequence, Segment, total_rotation
from .errors import AngleLossWarning, DomainError, SpecError
from .walsh import Modulation, WalshSpectrum, synthesize

logger: logging.Logger = logging.getLogger(__name__)

DEFAULT_SUBSTEPS: int = 100
MIN_SUBSTEPS: int = 10
BUTTERWORTH_SAMPLES: int = 1 << 11
ANGLE_LOSS_TOLERANCE: float = 5e-3


class Shape(str, Enum):
    SQUARE = "square"
    GAUSSIAN = "gaussian"
    TRAPEZOID = "trapezoid"


def segment_angles(spectrum: WalshSpectrum) -> NDArray[np.float64]:
    """Signed rotation angles theta_l = (tau / M) (H X)_l of the M square segments."""
    if Modulation(spectrum.quadrature) is not Modulation.AMPLITUDE:
        raise DomainError("Shaped pulses are synthesized from an amplitude spectrum")
    values: NDArray[np.float64] = synthesize(spectrum)
    return values / values.size


def _check_substeps(substeps: int) -> None:
    if substeps < MIN_SUBSTEPS:
        raise DomainError(f"Need at least {MIN_SUBSTEPS} substeps per segment, got {substeps}")


def _from_cells(
    angles: NDArray[np.float64], weights: NDArray[np.float64], width: float, label: str
) -> ControlSequence:
    """Sub-segments of angle theta_l * w_k, each lasting width / N_s."""
    substeps: int = weights.shape[-1]
    dt: float = width / substeps
    cell_angles: NDArray[np.float64] = np.atleast_2d(weights) * angles[:, np.newaxis]
    return ControlSequence(
        tuple(Segment(a / dt, dt, 0.0) for a in cell_angles.ravel()), label
    )


def gaussian_weights(g: float, substeps: int) -> NDArray[np.float64]:
    """Exact cell integrals of a Gaussian centred on a unit segment, width sigma = g.

    Cells on the right of the centre are taken from the upper tail so both
    halves keep full relative precision.
    """
    if not g > 0:
        raise DomainError(f"Gaussian width factor g must be positive, got {g}")
    edges: NDArray[np.float64] = (np.linspace(0.0, 1.0, substeps + 1) - 0.5) / g
    lo, hi = edges[:-1], edges[1:]
    mass: NDArray[np.float64] = np.where(
        lo + hi < 0,
        special.ndtr(hi) - special.ndtr(lo),
        special.ndtr(-lo) - special.ndtr(-hi),
    )
    total: float = float(mass.sum())
    if not total > 0:
        raise DomainError(f"Gaussian with g={g} has no mass on the sampled cells")
    return mass / total


def gaussian_sequence(
    spectrum: WalshSpectrum, g: float, substeps: int = DEFAULT_SUBSTEPS
) -> ControlSequence:
    """Each segment becomes a truncated Gaussian with mu at its midpoint and sigma = g tau / M."""
    _check_substeps(substeps)
    angles: NDArray[np.float64] = segment_angles(spectrum)
    weights: NDArray[np.float64] = gaussian_weights(g, substeps)
    return _from_cells(angles, weights, spectrum.duration / angles.size, f"gaussian_g{g:g}")


def trapezoid_ramp(fraction: float) -> float:
    """Ramp width per segment side, in units of the segment duration."""
    if not 0 < fraction <= 1:
        raise DomainError(f"Trapezoid fraction F must lie in (0, 1], got {fraction}")
    return min(1.0 / math.tan(fraction * math.pi / 2.0), 0.5)


def trapezoid_weights(fraction: float, substeps: int) -> NDArray[np.float64]:
    """Cell areas of a unit-area trapezoid on [0, 1] with linear ramps and a plateau."""
    w: float = trapezoid_ramp(fraction)
    if w < 1e-15:
        return np.full(substeps, 1.0 / substeps)
    height: float = 1.0 / (1.0 - w)
    t: NDArray[np.float64] = np.linspace(0.0, 1.0, substeps + 1)
    area: NDArray[np.float64] = np.where(
        t < w,
        height * t**2 / (2.0 * w),
        np.where(
            t <= 1.0 - w,
            height * (w / 2.0 + (t - w)),
            1.0 - height * (1.0 - t) ** 2 / (2.0 * w),
        ),
    )
    return np.diff(area)


def trapezoid_sequence(
    spectrum: WalshSpectrum, fraction: float, substeps: int = DEFAULT_SUBSTEPS
) -> ControlSequence:
    """Each segment becomes a trapezoid whose ramps subtend F pi / 2 against the square edges."""
    _check_substeps(substeps)
    angles: NDArray[np.float64] = segment_angles(spectrum)
    weights: NDArray[np.float64] = trapezoid_weights(fraction, substeps)
    return _from_cells(
        angles, weights, spectrum.duration / angles.size, f"trapezoid_F{fraction:g}"
    )


def butterworth_envelope(values: ArrayLike, fc_over_fs: float) -> NDArray[np.generic]:
    """Single causal pass of a first-order low-pass Butterworth, zero initial state."""
    if not 0 < fc_over_fs < 0.5:
        raise DomainError(f"Cutoff fc/fs must lie in (0, 0.5), got {fc_over_fs}")
    b, a = signal.butter(1, 2.0 * fc_over_fs)
    return signal.lfilter(b, a, np.asarray(values))


def butterworth_sequence(
    seq: ControlSequence, fc_over_fs: float, samples: int = BUTTERWORTH_SAMPLES
) -> ControlSequence:
    """Sample the square envelope at midpoints, low-pass it and re-emit it as fine segments.

    Sequences on a single axis are filtered as a real signed envelope; mixed
    phases are filtered as the complex envelope Omega e^{i phi}. The filter
    state left at the end of the sequence is dropped, so low cutoffs lose
    rotation angle: single-axis envelopes raise AngleLossWarning once the net
    angle moves by more than ANGLE_LOSS_TOLERANCE of the driven area.
    """
    if samples < 2:
        raise DomainError(f"Need at least two envelope samples, got {samples}")
    tau: float = seq.duration
    dt: float = tau / samples
    t: NDArray[np.float64] = (np.arange(samples) + 0.5) * dt
    index: NDArray[np.int64] = np.clip(
        np.searchsorted(seq.boundaries, t, side="right") - 1, 0, len(seq) - 1
    )
    base: NDArray[np.float64] = np.array([s.base_phase for s in seq.segments])
    signed: NDArray[np.float64] = np.array([s.signed_rabi for s in seq.segments])
    label: str = f"{seq.label or 'sequence'}_butterworth{fc_over_fs:g}"
    logger.debug("Filtering %d envelope samples at fc/fs=%g", samples, fc_over_fs)
    if not np.allclose(base, base[0]):
        envelope: NDArray[np.complex128] = (signed * np.exp(1j * base))[index]
        smooth_c: NDArray[np.complex128] = butterworth_envelope(envelope, fc_over_fs)
        return ControlSequence(
            tuple(Segment(float(abs(z)), dt, float(np.angle(z))) for z in smooth_c), label
        )
    smooth: NDArray[np.float64] = butterworth_envelope(signed[index], fc_over_fs)
    shaped = ControlSequence(
        tuple(Segment(float(v), dt, float(base[0])) for v in smooth), label
    )
    lost: float = angle_loss(seq, shaped)
    if lost > ANGLE_LOSS_TOLERANCE:
        warnings.warn(
            f"Butterworth fc/fs={fc_over_fs:g} drops {lost:.2%} of the rotation angle",
            AngleLossWarning,
            stacklevel=2,
        )
    return shaped


def angle_loss(square: ControlSequence, shaped: ControlSequence) -> float:
    """|Theta_shaped - Theta_square| as a fraction of the square sequence's driven area."""
    area: float = math.fsum(s.angle for s in square.segments)
    return abs(total_rotation(shaped)[0] - total_rotation(square)[0]) / area


@dataclass(frozen=True)
class ShapedWaveform:
    """Amplitude spectrum, segment profile and its parameter (g or F)."""

    spectrum: WalshSpectrum
    shape: Shape = Shape.SQUARE
    parameter: float | None = None
    substeps: int = DEFAULT_SUBSTEPS

    def __post_init__(self) -> None:
        object.__setattr__(self, "shape", Shape(self.shape))
        if self.shape is not Shape.SQUARE and self.parameter is None:
            raise DomainError(f"Shape {self.shape.value} needs a parameter")

    def angles(self) -> NDArray[np.float64]:
        return segment_angles(self.spectrum)

    def sequence(self) -> ControlSequence:
        if self.shape is Shape.GAUSSIAN:
            return gaussian_sequence(self.spectrum, float(self.parameter), self.substeps)
        if self.shape is Shape.TRAPEZOID:
            return trapezoid_sequence(self.spectrum, float(self.parameter), self.substeps)
        angles: NDArray[np.float64] = self.angles()
        width: float = self.spectrum.duration / angles.size
        return ControlSequence(tuple(Segment(a / width, width, 0.0) for a in angles), "square")


_SHAPE_KEYS: dict[str, str] = {"gaussian": "g", "trapezoid": "F", "butterworth": "fc"}


def parse_shape(text: str) -> tuple[str, float | None]:
    """Parse 'square', 'gaussian:g=0.1666', 'trapezoid:F=0.992' or 'butterworth:fc=0.1'."""
    name, _, rest = text.strip().partition(":")
    name = name.strip().lower()
    if name == "square":
        if rest.strip():
            raise SpecError("Shape 'square' takes no parameter", key="shape")
        return name, None
    if name not in _SHAPE_KEYS:
        raise SpecError(f"Unknown shape '{name}'", key="shape")
    key: str = _SHAPE_KEYS[name]
    params: dict[str, float] = parse_params(rest)
    if set(params) != {key}:
        raise SpecError(f"Shape '{name}' takes exactly one parameter '{key}'", key=key)
    return name, params[key]
