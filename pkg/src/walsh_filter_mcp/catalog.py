"""Constructors for the named sequence families and their closed-form
filter coefficients."""

from __future__ import annotations

import math
from collections.abc import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .config import CatalogSpec
from .control import ControlSequence, Segment, total_rotation
from .errors import DomainError
from .types import SequenceRecord
from .walsh import (
    Modulation,
    WalshSpectrum,
    fourier_transform,
    hamming_weight,
    msb_position,
    paley_vector,
    segment_count,
    synthesize,
)

TWO_PI: float = 2.0 * math.pi


def primitive(theta: float, phi: float = 0.0, tau: float = 1.0) -> ControlSequence:
    """Single square pulse of angle theta."""
    if not theta > 0:
        raise DomainError(f"Primitive rotation angle must be positive, got {theta}")
    return ControlSequence((Segment(theta / tau, tau, phi),), label="primitive")


def walsh_amf(spectrum: WalshSpectrum, label: str = "wamf") -> ControlSequence:
    """Equal-duration segments with Rabi rates synthesized from an amplitude spectrum."""
    values: NDArray[np.float64] = synthesize(spectrum)
    tau: float = spectrum.duration
    width: float = tau / values.size
    return ControlSequence(tuple(Segment(v / tau, width, 0.0) for v in values), label)


def walsh_pmf(spectrum: WalshSpectrum, rabi: float, label: str = "wpmf") -> ControlSequence:
    """Constant Rabi rate with segment phases synthesized from a phase spectrum."""
    if not rabi > 0:
        raise DomainError(f"Phase-modulated sequences need a positive Rabi rate, got {rabi}")
    phases: NDArray[np.float64] = synthesize(spectrum)
    width: float = spectrum.duration / phases.size
    return ControlSequence(tuple(Segment(rabi, width, p) for p in phases), label)


def wamf03(x0: float, x3: float, tau: float = 1.0) -> ControlSequence:
    """Four segments with Rabi rates (X+, X-, X-, X+) / tau."""
    spectrum = WalshSpectrum((x0, 0.0, 0.0, x3), Modulation.AMPLITUDE, tau)
    return walsh_amf(spectrum, label="wamf03")


def wamf07(
    x0: float, x3: float = 0.0, x5: float = 0.0, x6: float = 0.0, tau: float = 1.0
) -> ControlSequence:
    """Eight segments synthesized over the symmetric Paley orders {0, 3, 5, 6}."""
    spectrum = WalshSpectrum(
        (x0, 0.0, 0.0, x3, 0.0, x5, x6), Modulation.AMPLITUDE, tau
    )
    return walsh_amf(spectrum, label="wamf07")


def correction_phase(k: int, theta: float) -> float:
    """Y_k = arccos(-theta / (2 pi M(k))) cancelling the first-order amplitude term."""
    argument: float = -theta / (TWO_PI * segment_count(k))
    if not -1.0 <= argument <= 1.0:
        raise DomainError(
            f"No correction phase for theta={theta} at Paley order {k}: arccos({argument:.4g})"
        )
    return math.acos(argument)


def wpmf_correction(k: int, theta: float, tau: float = 1.0) -> ControlSequence:
    """Target P(theta, 0) followed by M(k) 2pi identities phased by Y_k PAL_k."""
    if not theta > 0:
        raise DomainError(f"Target angle must be positive, got {theta}")
    m: int = segment_count(k)
    y: float = correction_phase(k, theta)
    rabi: float = (theta + TWO_PI * m) / tau
    target = ControlSequence((Segment(rabi, theta / rabi, 0.0),))
    block: ControlSequence = walsh_pmf(
        WalshSpectrum.from_orders({k: y}, Modulation.PHASE, TWO_PI * m / rabi), rabi
    )
    return ControlSequence(target.segments + block.segments, label=f"wpmf_correction_{k}")


def bb1_phase(theta: float) -> float:
    argument: float = -theta / (4.0 * math.pi)
    if not -1.0 <= argument <= 1.0:
        raise DomainError(f"No BB1 phase for theta={theta}")
    return math.acos(argument)


def bb1(theta: float, tau: float = 1.0) -> ControlSequence:
    """Collapsed four-segment BB1: theta_0, pi_phi, 2pi_3phi, pi_phi."""
    if not theta > 0:
        raise DomainError(f"Target angle must be positive, got {theta}")
    phi: float = bb1_phase(theta)
    rabi: float = (4.0 * math.pi + theta) / tau
    angles_phases: tuple[tuple[float, float], ...] = (
        (theta, 0.0),
        (math.pi, phi),
        (TWO_PI, 3.0 * phi),
        (math.pi, phi),
    )
    return ControlSequence(
        tuple(Segment(rabi, a / rabi, p) for a, p in angles_phases), label="bb1"
    )


def wrse(k: int, omega0: float, phi0: float = 0.0, tau: float = 1.0) -> ControlSequence:
    """Constant |Omega_0| with its sign switched by PAL_k over 2^m(k) bins."""
    if k < 1:
        raise DomainError(f"WRSE needs Paley order k >= 1, got {k}")
    n: int = msb_position(k)
    signs: NDArray[np.int8] = paley_vector(k, n)
    width: float = tau / signs.size
    return ControlSequence(
        tuple(Segment(float(p) * omega0 / tau, width, phi0) for p in signs),
        label=f"wrse_{k}",
    )


def _sk1_block(theta: float, rabi: float) -> tuple[Segment, ...]:
    """theta_0 followed by the SK1 identities 2pi_phi, 2pi_-phi at one Rabi rate."""
    phi: float = bb1_phase(theta)
    return (
        Segment(rabi, theta / rabi, 0.0),
        Segment(rabi, TWO_PI / rabi, phi),
        Segment(rabi, TWO_PI / rabi, -phi),
    )


def _sums(x0: float, x3: float) -> tuple[float, float]:
    plus, minus = x0 + x3, x0 - x3
    if not (plus > 0 and minus > 0):
        raise DomainError(
            f"Concatenated filters need X0 + X3 > 0 and X0 - X3 > 0, got {plus:.4g}, {minus:.4g}"
        )
    return plus, minus


def uwmf1(x0: float, x3: float, tau: float = 1.0) -> ControlSequence:
    """SK1 blocks replacing each WAMF pulse within the pulse's own duration."""
    plus, minus = _sums(x0, x3)
    outer: float = (plus + 16.0 * math.pi) / tau
    inner: float = (minus + 8.0 * math.pi) / tau
    segments: tuple[Segment, ...] = (
        _sk1_block(plus / 4.0, outer)
        + _sk1_block(minus / 2.0, inner)
        + _sk1_block(plus / 4.0, outer)
    )
    return ControlSequence(segments, label="uwmf1")


def uwmf2(x0: float, x3: float, tau: float = 1.0) -> ControlSequence:
    """SK1 blocks whose target pulses keep the 1:2:1 WAMF timing."""
    plus, minus = _sums(x0, x3)
    kappa: float = 4.0 * (2.0 / plus + 1.0 / minus)
    nu: float = tau / (4.0 * (1.0 + math.pi * kappa))
    outer: float = plus / (4.0 * nu)
    inner: float = minus / (4.0 * nu)
    segments: tuple[Segment, ...] = (
        _sk1_block(plus / 4.0, outer)
        + _sk1_block(minus / 2.0, inner)
        + _sk1_block(plus / 4.0, outer)
    )
    return ControlSequence(segments, label="uwmf2")


def wamf03_first_order(x0: float, x3: float) -> float:
    """Signed first-order dephasing amplitude of WAMF_{0,3}; its square is C_2^(z)."""
    denominator: float = x0 * x0 - x3 * x3
    if denominator == 0:
        raise DomainError(f"Closed form is singular at |X0| = |X3| = {abs(x0)}")
    numerator: float = (x0 - x3) * math.sin(x0 / 2.0) + 2.0 * x3 * math.sin((x0 - x3) / 4.0)
    return 2.0 * numerator / denominator


def wamf03_dephasing_c2(x0: float, x3: float) -> float:
    return wamf03_first_order(x0, x3) ** 2


def wpmf_amplitude_c2(k: int, theta: float, y: float) -> float:
    """C_2^(Omega) = [theta + 2 pi M(k) cos Y]^2 / 4 for a correction block with phase Y."""
    return (theta + TWO_PI * segment_count(k) * math.cos(y)) ** 2 / 4.0


def wrse_kappa(k: int) -> int:
    m: int = msb_position(k)
    return m + 1 if hamming_weight(k) == 1 else m


def wrse_dephasing_c2(k: int, omega0: float) -> float:
    """sinc^2(Omega_0 / 2^kappa(k)) with the unnormalized sinc."""
    x: float = omega0 / 2 ** wrse_kappa(k)
    return float(np.sinc(x / math.pi) ** 2)


def wrse3_dephasing_c4(omega0: float) -> float:
    """C_4^(z) of WRSE_3; loses relative precision for Omega_0 below about 0.1."""
    if omega0 == 0:
        return -1.0 / 12.0
    w: float = omega0
    bracket: float = (
        (w * w - 16.0) * math.cos(w / 2.0)
        - 2.0 * w * w * math.cos(w / 4.0)
        - 8.0 * w * math.sin(w / 4.0)
        + w * w
        + 16.0
    )
    return bracket / w**4


def wrse_amplitude_filter(
    k: int, omega0: float, omega: ArrayLike, tau: float = 1.0
) -> NDArray[np.float64]:
    """F_Omega of WRSE_k: (Omega_0^2 / 4) omega^2 |transform of PAL_k|^2."""
    w: NDArray[np.float64] = np.asarray(omega, dtype=float)
    return (omega0 / tau) ** 2 / 4.0 * w**2 * np.abs(fourier_transform(k, w, tau)) ** 2


def _integer(name: str, value: float) -> int:
    if value != int(value):
        raise DomainError(f"Parameter '{name}' must be an integer, got {value}")
    return int(value)


_BUILDERS: dict[str, Callable[[dict[str, float], float], ControlSequence]] = {
    "primitive": lambda p, tau: primitive(p["theta"], p.get("phi", 0.0), tau),
    "wamf03": lambda p, tau: wamf03(p["X0"], p["X3"], tau),
    "wamf07": lambda p, tau: wamf07(
        p["X0"], p.get("X3", 0.0), p.get("X5", 0.0), p.get("X6", 0.0), tau
    ),
    "wpmf_correction": lambda p, tau: wpmf_correction(
        _integer("k", p["k"]), p["theta"], tau
    ),
    "bb1": lambda p, tau: bb1(p["theta"], tau),
    "wrse": lambda p, tau: wrse(
        _integer("k", p["k"]), p["Omega0"], p.get("phi0", 0.0), tau
    ),
    "uwmf1": lambda p, tau: uwmf1(p["X0"], p["X3"], tau),
    "uwmf2": lambda p, tau: uwmf2(p["X0"], p["X3"], tau),
}


def build(spec: CatalogSpec) -> ControlSequence:
    """Construct the sequence a catalog spec describes."""
    return _BUILDERS[spec.family](dict(spec.params), spec.tau)


def amplitude_spectrum(spec: CatalogSpec) -> WalshSpectrum:
    """Walsh amplitude spectrum behind a wamf03 or wamf07 spec."""
    p: dict[str, float] = dict(spec.params)
    if spec.family == "wamf03":
        return WalshSpectrum((p["X0"], 0.0, 0.0, p["X3"]), Modulation.AMPLITUDE, spec.tau)
    if spec.family == "wamf07":
        return WalshSpectrum(
            (p["X0"], 0.0, 0.0, p.get("X3", 0.0), 0.0, p.get("X5", 0.0), p.get("X6", 0.0)),
            Modulation.AMPLITUDE,
            spec.tau,
        )
    raise DomainError(f"Family {spec.family} has no Walsh amplitude spectrum")


def sequence_record(seq: ControlSequence) -> SequenceRecord:
    theta, effective = total_rotation(seq)
    return {
        "label": seq.label,
        "duration": seq.duration,
        "total_rotation": theta,
        "effective_rotation": effective,
        "segments": seq.to_table(),
    }
