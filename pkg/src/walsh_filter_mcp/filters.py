"""Frequency-domain control vectors and filter-transfer functions."""

from __future__ import annotations

import csv
import io
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .control import ControlSequence, Segment, cumulative_stack, history_matrices
from .errors import DomainError, IllConditionedFitWarning
from .types import FilterRow

logger: logging.Logger = logging.getLogger(__name__)

SINGULARITY_GUARD: float = 1e-6
CHUNK_ELEMENTS: int = 1 << 20
TAYLOR_BAND: tuple[float, float] = (1e-5, 1e-2)
TAYLOR_POINTS: int = 60
TAYLOR_DEGREE: int = 4
FIT_RESIDUAL_THRESHOLD: float = 1e-8
MAX_TAYLOR_ORDER: int = 4
MOMENT_NODES: int = 32


class Quadrature(str, Enum):
    """Noise quadrature a filter-transfer function responds to."""

    DEPHASING = "z"
    AMPLITUDE = "omega"


@dataclass(frozen=True, eq=False)
class FilterSamples:
    """F_z and F_Omega sampled on an ascending frequency grid."""

    grid: NDArray[np.float64]
    F_z: NDArray[np.float64]
    F_omega: NDArray[np.float64]
    label: str = ""
    duration: float = 1.0

    def values(self, quadrature: Quadrature) -> NDArray[np.float64]:
        return self.F_z if Quadrature(quadrature) is Quadrature.DEPHASING else self.F_omega

    def rows(self) -> list[FilterRow]:
        return [
            {"omega_tau": float(w * self.duration), "F_z": float(z), "F_omega": float(o)}
            for w, z, o in zip(self.grid, self.F_z, self.F_omega)
        ]

    def to_csv(self, path: str | Path | None = None) -> str:
        """CSV text with columns omega_tau, F_z, F_omega at 17 significant digits."""
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["omega_tau", "F_z", "F_omega"])
        for w, z, o in zip(self.grid, self.F_z, self.F_omega):
            writer.writerow(
                [f"{w * self.duration:.17g}", f"{z:.17g}", f"{o:.17g}"]
            )
        text: str = buffer.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


def frequency_grid(
    omega_min: float, omega_max: float, points_per_decade: int
) -> NDArray[np.float64]:
    """Decade-anchored log lattice 10^(j / ppd) with both band edges included."""
    if not 0 < omega_min < omega_max:
        raise DomainError(
            f"Frequency grid needs 0 < omega_min < omega_max, got [{omega_min}, {omega_max}]"
        )
    if points_per_decade < 1:
        raise DomainError(
            f"Points per decade must be positive, got {points_per_decade}"
        )
    low: int = math.ceil(math.log10(omega_min) * points_per_decade)
    high: int = math.floor(math.log10(omega_max) * points_per_decade)
    lattice: NDArray[np.float64] = 10.0 ** (
        np.arange(low, high + 1) / points_per_decade
    )
    inner: NDArray[np.float64] = lattice[
        (lattice > omega_min * (1 + 1e-12)) & (lattice < omega_max * (1 - 1e-12))
    ]
    return np.concatenate(([omega_min], inner, [omega_max]))


def local_z_row(s: Segment, omega: ArrayLike) -> NDArray[np.complex128]:
    """Dephasing response R^{P_l}_z(omega) of one segment, history excluded."""
    w: NDArray[np.float64] = _positive(omega)
    rows: NDArray[np.complex128] = _local_rows(
        w, np.array([s.rabi]), np.array([s.duration]), np.array([s.phase])
    )[:, 0, :]
    return rows[0] if np.ndim(omega) == 0 else rows


def _local_rows(
    w: NDArray[np.float64],
    rabi: NDArray[np.float64],
    tau: NDArray[np.float64],
    phase: NDArray[np.float64],
) -> NDArray[np.complex128]:
    """Local dephasing rows for every (frequency, segment) pair, shape (W, n, 3)."""
    ww: NDArray[np.float64] = w[:, np.newaxis]
    om: NDArray[np.float64] = rabi[np.newaxis, :]
    theta: NDArray[np.float64] = om * tau[np.newaxis, :]
    half: NDArray[np.float64] = ww * tau[np.newaxis, :] / 2.0
    e: NDArray[np.complex128] = np.exp(2j * half)
    e_minus_1: NDArray[np.complex128] = 2j * np.sin(half) * np.exp(1j * half)
    c: NDArray[np.float64] = np.cos(theta)
    s: NDArray[np.float64] = np.sin(theta)
    ec_minus_1: NDArray[np.complex128] = e_minus_1 * c - 2.0 * np.sin(theta / 2.0) ** 2
    v: NDArray[np.complex128] = -ww * ec_minus_1 + 1j * om * e * s
    b: NDArray[np.complex128] = 1j * om * ec_minus_1 + ww * e * s
    near: NDArray[np.bool_] = np.abs(ww - om) < SINGULARITY_GUARD * om
    with np.errstate(divide="ignore", invalid="ignore"):
        prefactor: NDArray[np.float64] = ww / ((ww - om) * (ww + om))
    sin_phi: NDArray[np.float64] = np.sin(phase)[np.newaxis, :]
    cos_phi: NDArray[np.float64] = np.cos(phase)[np.newaxis, :]
    rows: NDArray[np.complex128] = np.empty(near.shape + (3,), dtype=complex)
    rows[..., 0] = sin_phi * prefactor * b
    rows[..., 1] = -cos_phi * prefactor * b
    rows[..., 2] = prefactor * v
    if near.any():
        wi, si = np.nonzero(near)
        rows[wi, si] = _resonant_rows(w[wi], rabi[si], tau[si], phase[si])
    return rows


def _resonant_rows(
    w: NDArray[np.float64],
    rabi: NDArray[np.float64],
    tau: NDArray[np.float64],
    phase: NDArray[np.float64],
) -> NDArray[np.complex128]:
    """Local rows through exponential integrals, regular at omega = Omega."""

    def integral(a: NDArray[np.float64]) -> NDArray[np.complex128]:
        return tau * np.exp(0.5j * a * tau) * np.sinc(a * tau / (2.0 * np.pi))

    upper: NDArray[np.complex128] = integral(w + rabi)
    lower: NDArray[np.complex128] = integral(w - rabi)
    odd: NDArray[np.complex128] = 0.5 * w * (upper - lower)
    out: NDArray[np.complex128] = np.empty(w.shape + (3,), dtype=complex)
    out[..., 0] = np.sin(phase) * odd
    out[..., 1] = -np.cos(phase) * odd
    out[..., 2] = -0.5j * w * (upper + lower)
    return out


def dephasing_control_vector(
    seq: ControlSequence, omega: ArrayLike
) -> NDArray[np.complex128]:
    """R^(z)(omega) = sum_l e^{i omega t_(l-1)} R^{P_l}_z(omega) Lambda^(l-1)."""
    w: NDArray[np.float64] = _positive(omega)
    lam: NDArray[np.float64] = history_matrices(cumulative_stack(seq)[:-1])
    starts: NDArray[np.float64] = seq.boundaries[:-1]
    out: NDArray[np.complex128] = np.empty((w.size, 3), dtype=complex)
    for chunk in _chunks(w.size, len(seq)):
        wc: NDArray[np.float64] = w[chunk]
        rows: NDArray[np.complex128] = _local_rows(
            wc, seq.rabi_rates, seq.durations, seq.phases
        )
        rows *= np.exp(1j * wc[:, np.newaxis] * starts[np.newaxis, :])[..., np.newaxis]
        out[chunk] = np.einsum("wnk,nkj->wj", rows, lam)
    return out[0] if np.ndim(omega) == 0 else out


def amplitude_control_vector(
    seq: ControlSequence, omega: ArrayLike
) -> NDArray[np.complex128]:
    """R^(Omega)(omega) = sum_l [e^{i omega t_(l-1)} - e^{i omega t_l}] T^(l) Lambda^(l-1)."""
    w: NDArray[np.float64] = _positive(omega)
    projected: NDArray[np.float64] = _projected_drive(seq)
    midpoints: NDArray[np.float64] = seq.boundaries[:-1] + seq.durations / 2.0
    out: NDArray[np.complex128] = np.empty((w.size, 3), dtype=complex)
    for chunk in _chunks(w.size, len(seq)):
        wc: NDArray[np.float64] = w[chunk, np.newaxis]
        steps: NDArray[np.complex128] = (
            -2j
            * np.sin(wc * seq.durations[np.newaxis, :] / 2.0)
            * np.exp(1j * wc * midpoints[np.newaxis, :])
        )
        out[chunk] = steps @ projected
    return out[0] if np.ndim(omega) == 0 else out


def _projected_drive(seq: ControlSequence) -> NDArray[np.float64]:
    """Rows T^(l) Lambda^(l-1), with T^(l) = (Omega_l / 2)(cos phi_l, sin phi_l, 0)."""
    lam: NDArray[np.float64] = history_matrices(cumulative_stack(seq)[:-1])
    drive: NDArray[np.float64] = np.zeros((len(seq), 3))
    drive[:, 0] = 0.5 * seq.rabi_rates * np.cos(seq.phases)
    drive[:, 1] = 0.5 * seq.rabi_rates * np.sin(seq.phases)
    return np.einsum("nk,nkj->nj", drive, lam)


def control_vector(
    seq: ControlSequence, quadrature: Quadrature, omega: ArrayLike
) -> NDArray[np.complex128]:
    if Quadrature(quadrature) is Quadrature.DEPHASING:
        return dephasing_control_vector(seq, omega)
    return amplitude_control_vector(seq, omega)


def filter_values(
    seq: ControlSequence, quadrature: Quadrature, omega: ArrayLike, threads: int = 1
) -> NDArray[np.float64]:
    """F_i(omega) = R^* R^T for one quadrature, frequency blocks split over ``threads``."""
    if threads < 1:
        raise DomainError(f"Thread count must be positive, got {threads}")
    w: NDArray[np.float64] = _positive(omega)

    def block(part: NDArray[np.float64]) -> NDArray[np.float64]:
        vector: NDArray[np.complex128] = control_vector(seq, quadrature, part)
        return np.sum(vector.real**2 + vector.imag**2, axis=-1)

    if threads > 1 and w.size > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts: list[NDArray[np.float64]] = list(
                pool.map(block, np.array_split(w, min(threads, w.size)))
            )
        values: NDArray[np.float64] = np.concatenate(parts)
    else:
        values = block(w)
    return values[0] if np.ndim(omega) == 0 else values


def filter_functions(
    seq: ControlSequence, grid: ArrayLike, threads: int = 1
) -> FilterSamples:
    """Evaluate F_z and F_Omega over an ascending positive grid."""
    omega: NDArray[np.float64] = _positive(grid).copy()
    if omega.size > 1 and np.any(np.diff(omega) <= 0):
        raise DomainError("Frequency grid must be strictly ascending")
    logger.debug("Evaluating %d frequencies for %s", omega.size, seq.label or "sequence")
    return FilterSamples(
        grid=omega,
        F_z=filter_values(seq, Quadrature.DEPHASING, omega, threads),
        F_omega=filter_values(seq, Quadrature.AMPLITUDE, omega, threads),
        label=seq.label,
        duration=seq.duration,
    )


def first_moment(seq: ControlSequence, quadrature: Quadrature) -> NDArray[np.float64]:
    """Exact integral of the time-domain control row over the sequence.

    R(omega) = -i omega * first_moment + O(omega^2), so C_2 = |first_moment|^2 / tau^2.
    """
    if Quadrature(quadrature) is Quadrature.AMPLITUDE:
        return seq.durations @ _projected_drive(seq)
    lam: NDArray[np.float64] = history_matrices(cumulative_stack(seq)[:-1])
    theta: NDArray[np.float64] = seq.angles
    versine: NDArray[np.float64] = 0.5 * theta * np.sinc(theta / (2.0 * np.pi)) ** 2
    local: NDArray[np.float64] = np.empty((len(seq), 3))
    local[:, 0] = -np.sin(seq.phases) * versine
    local[:, 1] = np.cos(seq.phases) * versine
    local[:, 2] = np.sinc(theta / np.pi)
    local *= seq.durations[:, np.newaxis]
    return np.einsum("nk,nkj->j", local, lam)


def control_rows_at(
    seq: ControlSequence, times: ArrayLike
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Time-domain dephasing and amplitude rows R^(z)(t), R^(Omega)(t)."""
    t: NDArray[np.float64] = np.atleast_1d(np.asarray(times, dtype=float))
    index: NDArray[np.int64] = np.clip(
        np.searchsorted(seq.boundaries, t, side="right") - 1, 0, len(seq) - 1
    )
    lam: NDArray[np.float64] = history_matrices(cumulative_stack(seq)[:-1])[index]
    swept: NDArray[np.float64] = seq.rabi_rates[index] * (t - seq.boundaries[index])
    phi: NDArray[np.float64] = seq.phases[index]
    local: NDArray[np.float64] = np.stack(
        (-np.sin(phi) * np.sin(swept), np.cos(phi) * np.sin(swept), np.cos(swept)),
        axis=-1,
    )
    dephasing: NDArray[np.float64] = np.einsum("tk,tkj->tj", local, lam)
    amplitude: NDArray[np.float64] = _projected_drive(seq)[index]
    return dephasing, amplitude


def time_moments(
    seq: ControlSequence,
    quadrature: Quadrature,
    count: int,
    nodes: int = MOMENT_NODES,
) -> NDArray[np.float64]:
    """M_j = int (t / tau)^j R(t) dt / tau for j < count, shape (count, 3).

    R(omega) = -i omega tau sum_j (i omega tau)^j M_j / j!, so a filter of
    order k has M_0 = ... = M_{k-1} = 0. Gauss-Legendre nodes per segment are
    exact for the trigonometric rows while each segment sweeps a few pi.
    """
    if count < 1:
        raise DomainError(f"Need at least one moment, got {count}")
    x, w = np.polynomial.legendre.leggauss(nodes)
    tau: float = seq.duration
    start: NDArray[np.float64] = seq.boundaries[:-1, np.newaxis]
    half: NDArray[np.float64] = 0.5 * seq.durations[:, np.newaxis]
    t: NDArray[np.float64] = (start + half * (x + 1.0)).ravel()
    weight: NDArray[np.float64] = (half * w).ravel() / tau
    dephasing, amplitude = control_rows_at(seq, t)
    rows: NDArray[np.float64] = (
        amplitude if Quadrature(quadrature) is Quadrature.AMPLITUDE else dephasing
    )
    powers: NDArray[np.float64] = (t / tau)[np.newaxis, :] ** np.arange(count)[:, np.newaxis]
    return (powers * weight) @ rows


def taylor_coefficients(
    seq: ControlSequence,
    quadrature: Quadrature,
    kmax: int = 3,
    band: tuple[float, float] = TAYLOR_BAND,
    points: int = TAYLOR_POINTS,
) -> NDArray[np.float64]:
    """C_2, C_4, ..., C_2kmax of F_i in powers of (omega tau).

    Least-squares fit of F / (omega tau)^2 as a polynomial in (omega tau)^2,
    refined by one Richardson step against a fit on the lower half band.
    """
    if not 1 <= kmax <= MAX_TAYLOR_ORDER:
        raise DomainError(
            f"Taylor order must lie in [1, {MAX_TAYLOR_ORDER}], got {kmax}"
        )
    tau: float = seq.duration
    low, high = band
    full, residual = _fit_series(seq, quadrature, low, high, points, tau)
    half, _ = _fit_series(seq, quadrature, low, high / 2.0, points, tau)
    if residual > FIT_RESIDUAL_THRESHOLD:
        warnings.warn(
            f"Taylor fit relative residual {residual:.3g} exceeds {FIT_RESIDUAL_THRESHOLD:g}",
            IllConditionedFitWarning,
            stacklevel=2,
        )
    q: NDArray[np.float64] = TAYLOR_DEGREE + 1.0 - np.arange(TAYLOR_DEGREE + 1)
    gain: NDArray[np.float64] = 4.0**q
    refined: NDArray[np.float64] = (gain * half - full) / (gain - 1.0)
    return refined[:kmax]


def taylor_coefficient(seq: ControlSequence, quadrature: Quadrature, k: int) -> float:
    """Coefficient C_2k of (omega tau)^2k in the low-frequency expansion of F_i."""
    return float(taylor_coefficients(seq, quadrature, kmax=k)[k - 1])


def _fit_series(
    seq: ControlSequence,
    quadrature: Quadrature,
    low: float,
    high: float,
    points: int,
    tau: float,
) -> tuple[NDArray[np.float64], float]:
    x: NDArray[np.float64] = np.geomspace(low, high, points)
    u: NDArray[np.float64] = x**2
    y: NDArray[np.float64] = filter_values(seq, quadrature, x / tau) / u
    scale: float = float(u[-1])
    design: NDArray[np.float64] = np.vander(u / scale, TAYLOR_DEGREE + 1, increasing=True)
    solution, *_ = np.linalg.lstsq(design, y, rcond=None)
    norm: float = float(np.linalg.norm(y))
    residual: float = float(np.linalg.norm(design @ solution - y) / norm) if norm > 0 else 0.0
    return solution / scale ** np.arange(TAYLOR_DEGREE + 1), residual


def _positive(omega: ArrayLike) -> NDArray[np.float64]:
    w: NDArray[np.float64] = np.atleast_1d(np.asarray(omega, dtype=float)).ravel()
    if w.size == 0 or not np.all(w > 0) or not np.all(np.isfinite(w)):
        raise DomainError("Angular frequencies must be positive and finite")
    return w


def _chunks(size: int, segments: int) -> list[slice]:
    step: int = max(1, CHUNK_ELEMENTS // max(segments, 1))
    return [slice(i, min(i + step, size)) for i in range(0, size, step)]
