"""Rademacher and Paley-ordered Walsh functions, Sylvester Hadamard matrices and
the synthesis/analysis transforms between Paley spectra and segment values."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import linalg

from .errors import DomainError, RankError, SizeError

MAX_HADAMARD_RANK: int = 20


class Modulation(str, Enum):
    """Quadrature a Walsh spectrum modulates."""

    AMPLITUDE = "amplitude"
    PHASE = "phase"


def msb_position(k: int) -> int:
    """Position m(k) of the most significant set bit, with m(0) = 0."""
    _check_order(k)
    return int(k).bit_length()


def hamming_weight(k: int) -> int:
    """Number r(k) of set bits in k."""
    _check_order(k)
    return bin(int(k)).count("1")


def segment_count(k: int) -> int:
    """Minimal number of equal bins M(k) = 2^m(k) resolving PAL_k."""
    return 1 << msb_position(k)


def rademacher(j: int, x: float) -> int:
    """Sign of sin(2^j pi x), right-continuous, left-continuous at x = 1."""
    if j < 0:
        raise DomainError(f"Rademacher index must be non-negative, got {j}")
    _check_unit(x)
    if j == 0:
        return 1
    if x == 1.0:
        return -1
    return -1 if math.floor(x * (1 << j)) % 2 else 1


def paley(k: int, x: float) -> int:
    """Paley-ordered Walsh function PAL_k(x)."""
    _check_order(k)
    _check_unit(x)
    value: int = 1
    for j in range(1, msb_position(k) + 1):
        if (k >> (j - 1)) & 1:
            value *= rademacher(j, x)
    return value


def paley_vector(k: int, n: int) -> NDArray[np.int8]:
    """PAL_k sampled at the midpoints of 2^n equal bins."""
    if msb_position(k) > n:
        raise RankError(f"Paley order {k} needs rank {msb_position(k)}, got {n}")
    bins: NDArray[np.int64] = np.arange(1 << n)
    signs: NDArray[np.int8] = np.ones(1 << n, dtype=np.int8)
    for j in range(1, msb_position(k) + 1):
        if (k >> (j - 1)) & 1:
            # Bin b sits in the odd half-period of R_j when bit (n - j) of b is set.
            signs *= (1 - 2 * ((bins >> (n - j)) & 1)).astype(np.int8)
    return signs


def hadamard(n: int) -> NDArray[np.int8]:
    """Sylvester Hadamard matrix of order 2^n."""
    if n < 0:
        raise DomainError(f"Hadamard rank must be non-negative, got {n}")
    if n > MAX_HADAMARD_RANK:
        raise SizeError(
            f"Hadamard rank {n} exceeds the limit of {MAX_HADAMARD_RANK}"
        )
    return linalg.hadamard(1 << n, dtype=np.int8)


def paley_to_hadamard_index(k: int, n: int) -> int:
    """One-based Hadamard column i(k) = 1 + sum b_j 2^(n - j) holding PAL_k."""
    m: int = msb_position(k)
    if m > n:
        raise RankError(f"Paley order {k} needs rank {m}, got {n}")
    index: int = 1
    for j in range(1, m + 1):
        if (k >> (j - 1)) & 1:
            index += 1 << (n - j)
    return index


@dataclass(frozen=True)
class WalshSpectrum:
    """Paley-ordered amplitudes q_0..q_N of a control envelope."""

    amplitudes: tuple[float, ...]
    quadrature: Modulation = Modulation.AMPLITUDE
    duration: float = 1.0

    def __post_init__(self) -> None:
        if len(self.amplitudes) == 0:
            raise DomainError("Walsh spectrum must hold at least one amplitude")
        if not self.duration > 0:
            raise DomainError(f"Duration must be positive, got {self.duration}")
        object.__setattr__(
            self, "amplitudes", tuple(float(q) for q in self.amplitudes)
        )

    @classmethod
    def from_orders(
        cls,
        orders: dict[int, float],
        quadrature: Modulation = Modulation.AMPLITUDE,
        duration: float = 1.0,
    ) -> WalshSpectrum:
        """Build a spectrum from a sparse {Paley order: amplitude} mapping."""
        if not orders:
            raise DomainError("Walsh spectrum must hold at least one amplitude")
        values: list[float] = [0.0] * (max(orders) + 1)
        for k, q in orders.items():
            _check_order(k)
            values[k] = q
        return cls(tuple(values), quadrature, duration)

    @property
    def order(self) -> int:
        return len(self.amplitudes) - 1

    @property
    def rank(self) -> int:
        return msb_position(self.order)

    @property
    def segment_count(self) -> int:
        return 1 << self.rank

    def padded(self, length: int) -> NDArray[np.float64]:
        """Amplitudes zero-filled up to length."""
        if length < len(self.amplitudes):
            raise DomainError(
                f"Cannot pad {len(self.amplitudes)} amplitudes to {length}"
            )
        out: NDArray[np.float64] = np.zeros(length)
        out[: len(self.amplitudes)] = self.amplitudes
        return out


def synthesize(spectrum: WalshSpectrum) -> NDArray[np.float64]:
    """Segment values f = H q~ of length M(N)."""
    n: int = spectrum.rank
    reordered: NDArray[np.float64] = np.zeros(1 << n)
    for k, q in enumerate(spectrum.amplitudes):
        reordered[paley_to_hadamard_index(k, n) - 1] = q
    return hadamard(n) @ reordered


def analyze(
    values: ArrayLike,
    quadrature: Modulation = Modulation.AMPLITUDE,
    duration: float = 1.0,
) -> WalshSpectrum:
    """Inverse of synthesize: Paley spectrum of length 2^n from segment values."""
    f: NDArray[np.float64] = np.asarray(values, dtype=float).ravel()
    size: int = f.size
    if size == 0 or size & (size - 1):
        raise DomainError(f"Segment count must be a power of two, got {size}")
    n: int = size.bit_length() - 1
    reordered: NDArray[np.float64] = hadamard(n) @ f / size
    amplitudes: tuple[float, ...] = tuple(
        float(reordered[paley_to_hadamard_index(k, n) - 1]) for k in range(size)
    )
    return WalshSpectrum(amplitudes, quadrature, duration)


def fourier_transform(
    k: int, omega: ArrayLike, duration: float = 1.0
) -> NDArray[np.complex128]:
    """Exact transform of PAL_k(t / duration) e^{i omega t} over [0, duration].

    Uses the dyadic factorization into one factor per Rademacher level, each
    written through half-angle sines and cosines so that small omega keeps full
    relative precision.
    """
    _check_order(k)
    w: NDArray[np.float64] = np.asarray(omega, dtype=float) * duration
    m: int = msb_position(k)
    result: NDArray[np.complex128] = np.ones(w.shape, dtype=complex)
    for j in range(1, m + 1):
        half: NDArray[np.float64] = w * 2.0**-j / 2.0
        if (k >> (j - 1)) & 1:
            factor = -2j * np.sin(half)
        else:
            factor = 2.0 * np.cos(half)
        result = result * factor * np.exp(1j * half)
    width: float = 2.0**-m
    tail: NDArray[np.complex128] = (
        width * np.exp(0.5j * w * width) * np.sinc(w * width / (2.0 * np.pi))
    )
    return duration * result * tail


def _check_order(k: int) -> None:
    if int(k) != k or k < 0:
        raise DomainError(f"Paley order must be a non-negative integer, got {k}")


def _check_unit(x: float) -> None:
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"Walsh argument must lie in [0, 1], got {x}")
