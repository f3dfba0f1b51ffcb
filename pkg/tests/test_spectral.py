"""Tests for walsh_filter_mcp.spectral cost, filter order and infidelity overlap."""

from __future__ import annotations

import math

import numpy as np
import pytest

from walsh_filter_mcp.catalog import wamf03, wrse
from walsh_filter_mcp.control import ControlSequence, sequence_from_arrays
from walsh_filter_mcp.errors import DivergenceWarning, DomainError, PoorFitWarning
from walsh_filter_mcp.filters import Quadrature, filter_functions, frequency_grid
from walsh_filter_mcp.simulate import NoiseModel
from walsh_filter_mcp.spectral import (
    CostBand,
    band_integral,
    cost,
    cost_record,
    filter_order,
    instantaneous_order,
    predicted_infidelity,
)


# ---------------------------------------------------------------------------
# CostBand / band_integral
# ---------------------------------------------------------------------------


def test_cost_band_rejects_reversed_edges() -> None:
    """omega_low must sit below omega_high."""
    with pytest.raises(DomainError, match="omega_low"):
        CostBand(1.0, 0.5)


def test_cost_band_rejects_sparse_grid() -> None:
    """Fewer than 200 points per decade is refused."""
    with pytest.raises(DomainError, match="200"):
        CostBand(1e-3, 1.0, points_per_decade=100)


def test_cost_band_coerces_quadrature() -> None:
    """A plain string quadrature becomes the enum."""
    assert CostBand(0.0, 1.0, "omega").quadrature is Quadrature.AMPLITUDE


def test_band_integral_of_constant() -> None:
    """A constant c integrates to c (b - a)."""
    value = band_integral(lambda w: np.full_like(w, 3.0), 0.5, 4.0)
    assert value == pytest.approx(10.5, rel=1e-8)


def test_band_integral_of_quadratic() -> None:
    """omega^2 over [0, 1] integrates to 1 / 3, the piece below the split included."""
    assert band_integral(lambda w: w**2, 0.0, 1.0) == pytest.approx(1 / 3, rel=1e-5)


def test_band_integral_divergent_tail() -> None:
    """A 1 / omega^2 integrand down to zero diverges with a warning."""
    with pytest.warns(DivergenceWarning, match="diverges"):
        value = band_integral(lambda w: 1.0 / w**2, 0.0, 1.0)
    assert value == math.inf


# ---------------------------------------------------------------------------
# cost
# ---------------------------------------------------------------------------


def test_cost_of_square_pulse_amplitude(primitive_pi: ControlSequence) -> None:
    """F_Omega = pi^2 sin^2(omega / 2) integrates to pi^2 (x - sin x) / 2."""
    value = cost(primitive_pi, CostBand(0.0, 1.0, Quadrature.AMPLITUDE))
    assert value == pytest.approx(math.pi**2 * (1.0 - math.sin(1.0)) / 2.0, rel=1e-5)


def test_dcg_not_beats_primitive(
    primitive_pi: ControlSequence, dcg_not: ControlSequence
) -> None:
    """Over [1e-9, 1e-1] the corrected NOT costs under 1e-3 of the primitive."""
    band = CostBand(1e-9, 1e-1)
    assert cost(dcg_not, band) / cost(primitive_pi, band) < 1e-3


def test_cost_is_additive_over_bands(dcg_not: ControlSequence) -> None:
    """A over [a, c] equals A over [a, b] plus A over [b, c]."""
    whole = cost(dcg_not, CostBand(1e-3, 10.0))
    parts = cost(dcg_not, CostBand(1e-3, 1e-1)) + cost(dcg_not, CostBand(1e-1, 10.0))
    assert whole == pytest.approx(parts, rel=1e-10)


def test_cost_grid_refinement(dcg_not: ControlSequence) -> None:
    """Doubling the grid density moves A by less than 1e-4."""
    coarse = cost(dcg_not, CostBand(1e-2, 1.0, points_per_decade=1000))
    fine = cost(dcg_not, CostBand(1e-2, 1.0, points_per_decade=2000))
    assert coarse == pytest.approx(fine, rel=1e-4)


def test_cost_decreases_towards_the_corrected_amplitude() -> None:
    """At X0 = 3pi, X3 = pi costs less than X3 offset by 0.2 pi."""
    band = CostBand(1e-2, 1.0)
    tuned = cost(wamf03(3 * math.pi, math.pi), band)
    assert tuned < cost(wamf03(3 * math.pi, 1.2 * math.pi), band)
    assert tuned < cost(wamf03(3 * math.pi, 0.8 * math.pi), band)


def test_cost_record_fields(primitive_pi: ControlSequence) -> None:
    """cost_record reports the band and quadrature."""
    record = cost_record(primitive_pi, CostBand(1e-2, 1.0, Quadrature.AMPLITUDE))
    assert record["quadrature"] == "omega"
    assert record["omega_low"] == 1e-2
    assert record["cost"] > 0


# ---------------------------------------------------------------------------
# filter_order / instantaneous_order
# ---------------------------------------------------------------------------


def test_primitive_is_order_zero(primitive_pi: ControlSequence) -> None:
    """Slope 2, order 0."""
    estimate = filter_order(primitive_pi, Quadrature.DEPHASING, (1e-4, 1e-2))
    assert estimate.slope == pytest.approx(2.0, abs=0.1)
    assert estimate.order == pytest.approx(0.0, abs=0.05)
    assert not estimate.poor_fit


def test_dcg_not_is_order_one(dcg_not: ControlSequence) -> None:
    """Slope 4, order 1."""
    estimate = filter_order(dcg_not, Quadrature.DEPHASING, (1e-4, 1e-2))
    assert estimate.slope == pytest.approx(4.0, abs=0.1)
    assert estimate.order == pytest.approx(1.0, abs=0.05)


def test_wrse7_amplitude_slope() -> None:
    """WRSE_7 has r(7) = 3, so F_Omega rises with slope 8."""
    estimate = filter_order(wrse(7, 2 * math.pi), Quadrature.AMPLITUDE, (1e-3, 1e-1))
    assert estimate.slope == pytest.approx(8.0, abs=0.2)


def test_poor_fit_is_flagged() -> None:
    """An oscillating band yields a residual above 0.1 decades and a warning."""
    with pytest.warns(PoorFitWarning, match="residual"):
        estimate = filter_order(wrse(1, 2 * math.pi), Quadrature.AMPLITUDE, (1.0, 1000.0))
    assert estimate.poor_fit
    record = estimate.to_record()
    assert record["poor_fit"] is True
    assert record["quadrature"] == "omega"


def test_instantaneous_order_of_primitive(primitive_pi: ControlSequence) -> None:
    """The local order of a square pulse stays at zero well inside the stopband."""
    orders = instantaneous_order(primitive_pi, Quadrature.DEPHASING, np.geomspace(1e-4, 1e-2, 21))
    np.testing.assert_allclose(orders, 0.0, atol=0.01)


def test_instantaneous_order_needs_two_points(primitive_pi: ControlSequence) -> None:
    """A single frequency has no slope."""
    with pytest.raises(DomainError):
        instantaneous_order(primitive_pi, Quadrature.DEPHASING, [1e-3])


# ---------------------------------------------------------------------------
# predicted_infidelity
# ---------------------------------------------------------------------------


def test_zero_noise_predicts_zero(primitive_pi: ControlSequence) -> None:
    """S = 0 gives no infidelity."""
    assert predicted_infidelity(primitive_pi, [NoiseModel(amplitude=0.0)]) == 0.0


def test_static_dephasing_limit() -> None:
    """With no rotation, slow dephasing gives <a_1^2> = sigma^2 tau^2."""
    idle = sequence_from_arrays([1e-9], [1.0])
    model = NoiseModel(amplitude=1.0, omega_low=1e-4, omega_high=1e-2)
    assert predicted_infidelity(idle, [model]) == pytest.approx(model.total_power(), rel=1e-4)


def test_prediction_from_samples_matches_sequence(dcg_not: ControlSequence) -> None:
    """A sampled grid covering the band gives the same overlap."""
    model = NoiseModel(amplitude=0.5, omega_low=1e-2, omega_high=10.0)
    samples = filter_functions(dcg_not, frequency_grid(1e-2, 10.0, 1000))
    assert predicted_infidelity(samples, [model]) == pytest.approx(
        predicted_infidelity(dcg_not, [model]), rel=1e-10
    )


def test_prediction_sums_quadratures(primitive_pi: ControlSequence) -> None:
    """Dephasing and amplitude overlaps add."""
    z = NoiseModel(amplitude=0.1, omega_low=1e-2, omega_high=5.0)
    a = NoiseModel(quadrature="omega", amplitude=0.2, omega_low=1e-2, omega_high=5.0)
    total = predicted_infidelity(primitive_pi, [z, a])
    parts = predicted_infidelity(primitive_pi, [z]) + predicted_infidelity(primitive_pi, [a])
    assert total == pytest.approx(parts, rel=1e-12)


def test_truncated_grid_warns(primitive_pi: ControlSequence) -> None:
    """A grid ending before the PSD band does flags divergence."""
    model = NoiseModel(amplitude=1.0, omega_low=1e-3, omega_high=20.0)
    samples = filter_functions(primitive_pi, np.geomspace(1e-3, 1.0, 100))
    with pytest.warns(DivergenceWarning, match="grid edges"):
        predicted_infidelity(samples, [model])
