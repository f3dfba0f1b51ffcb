"""Tests for walsh_filter_mcp.catalog sequence families and closed forms."""

from __future__ import annotations

import math
from collections.abc import Callable

import numpy as np
import pytest

from walsh_filter_mcp.catalog import (
    amplitude_spectrum,
    bb1,
    bb1_phase,
    build,
    correction_phase,
    primitive,
    sequence_record,
    uwmf1,
    uwmf2,
    wamf03,
    wamf03_dephasing_c2,
    wamf03_first_order,
    wamf07,
    wpmf_amplitude_c2,
    wpmf_correction,
    wrse,
    wrse3_dephasing_c4,
    wrse_amplitude_filter,
    wrse_dephasing_c2,
    wrse_kappa,
)
from walsh_filter_mcp.config import CatalogSpec
from walsh_filter_mcp.control import ControlSequence, total_rotation
from walsh_filter_mcp.errors import DomainError
from walsh_filter_mcp.filters import Quadrature, filter_values, taylor_coefficient, taylor_coefficients
from walsh_filter_mcp.optimize import cost_map, find_first_order_zero
from walsh_filter_mcp.spectral import CostBand, filter_order
from walsh_filter_mcp.walsh import paley_vector


# ---------------------------------------------------------------------------
# primitive
# ---------------------------------------------------------------------------


def test_primitive_single_segment(primitive_pi: ControlSequence) -> None:
    """One segment of angle pi."""
    assert len(primitive_pi) == 1
    assert primitive_pi.segments[0].angle == pytest.approx(math.pi)
    assert total_rotation(primitive_pi)[0] == pytest.approx(math.pi)


def test_primitive_half_pi_about_y() -> None:
    """(pi / 2, pi / 2) rotates by pi / 2."""
    seq = primitive(math.pi / 2, math.pi / 2, tau=2.0)
    assert total_rotation(seq)[1] == pytest.approx(math.pi / 2)
    assert seq.segments[0].rabi == pytest.approx(math.pi / 4)


def test_primitive_rejects_non_positive_angle() -> None:
    """theta must be positive."""
    with pytest.raises(DomainError, match="positive"):
        primitive(0.0)


# ---------------------------------------------------------------------------
# wamf03 / wamf07
# ---------------------------------------------------------------------------


def test_wamf03_dcg_not_angles(dcg_not: ControlSequence) -> None:
    """(3pi, pi) gives segment angles (pi, pi / 2, pi / 2, pi)."""
    np.testing.assert_allclose(
        dcg_not.angles, [math.pi, math.pi / 2, math.pi / 2, math.pi], rtol=1e-14
    )


def test_wamf03_without_x3_is_uniform() -> None:
    """(c, 0) is a uniform primitive of angle c."""
    seq = wamf03(2.0, 0.0)
    np.testing.assert_allclose(seq.rabi_rates, 2.0)
    assert len(seq.coalesced()) == 1


def test_wamf03_sign_switching_allowed() -> None:
    """X3 > X0 gives negative middle segments."""
    seq = wamf03(math.pi, 2 * math.pi)
    assert [s.sign for s in seq.segments] == [1, -1, -1, 1]


def test_wamf03_duration_scaling() -> None:
    """Durations sum to the requested tau."""
    seq = wamf03(3 * math.pi, math.pi, tau=2.5)
    assert seq.duration == pytest.approx(2.5, rel=1e-12)
    assert total_rotation(seq)[0] == pytest.approx(3 * math.pi)


@pytest.mark.parametrize("amplitudes", [(3.0, 1.0, 0.4, -0.7), (9.4, -2.2, 1.3, 0.0)])
def test_wamf07_is_palindromic(amplitudes: tuple[float, float, float, float]) -> None:
    """Envelopes over Paley orders 0, 3, 5, 6 are symmetric in time."""
    rates = [s.signed_rabi for s in wamf07(*amplitudes).segments]
    assert len(rates) == 8
    np.testing.assert_allclose(rates, rates[::-1], rtol=1e-14)


def test_wamf07_x0_only_is_uniform() -> None:
    """X0 alone gives eight equal segments."""
    np.testing.assert_allclose(wamf07(3 * math.pi).rabi_rates, 3 * math.pi)


@pytest.mark.parametrize(("x0", "x3"), [(2.5 * math.pi, 0.3 * math.pi), (3.3 * math.pi, 1.7 * math.pi)])
def test_wamf03_c2_closed_form_matches_fit(x0: float, x3: float) -> None:
    """Analytic C_2^(z) agrees with the fitted coefficient."""
    assert taylor_coefficient(wamf03(x0, x3), Quadrature.DEPHASING, 1) == pytest.approx(
        wamf03_dephasing_c2(x0, x3), rel=1e-6
    )


def test_wamf03_c2_vanishes_at_dcg_not() -> None:
    """The closed form is zero at (3pi, pi)."""
    assert abs(wamf03_first_order(3 * math.pi, math.pi)) < 1e-15


def test_wamf03_closed_form_singularity() -> None:
    """|X0| = |X3| has no closed form."""
    with pytest.raises(DomainError, match="singular"):
        wamf03_first_order(math.pi, -math.pi)


# ---------------------------------------------------------------------------
# wpmf_correction / bb1
# ---------------------------------------------------------------------------


def test_correction_phase_examples() -> None:
    """SK1 and P2 use arccos(-1/8); k = 1 at pi uses arccos(-1/4)."""
    assert correction_phase(1, math.pi / 2) == pytest.approx(math.acos(-1 / 8))
    assert correction_phase(3, math.pi) == pytest.approx(math.acos(-1 / 8))
    assert correction_phase(1, math.pi) == pytest.approx(1.8235, abs=1e-4)


def test_correction_phase_out_of_domain() -> None:
    """theta beyond 2pi M(k) has no arccos."""
    with pytest.raises(DomainError, match="arccos"):
        correction_phase(1, 5 * math.pi)


@pytest.mark.parametrize("theta", [math.pi / 4, math.pi / 2, math.pi])
@pytest.mark.parametrize("k", [1, 3])
def test_wpmf_correction_is_first_order_amplitude_filter(k: int, theta: float) -> None:
    """SK1 and P2 cancel C_2^(Omega) but keep a nonzero C_4^(Omega)."""
    seq = wpmf_correction(k, theta)
    c2, c4 = taylor_coefficients(seq, Quadrature.AMPLITUDE, kmax=2)
    assert abs(c2) < 1e-8
    assert c4 > 1e-6
    assert wpmf_amplitude_c2(k, theta, correction_phase(k, theta)) == pytest.approx(0.0, abs=1e-12)


def test_wpmf_correction_structure() -> None:
    """Target pulse first, then M(k) identities phased by Y_k PAL_k."""
    seq = wpmf_correction(3, math.pi, tau=2.0)
    assert len(seq) == 5
    assert seq.label == "wpmf_correction_3"
    assert seq.duration == pytest.approx(2.0, rel=1e-12)
    assert seq.segments[0].angle == pytest.approx(math.pi)
    y = correction_phase(3, math.pi)
    phases = [s.phase for s in seq.segments[1:]]
    expected = [(p * y) % (2 * math.pi) for p in paley_vector(3, 2)]
    np.testing.assert_allclose(phases, expected, rtol=1e-12)
    np.testing.assert_allclose([s.angle for s in seq.segments[1:]], 2 * math.pi, rtol=1e-12)
    assert total_rotation(seq)[1] == pytest.approx(math.pi)


def test_bb1_phase_and_segments() -> None:
    """BB1 at pi uses arccos(-1/4) and four segments."""
    assert bb1_phase(math.pi) == pytest.approx(math.acos(-0.25))
    seq = bb1(math.pi)
    assert len(seq) == 4
    np.testing.assert_allclose(seq.angles, [math.pi, math.pi, 2 * math.pi, math.pi], rtol=1e-12)
    assert seq.duration == pytest.approx(1.0, rel=1e-12)
    assert total_rotation(seq)[1] == pytest.approx(math.pi)


@pytest.mark.parametrize("theta", [math.pi / 4, math.pi / 2, math.pi])
def test_bb1_is_first_order_amplitude_filter(theta: float) -> None:
    """C_2^(Omega) vanishes and C_4^(Omega) does not."""
    c2, c4 = taylor_coefficients(bb1(theta), Quadrature.AMPLITUDE, kmax=2)
    assert abs(c2) < 1e-8
    assert c4 > 1e-6


# ---------------------------------------------------------------------------
# wrse
# ---------------------------------------------------------------------------


def test_wrse1_is_rotary_echo() -> None:
    """WRSE_1 has two opposite segments."""
    seq = wrse(1, 4 * math.pi)
    assert len(seq) == 2
    assert [s.sign for s in seq.segments] == [1, -1]


@pytest.mark.parametrize("k", [1, 2, 3, 5, 7, 12])
def test_wrse_has_zero_net_rotation(k: int) -> None:
    """Theta = 0 for every k."""
    assert total_rotation(wrse(k, 3.3 * math.pi))[0] == pytest.approx(0.0, abs=1e-12)
    assert len(wrse(k, 1.0)) == 2 ** k.bit_length()


def test_wrse_rejects_order_zero() -> None:
    """k must be at least 1."""
    with pytest.raises(DomainError, match="k >= 1"):
        wrse(0, 1.0)


def test_wrse_kappa() -> None:
    """kappa adds one when k is a power of two."""
    assert [wrse_kappa(k) for k in (1, 2, 3, 5, 7)] == [2, 3, 2, 3, 3]


@pytest.mark.parametrize("omega0", [2 * math.pi, 5 * math.pi, 10 * math.pi])
def test_wrse3_c2_closed_form(omega0: float) -> None:
    """C_2^(z) of WRSE_3 is sinc^2(Omega_0 / 4)."""
    assert taylor_coefficient(wrse(3, omega0), Quadrature.DEPHASING, 1) == pytest.approx(
        wrse_dephasing_c2(3, omega0), abs=1e-6
    )


def test_wrse3_c4_closed_form_values() -> None:
    """C_4 at 4 pi q is (1 - (-1)^q) / (8 q^2 pi^2); at zero it is -1/12."""
    for q in (1, 2, 3, 4):
        expected = (1 - (-1) ** q) / (8 * q * q * math.pi**2)
        assert wrse3_dephasing_c4(4 * math.pi * q) == pytest.approx(expected, abs=1e-12)
    assert wrse3_dephasing_c4(0.0) == pytest.approx(-1 / 12)


def test_wrse3_c4_matches_fit() -> None:
    """At Omega_0 = 4pi the fitted C_4^(z) equals 1 / (4 pi^2)."""
    c2, c4 = taylor_coefficients(wrse(3, 4 * math.pi), Quadrature.DEPHASING, kmax=2)
    assert abs(c2) < 1e-8
    assert c4 == pytest.approx(1 / (4 * math.pi**2), rel=1e-4)


@pytest.mark.parametrize(("omega0", "slope"), [(2 * math.pi, 2.0), (4 * math.pi, 4.0), (8 * math.pi, 6.0)])
def test_wrse3_dephasing_slopes(omega0: float, slope: float) -> None:
    """F_z slopes 2, 4 and 6 at Omega_0 = 2pi, 4pi and 8pi."""
    estimate = filter_order(wrse(3, omega0), Quadrature.DEPHASING, (1e-4, 1e-2))
    assert estimate.slope == pytest.approx(slope, abs=0.2)


def test_wrse3_dephasing_is_at_most_second_order() -> None:
    """No drive strength up to 32pi lifts the F_z slope of WRSE_3 to 8."""
    slopes = {
        q: filter_order(wrse(3, q * math.pi / 2), Quadrature.DEPHASING, (1e-4, 1e-2)).slope
        for q in range(4, 65)
    }
    assert max(slopes.values()) < 7.8
    for q in (16, 32, 48, 64):
        assert slopes[q] == pytest.approx(6.0, abs=0.2)


@pytest.mark.parametrize("k", [1, 3, 7, 15, 31])
def test_wrse_amplitude_slopes(k: int) -> None:
    """F_Omega rises with slope 2 (r(k) + 1)."""
    estimate = filter_order(wrse(k, 2 * math.pi), Quadrature.AMPLITUDE, (1e-2, 1e-1))
    assert estimate.slope == pytest.approx(2 * (bin(k).count("1") + 1), abs=0.2)


def test_wrse_amplitude_filter_closed_form() -> None:
    """The transform-based F_Omega equals the numeric control vector result."""
    omega = np.array([0.5, 3.0, 20.0])
    np.testing.assert_allclose(
        filter_values(wrse(5, 3 * math.pi, tau=1.5), Quadrature.AMPLITUDE, omega),
        wrse_amplitude_filter(5, 3 * math.pi, omega, tau=1.5),
        rtol=1e-9,
    )


# ---------------------------------------------------------------------------
# uwmf1 / uwmf2
# ---------------------------------------------------------------------------


def test_uwmf1_structure() -> None:
    """Nine segments, each SK1 block lasting its WAMF pulse's duration."""
    seq = uwmf1(3 * math.pi, math.pi, tau=2.0)
    assert len(seq) == 9
    assert seq.duration == pytest.approx(2.0, rel=1e-12)
    blocks = seq.boundaries[[0, 3, 6, 9]]
    np.testing.assert_allclose(np.diff(blocks), [0.5, 1.0, 0.5], rtol=1e-12)
    assert total_rotation(seq)[1] == pytest.approx(math.pi)


def test_uwmf2_target_ratio() -> None:
    """Target pulses keep tau_1 : tau_4 : tau_7 = 1 : 2 : 1."""
    seq = uwmf2(3 * math.pi, math.pi)
    assert len(seq) == 9
    assert seq.duration == pytest.approx(1.0, rel=1e-12)
    t1, t4, t7 = (seq.segments[i].duration for i in (0, 3, 6))
    assert t4 / t1 == pytest.approx(2.0, rel=1e-12)
    assert t7 / t1 == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("builder", [uwmf1, uwmf2])
def test_uwmf_requires_positive_sums(builder: Callable[..., ControlSequence]) -> None:
    """X0 - X3 must be positive."""
    with pytest.raises(DomainError, match="X0 - X3"):
        builder(math.pi, 2 * math.pi)


@pytest.mark.parametrize("builder", [uwmf1, uwmf2])
def test_uwmf_tuned_filters_both_quadratures(builder: Callable[..., ControlSequence]) -> None:
    """After tuning X3 at X0 = 3pi both F_z and F_Omega rise with slope 4."""
    x3 = find_first_order_zero(lambda x: builder(3 * math.pi, x), (0.5 * math.pi, 1.5 * math.pi))
    seq = builder(3 * math.pi, x3)
    for quadrature in Quadrature:
        estimate = filter_order(seq, quadrature, (1e-4, 1e-2))
        assert estimate.slope >= 4.0 - 0.2


@pytest.mark.parametrize(
    ("x0", "x3_range"),
    [(3 * math.pi, (0.8 * math.pi, 1.2 * math.pi)), (2.5 * math.pi, (0.5 * math.pi, 0.8 * math.pi))],
)
def test_uwmf2_cost_minimum_tracks_wamf03(x0: float, x3_range: tuple[float, float]) -> None:
    """Concatenating SK1 with the 1:2:1 timing keeps the WAMF_{0,3} tuning."""
    ys = np.linspace(*x3_range, 31)
    band = CostBand(1e-4, 1e-2, points_per_decade=200)
    minima = [
        cost_map(family, {}, ("X0", [x0]), ("X3", ys), band).minimum()[1]
        for family in ("wamf03", "uwmf2")
    ]
    assert minima[1] == pytest.approx(minima[0], abs=0.02 * math.pi)


# ---------------------------------------------------------------------------
# build / amplitude_spectrum / sequence_record
# ---------------------------------------------------------------------------


def test_build_from_symbolic_spec(dcg_not: ControlSequence) -> None:
    """String parameters with pi multiples build the same sequence."""
    spec = CatalogSpec.model_validate({"family": "wamf03", "params": {"X0": "3pi", "X3": "pi"}})
    assert build(spec) == dcg_not


def test_build_integer_parameter_check() -> None:
    """k must be integral."""
    spec = CatalogSpec(family="wrse", params={"k": 1.5, "Omega0": 1.0})
    with pytest.raises(DomainError, match="integer"):
        build(spec)


def test_amplitude_spectrum_for_wamf07() -> None:
    """wamf07 exposes its Paley amplitudes."""
    spec = CatalogSpec(family="wamf07", params={"X0": 3.0, "X5": 0.5}, tau=2.0)
    spectrum = amplitude_spectrum(spec)
    assert spectrum.amplitudes == (3.0, 0.0, 0.0, 0.0, 0.0, 0.5, 0.0)
    assert spectrum.duration == 2.0


def test_amplitude_spectrum_rejects_other_families() -> None:
    """Only Walsh amplitude families have a spectrum."""
    with pytest.raises(DomainError, match="no Walsh amplitude spectrum"):
        amplitude_spectrum(CatalogSpec(family="bb1", params={"theta": 1.0}))


def test_sequence_record(dcg_not: ControlSequence) -> None:
    """The record carries rotations and the segment table."""
    record = sequence_record(dcg_not)
    assert record["label"] == "wamf03"
    assert record["total_rotation"] == pytest.approx(3 * math.pi)
    assert record["effective_rotation"] == pytest.approx(math.pi)
    assert [row["tau"] for row in record["segments"]] == pytest.approx([0.25] * 4)
