"""Tests for walsh_filter_mcp.control segments, propagators and history matrices."""

from __future__ import annotations

import math

import numpy as np
import pytest

from walsh_filter_mcp.control import (
    PAULI,
    ControlSequence,
    Segment,
    cumulative_operators,
    cumulative_stack,
    history_matrices,
    history_matrix,
    ideal_unitary,
    segment_unitary,
    sequence_from_arrays,
    total_rotation,
)
from walsh_filter_mcp.errors import DomainError, SpecError


# ---------------------------------------------------------------------------
# Segment
# ---------------------------------------------------------------------------


def test_negative_rabi_is_normalized() -> None:
    """A negative Rabi rate becomes |Omega| with phase + pi and sign -1."""
    s = Segment(-2.0, 0.5, 0.0)
    assert s.rabi == 2.0
    assert s.phase == pytest.approx(math.pi)
    assert s.sign == -1
    assert s.signed_rabi == -2.0
    assert s.signed_angle == -1.0
    assert s.base_phase == pytest.approx(0.0)


def test_phase_wraps_into_two_pi() -> None:
    """Phases are stored modulo 2 pi."""
    assert Segment(1.0, 1.0, -math.pi / 2).phase == pytest.approx(1.5 * math.pi)


def test_angle_is_rabi_times_duration() -> None:
    """theta = Omega tau."""
    assert Segment(4.0, 0.25).angle == 1.0


@pytest.mark.parametrize("duration", [0.0, -1.0])
def test_non_positive_duration_rejected(duration: float) -> None:
    """Segment durations must be positive."""
    with pytest.raises(DomainError, match="duration"):
        Segment(1.0, duration)


def test_non_finite_rabi_rejected() -> None:
    """NaN Rabi rates are rejected."""
    with pytest.raises(DomainError, match="finite"):
        Segment(math.nan, 1.0)


# ---------------------------------------------------------------------------
# ControlSequence
# ---------------------------------------------------------------------------


def test_empty_sequence_rejected() -> None:
    """A sequence needs a segment."""
    with pytest.raises(DomainError):
        ControlSequence(())


def test_boundaries_and_duration(dcg_not: ControlSequence) -> None:
    """Four quarter segments end at 1."""
    np.testing.assert_allclose(dcg_not.boundaries, [0.0, 0.25, 0.5, 0.75, 1.0])
    assert dcg_not.duration == pytest.approx(1.0)
    assert len(dcg_not) == 4


def test_from_table_scales_by_duration() -> None:
    """omega is an angle and tau a fraction of the total duration."""
    seq = ControlSequence.from_table(
        [{"omega": math.pi, "tau": 0.5}, {"omega": math.pi, "tau": 0.5, "phi": math.pi / 2}],
        duration=2.0,
    )
    assert seq.duration == pytest.approx(2.0)
    assert seq.segments[0].rabi == pytest.approx(math.pi / 2)
    assert seq.segments[0].duration == pytest.approx(1.0)
    assert seq.segments[1].phase == pytest.approx(math.pi / 2)


def test_from_table_missing_key() -> None:
    """Rows without tau raise SpecError naming the key."""
    with pytest.raises(SpecError, match="tau") as excinfo:
        ControlSequence.from_table([{"omega": 1.0}])
    assert excinfo.value.key == "tau"


def test_from_table_unknown_key() -> None:
    """Unexpected keys raise SpecError."""
    with pytest.raises(SpecError, match="unknown key 'amp'"):
        ControlSequence.from_table([{"omega": 1.0, "tau": 1.0, "amp": 2.0}])


def test_to_table_keeps_signed_values() -> None:
    """to_table reports signed angles and the phase before normalization."""
    seq = sequence_from_arrays([2.0, -2.0], [0.5, 0.5], [0.3, 0.3])
    rows = seq.to_table()
    assert rows[1]["omega"] == pytest.approx(-2.0)
    assert rows[1]["tau"] == pytest.approx(0.5)
    assert rows[1]["phi"] == pytest.approx(0.3)
    rebuilt = ControlSequence.from_table(rows, duration=seq.duration)
    np.testing.assert_allclose(ideal_unitary(rebuilt), ideal_unitary(seq), atol=1e-14)


def test_coalesced_merges_equal_neighbours() -> None:
    """Consecutive segments with equal drive merge into one."""
    seq = sequence_from_arrays([1.0, 1.0, 2.0, 1.0], [0.25] * 4)
    merged = seq.coalesced()
    assert len(merged) == 3
    assert merged.segments[0].duration == pytest.approx(0.5)
    np.testing.assert_allclose(ideal_unitary(merged), ideal_unitary(seq), atol=1e-14)


def test_coalesced_keeps_opposite_signs_apart() -> None:
    """+Omega and -Omega segments are not merged."""
    seq = sequence_from_arrays([1.0, -1.0], [0.5, 0.5])
    assert len(seq.coalesced()) == 2


def test_coalesced_merges_across_phase_wrap() -> None:
    """Phases just below 2*pi and at 0 are the same axis and merge."""
    seq = ControlSequence((Segment(1.0, 0.5, -1e-13), Segment(1.0, 0.5, 0.0)))
    assert seq.segments[0].phase > 6.28
    merged = seq.coalesced()
    assert len(merged) == 1
    assert merged.segments[0].duration == pytest.approx(1.0)


def test_concatenate_joins_labels(primitive_pi: ControlSequence) -> None:
    """Concatenation appends segments and joins labels with '+'."""
    joined = primitive_pi.concatenate(primitive_pi)
    assert len(joined) == 2
    assert joined.label == "primitive+primitive"
    assert joined.duration == pytest.approx(2.0)


def test_sequence_from_arrays_length_mismatch() -> None:
    """Parallel arrays must have equal lengths."""
    with pytest.raises(DomainError, match="durations"):
        sequence_from_arrays([1.0, 2.0], [1.0])


# ---------------------------------------------------------------------------
# Propagators
# ---------------------------------------------------------------------------


def test_segment_unitary_pi_about_x() -> None:
    """A pi rotation about x is -i sigma_x."""
    np.testing.assert_allclose(
        segment_unitary(Segment(math.pi, 1.0)), -1j * PAULI[0], atol=1e-15
    )


def test_segment_unitary_about_y() -> None:
    """phi = pi / 2 rotates about y."""
    u = segment_unitary(Segment(math.pi, 1.0, math.pi / 2))
    np.testing.assert_allclose(u, -1j * PAULI[1], atol=1e-15)


def test_cumulative_operators_start_at_identity(dcg_not: ControlSequence) -> None:
    """Q_0 = I and there are n + 1 cumulative operators."""
    ops = cumulative_operators(dcg_not)
    assert len(ops) == 5
    np.testing.assert_allclose(ops[0], np.eye(2))


def test_cumulative_operators_are_unitary(dcg_not: ControlSequence) -> None:
    """Every Q_l is unitary to machine precision."""
    for q in cumulative_stack(dcg_not):
        np.testing.assert_allclose(q @ q.conj().T, np.eye(2), atol=1e-14)


def test_ideal_unitary_of_dcg_not(dcg_not: ControlSequence) -> None:
    """Net 3pi about x gives +i sigma_x."""
    np.testing.assert_allclose(ideal_unitary(dcg_not), 1j * PAULI[0], atol=1e-14)


def test_total_rotation(dcg_not: ControlSequence) -> None:
    """Theta = 3 pi, effective pi."""
    theta, effective = total_rotation(dcg_not)
    assert theta == pytest.approx(3 * math.pi)
    assert effective == pytest.approx(math.pi)


# ---------------------------------------------------------------------------
# History matrices
# ---------------------------------------------------------------------------


def test_history_matrix_identity() -> None:
    """Lambda(I) = I."""
    np.testing.assert_allclose(history_matrix(np.eye(2, dtype=complex)), np.eye(3), atol=1e-15)


def test_history_matrix_pi_about_x() -> None:
    """A pi rotation about x flips y and z."""
    np.testing.assert_allclose(
        history_matrix(-1j * PAULI[0]), np.diag([1.0, -1.0, -1.0]), atol=1e-15
    )


def test_history_matrices_are_rotations() -> None:
    """Lambda is orthogonal with unit determinant."""
    seq = sequence_from_arrays([3.0, -1.2, 5.5], [0.3, 0.4, 0.3], [0.2, 1.7, 4.0])
    for lam in history_matrices(cumulative_stack(seq)):
        np.testing.assert_allclose(lam @ lam.T, np.eye(3), atol=1e-13)
        assert np.linalg.det(lam) == pytest.approx(1.0, abs=1e-13)
