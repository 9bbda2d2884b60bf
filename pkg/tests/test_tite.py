"""Follow-up weighting, effective counts, and the suspension rule."""

from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skbd.tite import (
    PatientRecord,
    effective_counts,
    effective_data,
    escalation_permitted,
    follow_up_weight,
)

TAU = 3.0
INF = math.inf


def patient(dlt, dlt_time, followup, dose=0, enroll=0.0):
    return PatientRecord(
        dose_index=dose, enroll_time=enroll, dlt=dlt, dlt_time=dlt_time, followup=followup
    )


class TestFollowUpWeight:
    def test_ascertained_dlt_full_weight(self):
        assert follow_up_weight(patient(True, 1.0, 1.0), TAU) == 1.0

    def test_pending_fractional(self):
        assert follow_up_weight(patient(False, INF, 1.5), TAU) == pytest.approx(0.5)

    def test_no_followup_no_information(self):
        assert follow_up_weight(patient(False, INF, 0.0), TAU) == 0.0

    def test_completed_window_full_weight(self):
        assert follow_up_weight(patient(False, INF, TAU), TAU) == 1.0

    def test_pending_dlt_not_yet_seen(self):
        # Latent DLT at 2.5 months with only 1 month of follow-up is pending.
        assert follow_up_weight(patient(True, 2.5, 1.0), TAU) == pytest.approx(1 / 3)

    def test_followup_beyond_window_rejected(self):
        with pytest.raises(ValueError):
            follow_up_weight(patient(False, INF, 3.5), TAU)

    @given(
        u=st.floats(0.0, TAU),
        scale=st.floats(0.1, 10.0),
    )
    @settings(max_examples=100, deadline=None)
    def test_time_unit_invariance(self, u, scale):
        w1 = follow_up_weight(patient(False, INF, u), TAU)
        w2 = follow_up_weight(patient(False, INF, u * scale), TAU * scale)
        assert w1 == pytest.approx(w2, abs=1e-12)


class TestEffectiveCounts:
    def test_mixed_cohort(self):
        group = [
            patient(True, 0.5, 1.5),    # observed DLT
            patient(False, INF, TAU),   # completed, no DLT
            patient(False, INF, 1.5),   # pending, half window
        ]
        counts = effective_counts(group, TAU)
        assert counts.y_eff == pytest.approx(1.0)
        assert counts.n_eff == pytest.approx(2.5)

    def test_complete_data_reduction(self):
        group = [patient(True, 1.0, TAU), patient(True, 2.0, TAU)] + [
            patient(False, INF, TAU) for _ in range(4)
        ]
        counts = effective_counts(group, TAU)
        assert counts == (2.0, 6.0)

    def test_three_pending(self):
        group = [patient(False, INF, 1.0) for _ in range(3)]
        counts = effective_counts(group, TAU)
        assert counts.y_eff == 0.0
        assert counts.n_eff == pytest.approx(1.0)

    @given(
        records=st.lists(
            st.tuples(
                st.booleans(),
                st.floats(0.01, TAU),
                st.floats(0.0, TAU),
            ),
            min_size=1,
            max_size=12,
        )
    )
    @settings(max_examples=200, deadline=None)
    def test_bounds_and_monotone_followup(self, records):
        group = [
            patient(dlt, t if dlt else INF, u) for dlt, t, u in records
        ]
        counts = effective_counts(group, TAU)
        assert 0.0 <= counts.y_eff <= counts.n_eff <= len(group) + 1e-12
        # More follow-up never reduces the effective sample size.
        grown = [
            patient(p.dlt, p.dlt_time, min(TAU, p.followup + 0.5)) for p in group
        ]
        counts2 = effective_counts(grown, TAU)
        assert counts2.n_eff >= counts.n_eff - 1e-12


class TestSuspension:
    def test_one_completed_suppresses(self):
        group = [
            patient(False, INF, TAU),
            patient(False, INF, 1.0),
            patient(False, INF, 0.5),
        ]
        assert not escalation_permitted(group, TAU)

    def test_two_completed_permits(self):
        group = [
            patient(False, INF, TAU),
            patient(True, 0.5, 1.0),  # observed DLT counts as ascertained
            patient(False, INF, 0.5),
        ]
        assert escalation_permitted(group, TAU)

    def test_empty_dose(self):
        assert not escalation_permitted([], TAU)


class TestEffectiveData:
    def test_grid_layout(self):
        group = [
            patient(True, 0.5, 1.5, dose=0),
            patient(False, INF, TAU, dose=0),
            patient(False, INF, 1.5, dose=2),
        ]
        data = effective_data(group, 4, TAU)
        assert data.n == pytest.approx((2.0, 0.0, 0.5, 0.0))
        assert data.y == pytest.approx((1.0, 0.0, 0.0, 0.0))
