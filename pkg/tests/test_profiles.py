import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from ppm_qrf.metrics import EmptyInput
from ppm_qrf.profiles import (
    NonFiniteInput, ProfileThresholds, TooFewInstances, UncertaintyProfile, assign_profile, assign_profiles,
    calibrate_thresholds, per_profile_report, write_assignments,
)

LOW, MEDIUM, HIGH = UncertaintyProfile
REFERENCE_CUTS = ProfileThresholds(1.1847, 1.7973)
rwidth_vectors = arrays(float, st.integers(4, 200), elements=st.floats(0, 20))


class TestCalibration:
    def test_exact_ranks(self):
        t = calibrate_thresholds([5, 3, 1, 4, 2])
        assert (t.low_cut, t.high_cut, t.n_calibration) == (2.0, 4.0, 5)

    def test_interpolated_ranks(self):
        t = calibrate_thresholds([1, 2, 3, 4])
        assert (t.low_cut, t.high_cut) == (1.75, 3.25)

    def test_errors(self):
        with pytest.raises(TooFewInstances):
            calibrate_thresholds([1, 2, 3])
        with pytest.raises(NonFiniteInput):
            calibrate_thresholds([1, 2, 3, math.nan])
        with pytest.raises(ValueError):
            calibrate_thresholds([1, 2, 3, 4], p_low=80, p_high=20)

    def test_json_round_trip(self):
        t = calibrate_thresholds([0.3, 1.2, 2.2, 0.9, 1.7])
        sink = io.StringIO()
        t.dump(sink)
        doc = json.loads(sink.getvalue())
        assert set(doc) == {"low_cut", "high_cut", "p_low", "p_high", "n_calibration"}
        assert ProfileThresholds.from_dict(doc) == t

    @given(rwidth_vectors)
    def test_idempotent(self, r):
        assert calibrate_thresholds(r) == calibrate_thresholds(r.copy())

    @given(rwidth_vectors)
    def test_self_consistency(self, r):
        t = calibrate_thresholds(r)
        labels = assign_profiles(r, t)
        n = len(r)
        assert labels.count(LOW) <= math.ceil(0.25 * n)
        assert labels.count(HIGH) <= math.ceil(0.25 * n)


class TestAssignment:
    def test_reference_cuts(self):
        assert assign_profile(1.0, REFERENCE_CUTS) is LOW
        assert assign_profile(1.5, REFERENCE_CUTS) is MEDIUM
        assert assign_profile(2.5, REFERENCE_CUTS) is HIGH

    def test_boundaries_go_to_medium(self):
        assert assign_profile(1.1847, REFERENCE_CUTS) is MEDIUM
        assert assign_profile(1.7973, REFERENCE_CUTS) is MEDIUM

    def test_non_finite(self):
        with pytest.raises(NonFiniteInput):
            assign_profile(math.inf, REFERENCE_CUTS)

    def test_order(self):
        assert LOW < MEDIUM < HIGH
        assert [p.label for p in UncertaintyProfile] == ["low", "medium", "high"]

    @given(st.floats(0, 10), st.floats(0, 10))
    def test_monotone(self, a, b):
        lo, hi = sorted((a, b))
        assert assign_profile(lo, REFERENCE_CUTS) <= assign_profile(hi, REFERENCE_CUTS)

    @given(st.floats(0, 1e6))
    def test_partition(self, r):
        p = assign_profile(r, REFERENCE_CUTS)
        hits = [r < 1.1847, 1.1847 <= r <= 1.7973, r > 1.7973]
        assert sum(hits) == 1 and hits[p]


class TestReport:
    def test_validation_self_report_shares(self):
        rng = np.random.default_rng(3)
        point = rng.uniform(5, 50, 200)
        rw = rng.uniform(0.2, 3.0, 200)
        lower = np.zeros(200)
        upper = rw * point
        t = calibrate_thresholds(rw)
        rep = per_profile_report(point, lower, upper, point, t)
        assert abs(rep["low"]["n"] - 50) <= 1
        assert abs(rep["medium"]["n"] - 100) <= 1
        assert abs(rep["high"]["n"] - 50) <= 1
        assert rep["unassigned"]["n"] == 0

    def test_all_low(self):
        t = ProfileThresholds(1.0, 2.0)
        rep = per_profile_report([1.0, 2.0], [0.0, 0.0], [0.5, 0.5], [1.0, 2.0], t)
        assert rep["low"]["n"] == 2 and rep["low"]["share"] == 1.0
        for name in ("medium", "high"):
            assert rep[name] == {"n": 0, "share": 0.0, "point": None, "interval": None}

    def test_zero_points_unassigned(self):
        rep = per_profile_report([1.0, 1.0], [0.0, 0.0], [1.0, 1.0], [0.0, 1.0], ProfileThresholds(0.5, 2.0))
        assert rep["unassigned"]["n"] == 1 and rep["medium"]["n"] == 1

    def test_empty(self):
        with pytest.raises(EmptyInput):
            per_profile_report([], [], [], [], REFERENCE_CUTS)

    def test_assignment_csv(self):
        sink = io.StringIO()
        write_assignments([0, 1], [1.5, math.nan], ["medium", "unassigned"], sink)
        assert sink.getvalue().splitlines() == ["instance_id,rwidth,profile", "0,1.5,medium", "1,,unassigned"]
