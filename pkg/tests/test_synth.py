import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ppm_qrf.event_log import Event, parse_event_log, write_event_log
from ppm_qrf.synth import (
    ATTRIBUTE_SCHEMA, GeneratorConfig, GroundTruth, InvalidConfig, UnknownEvent, generate_log, log_summary,
    true_quantile,
)


def csv_text(log):
    sink = io.StringIO()
    write_event_log(log, sink)
    return sink.getvalue()


@pytest.fixture(scope="module")
def large():
    return generate_log(GeneratorConfig(n_cases=10_000, seed=3))


class TestGenerator:
    def test_byte_identical_reruns(self):
        cfg = GeneratorConfig(n_cases=200, seed=5)
        (a, ta), (b, tb) = generate_log(cfg), generate_log(cfg)
        assert csv_text(a) == csv_text(b)
        assert json.dumps(ta.to_dict()) == json.dumps(tb.to_dict())
        assert csv_text(a) != csv_text(generate_log(GeneratorConfig(n_cases=200, seed=6))[0])

    def test_event_count_bounds(self):
        log, truth = generate_log(GeneratorConfig(n_cases=500))
        assert len(log) == 500
        assert 1000 <= log.n_events <= 4000
        assert len(truth) == log.n_events
        assert all(2 <= len(t) <= 8 for t in log.traces)

    def test_mean_trace_length(self, large):
        log, _ = large
        assert abs(log.n_events / len(log) - 4.6) <= 0.1

    def test_durations_right_skewed(self, large):
        s = log_summary(large[0])
        assert s["std_processing_time"] > s["mean_processing_time"] > 0
        assert s["activities"] == 30

    def test_round_trips_through_parser(self):
        log, _ = generate_log(GeneratorConfig(n_cases=50, seed=9))
        back = parse_event_log(csv_text(log), ATTRIBUTE_SCHEMA)
        assert csv_text(back) == csv_text(log)

    def test_events_chained_within_cases(self):
        log, _ = generate_log(GeneratorConfig(n_cases=100, seed=1))
        for trace in log.traces:
            for prev, nxt in zip(trace.events, trace.events[1:]):
                assert prev.t_start <= prev.t_complete <= nxt.t_start

    @pytest.mark.parametrize("bad", [{"n_cases": 0}, {"n_activities": 0}, {"n_activities": 31},
                                     {"min_length": 5, "max_length": 3}, {"mean_trace_length": 9.0}])
    def test_invalid_config(self, bad):
        with pytest.raises(InvalidConfig):
            generate_log(GeneratorConfig(**bad))

    @settings(max_examples=10)
    @given(st.integers(1, 40), st.integers(0, 2**31))
    def test_any_valid_config_parses(self, n, seed):
        log, truth = generate_log(GeneratorConfig(n_cases=n, seed=seed, n_activities=10))
        assert len(parse_event_log(csv_text(log), ATTRIBUTE_SCHEMA)) == n
        assert all(s > 0 for *_, s in truth.records)


class TestGroundTruth:
    def test_median_is_exp_mu(self, large):
        log, truth = large
        ev = log.traces[0].events[1]
        mu, _ = truth.params_for_event(ev)
        assert true_quantile(truth, ev, 0.5) == pytest.approx(math.exp(mu), rel=1e-15)
        assert true_quantile(truth, (ev.case_id, 1), 0.5) == true_quantile(truth, ev, 0.5)

    def test_quantiles_monotone(self, large):
        _, truth = large
        for case, idx, *_ in truth.records[:500]:
            assert true_quantile(truth, (case, idx), 0.05) < true_quantile(truth, (case, idx), 0.95)

    def test_tiny_scale_collapses(self):
        truth = GroundTruth((("C1", 0, "A", 0.0, 2.0, 1e-12),))
        for a in (0.05, 0.5, 0.95):
            assert true_quantile(truth, ("C1", 0), a) == pytest.approx(math.exp(2.0), abs=1e-9)

    def test_unknown_event(self, large):
        with pytest.raises(UnknownEvent):
            true_quantile(large[1], ("nope", 0), 0.5)
        with pytest.raises(UnknownEvent):
            true_quantile(large[1], Event("X", "nope", 0.0, 1.0, {}), 0.5)

    def test_nominal_coverage(self, large):
        log, truth = large
        hits = []
        for trace in log.traces:
            for i, ev in enumerate(trace.events):
                minutes = (ev.t_complete - ev.t_start) / 60
                hits.append(true_quantile(truth, (trace.case_id, i), 0.05) <= minutes
                            <= true_quantile(truth, (trace.case_id, i), 0.95))
        assert len(hits) >= 20_000
        assert abs(np.mean(hits) - 0.90) <= 0.01

    def test_json_round_trip(self):
        _, truth = generate_log(GeneratorConfig(n_cases=20))
        sink = io.StringIO()
        truth.dump(sink)
        assert GroundTruth.from_dict(json.loads(sink.getvalue())).records == truth.records
