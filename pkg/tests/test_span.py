import itertools

import numpy as np
import pytest

from ncospan.fixtures import multihop_scenario
from ncospan.scenario import Channel, WICHITA_CHANNELS, contiguous_plan, remap_channel_indices
from ncospan.span import Schedule, node_spans, span_frequency, span_index

MHZ = 1.0e6
BY_ID = {c.id: c for c in WICHITA_CHANNELS}


def wichita(*ids):
    return [BY_ID[i] for i in ids]


class TestSpanFrequency:
    # Published span values for the Wichita plan, all exact.
    CASES = [
        ((23, 47), 150.0),
        ((17, 23), 42.0),
        ((6, 47), 592.0),
        ((5, 6), 12.0),
        ((2, 47), 620.0),
        ((5, 24), 460.0),
        ((17, 23, 24), 48.0),
        ((2, 5, 6), 34.0),
        ((17, 24), 48.0),
        ((2, 23), 476.0),
        ((2, 6, 47), 620.0),
    ]

    @pytest.mark.parametrize("ids,expected_mhz", CASES)
    def test_published_values(self, ids, expected_mhz):
        assert span_frequency(wichita(*ids)) == pytest.approx(expected_mhz * MHZ)

    def test_singletons(self):
        for c in WICHITA_CHANNELS:
            assert span_frequency([c]) == pytest.approx(6 * MHZ)

    def test_empty(self):
        assert span_frequency([]) == 0.0

    def test_against_pairwise_oracle(self):
        # Brute force: the span is the largest edge-to-edge distance over
        # any channel pair in the set.
        for r in range(1, len(WICHITA_CHANNELS) + 1):
            for combo in itertools.combinations(WICHITA_CHANNELS, r):
                oracle = max(a.high_hz - b.low_hz for a in combo for b in combo)
                assert span_frequency(combo) == pytest.approx(oracle)

    def test_monotone_under_inclusion(self):
        rng = np.random.default_rng(2)
        chans = list(WICHITA_CHANNELS)
        for _ in range(100):
            size = rng.integers(1, 7)
            subset = list(rng.choice(7, size=size, replace=False))
            small = [chans[i] for i in subset]
            extra = [chans[i] for i in range(7) if i not in subset]
            if not extra:
                continue
            bigger = small + [extra[rng.integers(0, len(extra))]]
            assert span_frequency(small) <= span_frequency(bigger) + 1e-9


class TestSpanIndex:
    def test_wichita_pairs(self):
        idx = dict(zip([c.id for c in WICHITA_CHANNELS], remap_channel_indices(WICHITA_CHANNELS)))
        assert span_index([idx[23], idx[47]], 111, 6 * MHZ) == pytest.approx(150 * MHZ)
        assert span_index([idx[6], idx[47]], 111, 6 * MHZ) == pytest.approx(588 * MHZ)

    def test_single_index(self):
        assert span_index([42], 111, 6 * MHZ) == pytest.approx(6 * MHZ)

    def test_empty(self):
        assert span_index([], 111, 6 * MHZ) == 0.0

    def test_matches_frequency_on_contiguous_plans(self):
        chans = contiguous_plan(8, 3 * MHZ, first_center_hz=601.5 * MHZ, first_id=1)
        idx = dict(zip([c.id for c in chans], remap_channel_indices(chans)))
        guard = max(idx.values())
        rng = np.random.default_rng(7)
        for _ in range(200):
            size = rng.integers(1, 9)
            ids = list(rng.choice([c.id for c in chans], size=size, replace=False))
            freq = span_frequency([c for c in chans if c.id in ids])
            index = span_index([idx[i] for i in ids], guard, 3 * MHZ)
            assert index == pytest.approx(freq)


class TestNodeSpans:
    def test_schedule_spans(self):
        scenario = multihop_scenario()
        # Node 1 transmits on {17, 23}; receives nothing.
        sched = Schedule.from_assignments({(1, 4, ): set()})  # placeholder replaced below
        sched = Schedule.from_assignments({(1, 4): {17, 23}})
        spans = node_spans(sched, scenario)
        assert spans.tx(1) == pytest.approx(42 * MHZ)
        assert spans.rx(4) == pytest.approx(42 * MHZ)
        assert spans.tx(4) == 0.0
        assert spans.rx(1) == 0.0

    def test_rx_three_channels(self):
        scenario = multihop_scenario()
        sched = Schedule.from_assignments({(4, 8): {17, 23, 24}})
        spans = node_spans(sched, scenario)
        assert spans.rx(8) == pytest.approx(48 * MHZ)

    def test_idle_node_zero(self):
        scenario = multihop_scenario()
        sched = Schedule.from_assignments({(1, 4): {17}})
        spans = node_spans(sched, scenario)
        assert spans.tx(9) == 0.0
        assert spans.rx(9) == 0.0

    def test_over_cap_flagged_not_fatal(self):
        scenario = multihop_scenario()
        import dataclasses

        tight = dataclasses.replace(scenario, max_span_hz=40 * MHZ)
        sched = Schedule.from_assignments({(1, 4): {17, 23}})  # 42 MHz span
        spans = node_spans(sched, tight)
        assert (1, "tx") in spans.over_cap
        assert (4, "rx") in spans.over_cap


class TestSchedule:
    def test_half_duplex_violations(self):
        sched = Schedule.from_assignments({(1, 2): {5}, (2, 3): {5}})
        assert (2, 5) in sched.half_duplex_violations()
        clean = Schedule.from_assignments({(1, 2): {5}, (2, 3): {6}})
        assert clean.half_duplex_violations() == []

    def test_tx_rx_sets(self):
        sched = Schedule.from_assignments({(1, 2): {5, 6}, (3, 1): {7}})
        assert sched.tx_channels(1) == {5, 6}
        assert sched.rx_channels(1) == {7}
        assert sched.rx_channels(2) == {5, 6}
        assert sched.active_triples() == [(1, 2, 5), (1, 2, 6), (3, 1, 7)]
