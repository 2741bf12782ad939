import math

import numpy as np
import pytest

from conftest import (
    SmallInstance,
    exhaustive_best_power,
    make_p2p_scenario,
    random_small_instance,
    waterfill_min_power,
)
from ncospan.check import check_solution
from ncospan.fixtures import multihop_scenario
from ncospan.milp import (
    RepairError,
    Solution,
    allocate_fixed_schedule,
    breakdown_for,
    build_milp,
    evaluate_schedule,
    expected_row_counts,
    power_caps,
    repair_powers,
    solve_bnb,
)
from ncospan.power import PRESET_RADIOS
from ncospan.scenario import Link, Node, Scenario, Session, contiguous_plan
from ncospan.solver import BnbLimits, solve_lp
from ncospan.span import Schedule


class TestBuildMilp:
    def test_smallest_instance_has_one_binary(self):
        sc = make_p2p_scenario([-110.0])
        lp, vm = build_milp(sc)
        assert len(vm.binaries) == 1

    def test_binary_count_is_sum_of_shared_channels(self):
        sc = multihop_scenario()
        lp, vm = build_milp(sc)
        expected = sum(len(sc.link_channels(lk.tx, lk.rx)) for lk in sc.links)
        assert len(vm.binaries) == expected

    def test_row_counts_match_closed_form(self):
        for sc in (make_p2p_scenario([-110.0, -105.0]), multihop_scenario()):
            lp, vm = build_milp(sc)
            want = expected_row_counts(sc)
            assert vm.row_families == want
            assert lp.num_constraints == sum(want.values())

    def test_fixed_power_engages_with_activity(self):
        # forcing any x to 1 forces the transmit fixed term at its node
        sc = make_p2p_scenario([-110.0, -105.0])
        lp, vm = build_milp(sc)
        var = vm.x[(1, 2, 1)]
        res = solve_lp(lp, bounds_override={var: (1.0, 1.0)})
        assert res.status == "optimal"
        a1 = res.x[vm.fixed_tx[1]]
        assert a1 == pytest.approx(sc.radio.tx_fixed_total_w, rel=1e-6)

    def test_no_path_warns(self, caplog):
        chans = contiguous_plan(1, 3e6, first_center_hz=300e6 + 1.5e6, first_id=1)
        ids = frozenset(c.id for c in chans)
        sc = Scenario(
            nodes=(Node(1, 0, 0, ids), Node(2, 10, 0, ids), Node(3, 20, 0, ids)),
            channels=chans,
            links=(Link(1, 2, {1: 1e-10}),),
            sessions=(Session(1, 3, 1e6),),
            noise_density=4e-21,
            interference_threshold=1.2e-16,
            max_tx_power=0.1,
            big_m_power=0.1,
            max_span_hz=3e6,
            radio=PRESET_RADIOS["high-slope"],
        )
        import logging

        with caplog.at_level(logging.WARNING, logger="ncospan.milp"):
            build_milp(sc)
        assert any("no path" in r.message for r in caplog.records)


class TestRepairPowers:
    def scenario(self):
        return make_p2p_scenario([-100.0, -100.0], rate_bps=6e6, width_hz=3e6, max_tx_power=1.0)

    def test_rate_equal_bandwidth(self):
        sc = self.scenario()
        sched = Schedule.from_assignments({(1, 2): {1}})
        flows = {(1, 2, 1, 0): sc.width_hz}  # one bandwidth worth of flow
        powers = repair_powers(flows, sched, sc)
        noise = sc.noise_power()
        g = sc.links[0].gains[1]
        assert powers[(1, 2, 1)] == pytest.approx(noise / g, rel=1e-12)

    def test_zero_flow_zero_power(self):
        sc = self.scenario()
        sched = Schedule.from_assignments({(1, 2): {1, 2}})
        powers = repair_powers({(1, 2, 1, 0): 1e6}, sched, sc)
        assert powers[(1, 2, 2)] == 0.0

    def test_double_bandwidth(self):
        sc = self.scenario()
        sched = Schedule.from_assignments({(1, 2): {1}})
        powers = repair_powers({(1, 2, 1, 0): 2 * sc.width_hz}, sched, sc)
        noise = sc.noise_power()
        g = sc.links[0].gains[1]
        assert powers[(1, 2, 1)] == pytest.approx(3 * noise / g, rel=1e-12)

    def test_capacity_equals_flow_after_repair(self):
        sc = self.scenario()
        sched = Schedule.from_assignments({(1, 2): {1, 2}})
        flows = {(1, 2, 1, 0): 2.3e6, (1, 2, 2, 0): 3.7e6}
        powers = repair_powers(flows, sched, sc)
        for m in (1, 2):
            g = sc.links[0].gains[m]
            cap = sc.width_hz * math.log2(1 + g * powers[(1, 2, m)] / sc.noise_power())
            assert cap == pytest.approx(flows[(1, 2, m, 0)], rel=1e-9)

    def test_flow_on_unscheduled_channel_rejected(self):
        sc = self.scenario()
        sched = Schedule.from_assignments({(1, 2): {1}})
        with pytest.raises(RepairError, match="unscheduled"):
            repair_powers({(1, 2, 2, 0): 1e6}, sched, sc)

    def test_cap_violation_rejected(self):
        sc = make_p2p_scenario([-130.0], rate_bps=30e6, width_hz=3e6, max_tx_power=1e-4)
        sched = Schedule.from_assignments({(1, 2): {1}})
        with pytest.raises(RepairError, match="exceeds cap"):
            repair_powers({(1, 2, 1, 0): 30e6}, sched, sc)


class TestPowerCaps:
    def test_interference_cap_from_co_channel_receiver(self):
        chans = contiguous_plan(1, 3e6, first_center_hz=300e6 + 1.5e6, first_id=1)
        ids = frozenset(c.id for c in chans)
        # two links far apart; each transmitter couples weakly to the other receiver
        links = (
            Link(1, 2, {1: 1e-9}),
            Link(3, 4, {1: 1e-9}),
            Link(1, 4, {1: 1e-13}),
            Link(3, 2, {1: 1e-13}),
        )
        sc = Scenario(
            nodes=tuple(Node(i, 100.0 * i, 0, ids) for i in (1, 2, 3, 4)),
            channels=chans,
            links=links,
            sessions=(Session(1, 2, 1e6), Session(3, 4, 1e6)),
            noise_density=4e-21,
            interference_threshold=0.1 * 4e-21 * 3e6,
            max_tx_power=1.0,
            big_m_power=1.0,
            max_span_hz=3e6,
            radio=PRESET_RADIOS["high-slope"],
        )
        sched = Schedule.from_assignments({(1, 2): {1}, (3, 4): {1}})
        caps = power_caps(sc, sched)
        want = sc.interference_threshold / 1e-13
        assert caps[(1, 2, 1)] == pytest.approx(min(1.0, want))
        # without the co-channel neighbor the cap is the transmit limit
        solo = power_caps(sc, Schedule.from_assignments({(1, 2): {1}}))
        assert solo[(1, 2, 1)] == pytest.approx(1.0)


class TestAllocateFixedSchedule:
    def test_single_path_flows_forced(self):
        sc = make_p2p_scenario([-110.0], rate_bps=2e6)
        sched = Schedule.from_assignments({(1, 2): {1}})
        alloc = allocate_fixed_schedule(sc, sched)
        assert alloc.status == "optimal"
        assert alloc.flows[(1, 2, 1, 0)] == pytest.approx(2e6, rel=1e-9)

    def test_matches_waterfilling_oracle(self):
        rng = np.random.default_rng(9)
        for _ in range(25):
            n = int(rng.integers(1, 5))
            gains_db = rng.uniform(-118, -104, size=n)
            rate = float(rng.uniform(0.3, 1.6)) * 3e6 * max(1, n - 1)
            sc = make_p2p_scenario(list(gains_db), rate_bps=rate, max_tx_power=0.3)
            sched = Schedule.from_assignments({(1, 2): set(c.id for c in sc.channels)})
            alloc = allocate_fixed_schedule(sc, sched)
            gains = [sc.links[0].gains[c.id] for c in sc.channels]
            caps = [min(sc.max_tx_power, sc.big_m_power)] * n
            oracle = waterfill_min_power(sc.width_hz, sc.noise_power(), gains, caps, rate)
            if oracle is None:
                assert alloc.status == "infeasible"
            else:
                assert alloc.status == "optimal"
                assert sum(alloc.powers.values()) == pytest.approx(oracle[0], rel=1e-6)

    def test_infeasible_when_rate_exceeds_capped_capacity(self):
        sc = make_p2p_scenario([-120.0, -120.0], rate_bps=60e6, max_tx_power=1e-5)
        sched = Schedule.from_assignments({(1, 2): {1, 2}})
        assert allocate_fixed_schedule(sc, sched).status == "infeasible"

    def test_no_outgoing_link_infeasible(self):
        sc = make_p2p_scenario([-110.0])
        assert allocate_fixed_schedule(sc, Schedule.from_assignments({})).status == "infeasible"


class TestSolveBnb:
    def test_two_channel_toy_matches_enumeration(self):
        sc = make_p2p_scenario([-110.0, -106.0], rate_bps=4e6)
        inst = SmallInstance(scenario=sc, link_demands={(1, 2): 4e6})
        best = exhaustive_best_power(inst)
        sol = solve_bnb(sc)
        assert sol.status == "solved"
        assert sol.objective_w == pytest.approx(best[0], rel=1e-6)

    def test_flat_slopes_match_enumeration(self):
        radio = PRESET_RADIOS["high-slope"].scaled_slopes(0.0)
        sc = make_p2p_scenario([-110.0, -106.0], rate_bps=4e6, radio=radio)
        inst = SmallInstance(scenario=sc, link_demands={(1, 2): 4e6})
        best = exhaustive_best_power(inst)
        sol = solve_bnb(sc)
        assert sol.objective_w == pytest.approx(best[0], rel=1e-6)

    def test_infeasible_rate(self):
        sc = make_p2p_scenario([-120.0], rate_bps=1e9, max_tx_power=1e-6)
        sol = solve_bnb(sc)
        assert sol.status == "infeasible"
        assert sol.bnb.status == "infeasible"

    def test_bundle_cap_forces_single_channels(self):
        sc = make_p2p_scenario([-110.0, -108.0], rate_bps=2e6, max_span_hz=3e6)
        sol = solve_bnb(sc)
        assert sol.status == "solved"
        for chans in sol.schedule.assignments.values():
            assert len(chans) == 1

    def test_solution_passes_checker_and_bound_sane(self):
        sc = make_p2p_scenario([-112.0, -108.0, -115.0], rate_bps=5e6)
        sol = solve_bnb(sc)
        rep = check_solution(sc, sol.schedule, sol.powers, sol.flows)
        assert rep.ok, rep.violations
        assert sol.breakdown.total_w >= sol.bnb.lower_bound - 1e-6 * abs(sol.breakdown.total_w)

    def test_warm_start_value_never_worse(self):
        sc = make_p2p_scenario([-112.0, -108.0], rate_bps=4e6)
        base = solve_bnb(sc)
        warm = solve_bnb(sc, warm_start=base)
        assert warm.objective_w <= base.objective_w * (1 + 1e-9)

    def test_random_small_instances_match_oracle(self):
        rng = np.random.default_rng(123)
        matched = 0
        for _ in range(12):
            inst = random_small_instance(rng)
            best = exhaustive_best_power(inst)
            sol = solve_bnb(inst.scenario)
            if best is None:
                assert sol.status == "infeasible"
            else:
                assert sol.status == "solved"
                assert sol.objective_w == pytest.approx(best[0], rel=1e-4)
                matched += 1
        assert matched >= 6


class TestBreakdownIndependence:
    def test_breakdown_equals_direct_formula(self):
        sc = multihop_scenario()
        sched = Schedule.from_assignments({(1, 4): {17, 23}, (4, 8): {5}, (8, 10): {47}})
        powers = {(1, 4, 17): 0.01, (1, 4, 23): 0.02, (4, 8, 5): 0.005, (8, 10, 47): 0.03}
        bd = breakdown_for(sc, sched, powers)
        radio = sc.radio
        by_id = {c.id: c for c in sc.channels}
        total = 0.0
        for node in (n.id for n in sc.nodes):
            tx = {m for (i, _j, m) in powers if i == node}
            rx = {m for (_i, j, m) in powers if j == node}
            if tx:
                lo = min(by_id[m].low_hz for m in tx)
                hi = max(by_id[m].high_hz for m in tx)
                total += radio.tx_fixed_total_w + 2 * radio.tx_slope_w_per_sps * (hi - lo)
            if rx:
                lo = min(by_id[m].low_hz for m in rx)
                hi = max(by_id[m].high_hz for m in rx)
                total += radio.rx_fixed_total_w + 2 * radio.rx_slope_w_per_sps * (hi - lo)
        total += radio.amp_scale * sum(powers.values())
        assert bd.total_w == pytest.approx(total, rel=1e-12)


class TestChecker:
    def test_flags_half_duplex(self):
        sc = multihop_scenario()
        sched = Schedule.from_assignments({(1, 4): {17}, (4, 8): {17}})
        rep = check_solution(sc, sched, {}, {})
        assert not rep.ok
        assert any("half-duplex" in v for v in rep.violations)

    def test_flags_capacity_shortfall(self):
        sc = make_p2p_scenario([-110.0], rate_bps=2e6)
        sched = Schedule.from_assignments({(1, 2): {1}})
        flows = {(1, 2, 1, 0): 2e6}
        rep = check_solution(sc, sched, {(1, 2, 1): 1e-12}, flows)
        assert not rep.ok
        assert any("capacity" in v for v in rep.violations)

    def test_flags_unmet_demand(self):
        sc = make_p2p_scenario([-110.0], rate_bps=2e6)
        sched = Schedule.from_assignments({(1, 2): {1}})
        rep = check_solution(sc, sched, {(1, 2, 1): 0.01}, {(1, 2, 1, 0): 1e6})
        assert not rep.ok
        assert any("demand" in v for v in rep.violations)

    def test_flags_interference(self):
        chans = contiguous_plan(1, 3e6, first_center_hz=300e6 + 1.5e6, first_id=1)
        ids = frozenset(c.id for c in chans)
        links = (
            Link(1, 2, {1: 1e-9}),
            Link(3, 4, {1: 1e-9}),
            Link(1, 4, {1: 1e-9}),
            Link(3, 2, {1: 1e-13}),
        )
        sc = Scenario(
            nodes=tuple(Node(i, 100.0 * i, 0, ids) for i in (1, 2, 3, 4)),
            channels=chans,
            links=links,
            sessions=(Session(1, 2, 1e6), Session(3, 4, 1e6)),
            noise_density=4e-21,
            interference_threshold=0.1 * 4e-21 * 3e6,
            max_tx_power=1.0,
            big_m_power=1.0,
            max_span_hz=3e6,
            radio=PRESET_RADIOS["high-slope"],
        )
        sched = Schedule.from_assignments({(1, 2): {1}, (3, 4): {1}})
        powers = {(1, 2, 1): 0.5, (3, 4, 1): 1e-6}
        rep = check_solution(sc, sched, powers, {(1, 2, 1, 0): 1e5, (3, 4, 1, 1): 1e5})
        assert not rep.ok
        assert any("interference" in v for v in rep.violations)

    def test_clean_solution_passes(self):
        sc = make_p2p_scenario([-110.0], rate_bps=2e6)
        sol = solve_bnb(sc)
        rep = check_solution(sc, sol.schedule, sol.powers, sol.flows)
        assert rep.ok
