"""Polynomial-time system-power minimization and the comparison baselines.

The greedy pipeline has three stages.  Shortest-path routing with weights
inversely proportional to channel-averaged link gain pins one path per
session and hence an aggregate demand per active link.  The scheduling loop
then sweeps the active links in seeded random order, pass after pass; for a
link it scores every unassigned channel by the total system power the
network would draw if that channel were added (flows split equally across
the link's channels, powers inverted from the capacity curve), rejects
candidates that would interfere with existing assignments, and commits the
best channel only if it strictly lowers the running total.  The loop stops
when a full pass commits nothing.  Finally the frozen schedule is re-priced
with optimal flow splitting by the fixed-schedule convex allocation.

Baselines: :func:`tx_power_min` minimizes amplifier power only (circuit
terms zeroed) and is reported under the true radio profile for comparison;
:func:`best_channel_min` is the single-channel point-to-point rule.
"""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .check import check_solution
from .milp import (
    Solution,
    allocate_fixed_schedule,
    breakdown_for,
    repair_powers,
    solve_bnb,
)
from .scenario import Scenario
from .solver import BnbLimits
from .span import Schedule, node_spans, span_frequency

__all__ = [
    "GreedyError",
    "RoutingState",
    "GreedyStats",
    "initial_routes",
    "interference_check",
    "greedy_schedule",
    "final_optimize",
    "solve_greedy",
    "tx_power_min",
    "best_channel_min",
]

log = logging.getLogger(__name__)

# Interference margin of the scheduling loop: received power from another
# active transmitter must stay a decade below the per-channel noise power.
INTERFERENCE_NOISE_FRACTION = 0.1


class GreedyError(RuntimeError):
    """Routing or scheduling cannot serve the demand."""


@dataclass
class RoutingState:
    """One fixed path per session and the per-link aggregate demand."""

    paths: dict[int, tuple[int, ...]]
    link_sessions: dict[tuple[int, int], tuple[int, ...]]
    link_demand_bps: dict[tuple[int, int], float]

    @property
    def active_links(self) -> list[tuple[int, int]]:
        return sorted(self.link_demand_bps)


@dataclass
class GreedyStats:
    passes: int = 0
    commits: int = 0
    candidate_evaluations: int = 0
    interference_pair_checks: int = 0


def _average_gain(scenario: Scenario, tx: int, rx: int) -> float | None:
    chans = scenario.link_channels(tx, rx)
    if not chans:
        return None
    lk = scenario.link(tx, rx)
    if lk is None:
        return None
    return sum(lk.gains[m] for m in chans) / len(chans)


def initial_routes(scenario: Scenario) -> RoutingState:
    """Shortest path per session under weights 1/(channel-averaged gain)."""
    weights: dict[tuple[int, int], float] = {}
    adjacency: dict[int, list[int]] = {}
    for lk in scenario.links:
        g = _average_gain(scenario, lk.tx, lk.rx)
        if g is None or g <= 0:
            continue
        weights[(lk.tx, lk.rx)] = 1.0 / g
        adjacency.setdefault(lk.tx, []).append(lk.rx)
    for nbrs in adjacency.values():
        nbrs.sort()

    paths: dict[int, tuple[int, ...]] = {}
    link_sessions: dict[tuple[int, int], list[int]] = {}
    demand: dict[tuple[int, int], float] = {}
    for sess_idx, sess in enumerate(scenario.sessions):
        dist: dict[int, float] = {sess.source: 0.0}
        parent: dict[int, int] = {}
        heap: list[tuple[float, int]] = [(0.0, sess.source)]
        done: set[int] = set()
        while heap:
            d, u = heapq.heappop(heap)
            if u in done:
                continue
            done.add(u)
            if u == sess.dest:
                break
            for v in adjacency.get(u, ()):
                nd = d + weights[(u, v)]
                if nd < dist.get(v, math.inf):
                    dist[v] = nd
                    parent[v] = u
                    heapq.heappush(heap, (nd, v))
        if sess.dest not in done:
            raise GreedyError(f"session {sess_idx} ({sess.source}->{sess.dest}) is disconnected")
        path = [sess.dest]
        while path[-1] != sess.source:
            path.append(parent[path[-1]])
        path.reverse()
        paths[sess_idx] = tuple(path)
        for i, j in zip(path, path[1:]):
            link_sessions.setdefault((i, j), []).append(sess_idx)
            demand[(i, j)] = demand.get((i, j), 0.0) + sess.rate_bps
    return RoutingState(
        paths=paths,
        link_sessions={k: tuple(v) for k, v in link_sessions.items()},
        link_demand_bps=demand,
    )


def interference_check(
    scenario: Scenario,
    schedule: Schedule,
    powers: Mapping[tuple[int, int, int], float],
    candidate: tuple[int, int, int, float],
    stats: GreedyStats | None = None,
) -> bool:
    """True when assigning the candidate (a, b, channel, power) is blocked.

    Blocked cases: the candidate's power lands above the margin at another
    active co-channel receiver; another active co-channel transmitter lands
    above the margin at the candidate receiver; or an active co-channel link
    touches either candidate endpoint (half-duplex adjacency).
    """
    a, b, m, p_new = candidate
    threshold = INTERFERENCE_NOISE_FRACTION * scenario.noise_power()
    for (i, j), chans in schedule.assignments.items():
        if m not in chans:
            continue
        if stats is not None:
            stats.interference_pair_checks += 1
        if i in (a, b) or j in (a, b):
            return True
        g_aj = scenario.gain(a, j, m)
        if g_aj is not None and p_new * g_aj >= threshold:
            return True
        g_ib = scenario.gain(i, b, m)
        if g_ib is not None and powers.get((i, j, m), 0.0) * g_ib >= threshold:
            return True
    return False


def _split_powers(scenario: Scenario, link: tuple[int, int], chans: frozenset[int], demand: float) -> dict[int, float] | None:
    """Equal-split provisional powers on one link, or None if a gain is missing."""
    if not chans:
        return {}
    width = scenario.width_hz
    noise = scenario.noise_power()
    per = demand / len(chans)
    split = {}
    for m in sorted(chans):
        g = scenario.gain(link[0], link[1], m)
        if g is None:
            return None
        split[m] = (noise / g) * (2.0 ** (per / width) - 1.0)
    return split


def greedy_schedule(
    scenario: Scenario, routing: RoutingState, seed: int | None = None
) -> tuple[Schedule, dict[tuple[int, int, int], float], dict[tuple[int, int, int, int], float], GreedyStats]:
    """Channel assignment by repeated locally-best commits.

    Returns the schedule, provisional equal-split powers and per-session
    flows, and the instrumentation counters.  A configuration that leaves
    some active link without a channel counts as unserved and any candidate
    that serves it wins; among fully served configurations the comparison is
    total system power alone, so every commit strictly lowers
    (unserved links, total power) lexicographically.
    """
    rng = np.random.default_rng(scenario.rng_seed if seed is None else seed)
    stats = GreedyStats()
    active = routing.active_links
    by_id = {c.id: c for c in scenario.channels}

    assigned: dict[tuple[int, int], frozenset[int]] = {lk: frozenset() for lk in active}
    powers: dict[tuple[int, int, int], float] = {}

    def schedule_of() -> Schedule:
        return Schedule.from_assignments({lk: chans for lk, chans in assigned.items() if chans})

    def total_power() -> float:
        return breakdown_for(scenario, schedule_of(), powers).total_w

    def unserved() -> int:
        return sum(1 for lk in active if not assigned[lk])

    def tx_span_with(node: int, extra_link: tuple[int, int], extra_chans: frozenset[int]) -> float:
        chans: set[int] = set()
        for (i, _j), cs in assigned.items():
            if i == node:
                chans |= cs if (i, _j) != extra_link else set()
        if extra_link[0] == node:
            chans |= extra_chans
        return span_frequency(by_id[m] for m in chans)

    def rx_span_with(node: int, extra_link: tuple[int, int], extra_chans: frozenset[int]) -> float:
        chans = set()
        for (_i, j), cs in assigned.items():
            if j == node:
                chans |= cs if (_i, j) != extra_link else set()
        if extra_link[1] == node:
            chans |= extra_chans
        return span_frequency(by_id[m] for m in chans)

    current_score = (unserved(), total_power())
    max_passes = len(active) * len(scenario.channels) + 2

    while True:
        stats.passes += 1
        if stats.passes > max_passes:
            raise GreedyError("scheduling loop failed to terminate")
        no_improvement = 0
        order = [active[k] for k in rng.permutation(len(active))]
        for link in order:
            a, b = link
            demand = routing.link_demand_bps[link]
            usable = scenario.link_channels(a, b)
            best: tuple[tuple[int, float], int, dict[int, float]] | None = None
            for m in usable:
                if m in assigned[link]:
                    continue
                stats.candidate_evaluations += 1
                new_chans = assigned[link] | {m}
                split = _split_powers(scenario, link, new_chans, demand)
                if split is None:
                    continue
                cap = scenario.max_span_hz * (1 + 1e-12)
                if tx_span_with(a, link, new_chans) > cap or rx_span_with(b, link, new_chans) > cap:
                    continue
                if interference_check(scenario, schedule_of(), powers, (a, b, m, split[m]), stats):
                    continue
                trial_assigned = dict(assigned)
                trial_assigned[link] = new_chans
                trial_powers = {t: p for t, p in powers.items() if (t[0], t[1]) != link}
                for mm, pw in split.items():
                    trial_powers[(a, b, mm)] = pw
                trial_schedule = Schedule.from_assignments({lk: cs for lk, cs in trial_assigned.items() if cs})
                trial_total = breakdown_for(scenario, trial_schedule, trial_powers).total_w
                trial_unserved = sum(1 for lk in active if not trial_assigned[lk])
                score = (trial_unserved, trial_total)
                if best is None or score < best[0]:
                    best = (score, m, split)
            if best is not None and best[0] < current_score:
                _, m, split = best
                assigned[link] = assigned[link] | {m}
                for t in [t for t in powers if (t[0], t[1]) == link]:
                    del powers[t]
                for mm, pw in split.items():
                    powers[(a, b, mm)] = pw
                current_score = best[0]
                stats.commits += 1
            else:
                no_improvement += 1
        if no_improvement == len(active):
            break

    missing = [lk for lk in active if not assigned[lk]]
    if missing:
        raise GreedyError(
            f"link(s) {missing} ended with no channel: every candidate was blocked by "
            "interference, adjacency or the span cap"
        )

    flows: dict[tuple[int, int, int, int], float] = {}
    for link, chans in assigned.items():
        k = len(chans)
        for m in sorted(chans):
            for sess_idx in routing.link_sessions[link]:
                flows[(link[0], link[1], m, sess_idx)] = scenario.sessions[sess_idx].rate_bps / k
    return schedule_of(), powers, flows, stats


def final_optimize(
    scenario: Scenario,
    schedule: Schedule,
    provisional_powers: Mapping[tuple[int, int, int], float],
    provisional_flows: Mapping[tuple[int, int, int, int], float],
) -> Solution:
    """Optimal flows and powers at the frozen schedule; falls back to the
    provisional equal-split solution if the allocation is infeasible."""
    provisional_bd = breakdown_for(scenario, schedule, provisional_powers)
    alloc = allocate_fixed_schedule(scenario, schedule)
    if alloc.status != "optimal":
        verdict = check_solution(scenario, schedule, provisional_powers, provisional_flows)
        sol = Solution(
            method="greedy",
            status="solved" if verdict.ok else "infeasible",
            schedule=schedule,
            powers=dict(provisional_powers),
            flows=dict(provisional_flows),
            spans=node_spans(schedule, scenario),
            breakdown=provisional_bd,
            warnings=["final optimization infeasible at the fixed schedule; provisional solution kept"]
            + ([] if verdict.ok else verdict.violations),
        )
        return sol
    breakdown = breakdown_for(scenario, schedule, alloc.powers)
    if breakdown.total_w <= provisional_bd.total_w + 1e-9 * max(1.0, provisional_bd.total_w):
        return Solution(
            method="greedy",
            status="solved",
            schedule=schedule,
            powers=alloc.powers,
            flows=alloc.flows,
            spans=node_spans(schedule, scenario),
            breakdown=breakdown,
        )
    return Solution(
        method="greedy",
        status="solved",
        schedule=schedule,
        powers=dict(provisional_powers),
        flows=dict(provisional_flows),
        spans=node_spans(schedule, scenario),
        breakdown=provisional_bd,
        warnings=["final optimization did not improve on the provisional solution"],
    )


def solve_greedy(scenario: Scenario, seed: int | None = None) -> Solution:
    """Full greedy pipeline: route, schedule, then re-optimize at fixed schedule."""
    routing = initial_routes(scenario)
    schedule, powers, flows, stats = greedy_schedule(scenario, routing, seed=seed)
    sol = final_optimize(scenario, schedule, powers, flows)
    sol.extra["stats"] = stats
    sol.extra["routing"] = routing
    return sol


def tx_power_min(scenario: Scenario, limits: BnbLimits | None = None, seed: int | None = None) -> Solution:
    """Transmit-power-only baseline, reported under the true radio profile.

    Circuit coefficients are zeroed so the objective is amplifier power
    alone; scheduling indicators then matter only through coupling and
    interference.  On a single-link scenario the optimum simply activates
    every channel and lets the convex allocation choose the waterfilling
    split; the schedule is then the support of the positive powers.
    Multi-link scenarios run branch-and-bound on the zeroed program, warm
    started with the zero-slope greedy solution.
    """
    zeroed = scenario.with_radio(scenario.radio.without_circuit())

    solution = None
    if len(scenario.links) == 1 and len(scenario.sessions) >= 1:
        lk = scenario.links[0]
        chans = scenario.link_channels(lk.tx, lk.rx)
        by_id = {c.id: c for c in scenario.channels}
        full_span = span_frequency(by_id[m] for m in chans)
        if chans and full_span <= scenario.max_span_hz * (1 + 1e-12):
            full = Schedule.from_assignments({(lk.tx, lk.rx): chans})
            alloc = allocate_fixed_schedule(zeroed, full)
            if alloc.status == "optimal":
                solution = _restrict_to_support(scenario, alloc.flows)
                solution.method = "txmin"

    if solution is None:
        warm = None
        try:
            warm = solve_greedy(zeroed, seed=seed)
        except GreedyError:
            warm = None
        inner = solve_bnb(zeroed, limits=limits, warm_start=warm, method_name="txmin")
        if inner.schedule is None:
            return inner
        solution = _restrict_to_support(scenario, inner.flows)
        solution.method = "txmin"
        solution.status = inner.status
        solution.bnb = inner.bnb

    return solution


def _restrict_to_support(scenario: Scenario, flows: Mapping[tuple[int, int, int, int], float]) -> Solution:
    """Schedule only the link-channels that actually carry flow."""
    agg: dict[tuple[int, int, int], float] = {}
    for (i, j, m, _l), v in flows.items():
        agg[(i, j, m)] = agg.get((i, j, m), 0.0) + v
    support: dict[tuple[int, int], set[int]] = {}
    kept_flows: dict[tuple[int, int, int, int], float] = {}
    for (i, j, m, l), v in flows.items():
        if agg[(i, j, m)] > 1e-6:
            support.setdefault((i, j), set()).add(m)
            kept_flows[(i, j, m, l)] = v
    schedule = Schedule.from_assignments(support)
    powers = repair_powers(kept_flows, schedule, scenario)
    return Solution(
        method="txmin",
        status="solved",
        schedule=schedule,
        powers=powers,
        flows=kept_flows,
        spans=node_spans(schedule, scenario),
        breakdown=breakdown_for(scenario, schedule, powers),
    )


def best_channel_min(scenario: Scenario) -> Solution:
    """Point-to-point rule: schedule only the best-gain channel."""
    if len(scenario.links) != 1 or len(scenario.sessions) != 1:
        raise ValueError("best-channel baseline supports exactly one link and one session")
    lk = scenario.links[0]
    sess = scenario.sessions[0]
    chans = scenario.link_channels(lk.tx, lk.rx)
    if not chans:
        raise GreedyError("link has no usable channel")
    best_m = None
    best_g = -math.inf
    for m in chans:  # ties resolve to the lowest channel id
        if lk.gains[m] > best_g:
            best_g = lk.gains[m]
            best_m = m
    width = scenario.width_hz
    noise = scenario.noise_power()
    p = (noise / best_g) * (2.0 ** (sess.rate_bps / width) - 1.0)
    schedule = Schedule.from_assignments({(lk.tx, lk.rx): {best_m}})
    powers = {(lk.tx, lk.rx, best_m): p}
    flows = {(lk.tx, lk.rx, best_m, 0): sess.rate_bps}
    return Solution(
        method="bestchan",
        status="solved",
        schedule=schedule,
        powers=powers,
        flows=flows,
        spans=node_spans(schedule, scenario),
        breakdown=breakdown_for(scenario, schedule, powers),
    )
