"""Independent feasibility verification of solver output.

Every solution, from any method, is re-checked here directly against the
scenario data: half duplex, protected-receiver interference, power/schedule
coupling, capacity vs. flow, session demand and conservation, and the span
cap.  The checker recomputes everything from the raw schedule/power/flow
dictionaries and shares no code with the program builder, so a bug in the
builder or solver cannot vouch for itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

from .scenario import Scenario
from .span import Schedule, node_spans

__all__ = ["CheckReport", "check_solution"]

DEFAULT_TOL = 1e-6


@dataclass
class CheckReport:
    ok: bool
    violations: list[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.ok


def check_solution(
    scenario: Scenario,
    schedule: Schedule,
    powers: Mapping[tuple[int, int, int], float],
    flows: Mapping[tuple[int, int, int, int], float],
    tol: float = DEFAULT_TOL,
) -> CheckReport:
    """Verify a solution against every model constraint at relative tolerance."""
    bad: list[str] = []
    width = scenario.width_hz
    noise = scenario.noise_power()
    triples = schedule.active_triples()
    active = set(triples)

    # Schedule sanity: channels must be usable on their links.
    for (i, j, m) in triples:
        if m not in scenario.link_channels(i, j):
            bad.append(f"schedule: channel {m} not shared by link {i}->{j}")
        if scenario.gain(i, j, m) is None:
            bad.append(f"schedule: no gain for {i}->{j} on channel {m}")

    # Half duplex: each node uses a channel at most once across both paths.
    for node, m in schedule.half_duplex_violations():
        bad.append(f"half-duplex: node {node} reuses channel {m}")

    # Powers: non-negative, coupled to scheduling, below the cap.
    couple = min(scenario.big_m_power, scenario.max_tx_power)
    for t, p in powers.items():
        if p < -tol:
            bad.append(f"power: negative power on {t}")
        if t not in active and p > tol * scenario.max_tx_power:
            bad.append(f"coupling: power {p:.3e} W on unscheduled {t}")
        if p > couple * (1.0 + tol):
            bad.append(f"power cap: {p:.3e} W exceeds {couple:.3e} W on {t}")

    # Interference: an active transmitter may not deliver more than the
    # threshold at any other active receiver sharing the channel.
    for (i, j, m) in triples:
        p = powers.get((i, j, m), 0.0)
        for (k, h, mm) in triples:
            if mm != m or (k, h) == (i, j):
                continue
            g_ih = scenario.gain(i, h, m)
            if g_ih is None:
                continue
            received = p * g_ih
            if received > scenario.interference_threshold * (1.0 + tol):
                bad.append(
                    f"interference: {i}->{j} on ch {m} delivers {received:.3e} W at receiver {h}"
                )

    # Flows: non-negative, only on scheduled link-channels, within capacity.
    agg: dict[tuple[int, int, int], float] = {}
    for (i, j, m, l), val in flows.items():
        if val < -tol:
            bad.append(f"flow: negative flow on {(i, j, m, l)}")
        if val > tol and (i, j, m) not in active:
            bad.append(f"flow: flow on unscheduled link-channel {(i, j, m)}")
        if l >= len(scenario.sessions):
            bad.append(f"flow: unknown session index {l}")
            continue
        sess = scenario.sessions[l]
        if i == sess.dest and val > tol:
            bad.append(f"flow: session {l} leaves its destination at {(i, j, m)}")
        if j == sess.source and val > tol:
            bad.append(f"flow: session {l} re-enters its source at {(i, j, m)}")
        agg[(i, j, m)] = agg.get((i, j, m), 0.0) + val

    for t, total in agg.items():
        g = scenario.gain(t[0], t[1], t[2])
        if g is None:
            continue
        p = powers.get(t, 0.0)
        capacity = width * math.log2(1.0 + g * p / noise)
        if total > capacity + tol * max(1.0, capacity):
            bad.append(f"capacity: flow {total:.6e} exceeds capacity {capacity:.6e} on {t}")

    # Session demand and conservation.
    for l, sess in enumerate(scenario.sessions):
        out_src = sum(v for (i, _j, _m, ll), v in flows.items() if ll == l and i == sess.source)
        if out_src < sess.rate_bps * (1.0 - tol):
            bad.append(f"demand: session {l} source sends {out_src:.6e} < {sess.rate_bps:.6e}")
        into_dst = sum(v for (_i, j, _m, ll), v in flows.items() if ll == l and j == sess.dest)
        if into_dst < sess.rate_bps * (1.0 - tol):
            bad.append(f"demand: session {l} destination receives {into_dst:.6e} < {sess.rate_bps:.6e}")
        nodes = {n for (i, j, _m, ll) in flows if ll == l for n in (i, j)}
        for node in sorted(nodes - {sess.source, sess.dest}):
            out_n = sum(v for (i, _j, _m, ll), v in flows.items() if ll == l and i == node)
            in_n = sum(v for (_i, j, _m, ll), v in flows.items() if ll == l and j == node)
            if abs(out_n - in_n) > tol * max(1.0, sess.rate_bps):
                bad.append(f"conservation: session {l} node {node} in {in_n:.6e} != out {out_n:.6e}")

    # Span cap on both paths of every node.
    spans = node_spans(schedule, scenario)
    for node, direction in spans.over_cap:
        q = spans.tx(node) if direction == "tx" else spans.rx(node)
        bad.append(f"span cap: node {node} {direction} span {q / 1e6:.1f} MHz exceeds limit")

    return CheckReport(ok=not bad, violations=bad)
