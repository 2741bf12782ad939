"""Joint scheduling/power/routing optimization as a mixed-integer program.

:func:`build_milp` assembles the full cross-layer program: binary
link-channel assignments, transmit powers coupled to scheduling, per-session
flows with conservation and minimum-rate rows, link capacities relaxed
through the four-segment log hull, per-node span variables tied to activity
through the linear index encoding, and the system-power objective.

:func:`solve_bnb` runs branch-and-bound on that program.  Because the hull
overestimates capacity, the relaxation value of an integral node is only a
lower bound on what that schedule really costs; each integral node is
therefore priced exactly by re-optimizing flows at the fixed schedule with
true convex channel costs (:func:`allocate_fixed_schedule`) and recomputing
powers with :func:`repair_powers`.  Subtrees are pruned only when their LP
bound cannot beat the certified incumbent, which keeps the search exact.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .power import PowerBreakdown, node_power
from .relaxation import build_hull, linearize_span_constraints
from .scenario import Scenario, remap_channel_indices
from .solver import BnbLimits, BnbResult, LinearProgram, branch_and_bound, solve_lp
from .span import Schedule, SpanResult, model_guard_count, node_spans

__all__ = [
    "VariableMap",
    "Solution",
    "RepairError",
    "build_milp",
    "solve_bnb",
    "repair_powers",
    "allocate_fixed_schedule",
    "power_caps",
    "breakdown_for",
]

log = logging.getLogger(__name__)

Triple = tuple[int, int, int]  # (tx node, rx node, channel id)


class RepairError(ValueError):
    """Repaired powers violate a coupling or interference limit."""


@dataclass
class VariableMap:
    """Bijection between model entities and LP column indices.

    The LP works in scaled units so its matrix stays well conditioned:
    flows and capacities are per channel bandwidth (``flow_scale`` bit/s per
    unit), transmit powers per the cap (``power_scale`` W per unit), spans
    per channel width (``span_scale`` Hz per unit).  Fixed-power variables
    and the total are plain watts.
    """

    x: dict[Triple, int] = field(default_factory=dict)
    p: dict[Triple, int] = field(default_factory=dict)
    s: dict[Triple, int] = field(default_factory=dict)
    c: dict[Triple, int] = field(default_factory=dict)
    f: dict[tuple[int, int, int, int], int] = field(default_factory=dict)  # (i, j, m, session)
    x_tx: dict[tuple[int, int], int] = field(default_factory=dict)  # (node, channel)
    x_rx: dict[tuple[int, int], int] = field(default_factory=dict)
    q_tx: dict[int, int] = field(default_factory=dict)
    q_rx: dict[int, int] = field(default_factory=dict)
    fixed_tx: dict[int, int] = field(default_factory=dict)
    fixed_rx: dict[int, int] = field(default_factory=dict)
    p_total: int = -1
    flow_scale: float = 1.0
    power_scale: float = 1.0
    span_scale: float = 1.0
    row_families: dict[str, int] = field(default_factory=dict)

    @property
    def binaries(self) -> list[int]:
        return sorted(self.x.values())

    def schedule_from_assignment(self, assignment: Mapping[int, int]) -> Schedule:
        chosen: dict[tuple[int, int], set[int]] = {}
        for (i, j, m), var in self.x.items():
            if assignment.get(var, 0) == 1:
                chosen.setdefault((i, j), set()).add(m)
        return Schedule.from_assignments(chosen)


def _session_has_path(scenario: Scenario, source: int, dest: int) -> bool:
    adjacency: dict[int, list[int]] = {}
    for lk in scenario.links:
        if scenario.link_channels(lk.tx, lk.rx):
            adjacency.setdefault(lk.tx, []).append(lk.rx)
    seen = {source}
    frontier = [source]
    while frontier:
        nxt = []
        for u in frontier:
            for v in adjacency.get(u, ()):
                if v not in seen:
                    seen.add(v)
                    nxt.append(v)
        frontier = nxt
    return dest in seen


def build_milp(scenario: Scenario) -> tuple[LinearProgram, VariableMap]:
    """Assemble the joint optimization as a linear program over binary x.

    Row counts follow a closed form in the scenario sets; see
    :func:`expected_row_counts`, which tests cross-check against the rows
    actually emitted (family counts are recorded in the returned map).
    """
    lp = LinearProgram()
    vm = VariableMap()
    radio = scenario.radio
    width = scenario.width_hz
    noise = scenario.noise_power()
    kpa = radio.amp_scale
    p_unit = scenario.max_tx_power
    couple = min(scenario.big_m_power, scenario.max_tx_power) / p_unit
    ln2 = math.log(2.0)
    vm.flow_scale = width
    vm.power_scale = p_unit
    vm.span_scale = width

    links = sorted(scenario.links, key=lambda lk: (lk.tx, lk.rx))
    link_channels = {(lk.tx, lk.rx): scenario.link_channels(lk.tx, lk.rx) for lk in links}
    indices = remap_channel_indices(scenario.channels)
    index_of = {ch.id: idx for ch, idx in zip(scenario.channels, indices)}
    guard = model_guard_count(scenario)

    for sess_idx, sess in enumerate(scenario.sessions):
        if not _session_has_path(scenario, sess.source, sess.dest):
            log.warning("session %d (%d->%d) has no path: program will be infeasible", sess_idx, sess.source, sess.dest)

    # Link-channel variables.
    for lk in links:
        for m in link_channels[(lk.tx, lk.rx)]:
            t = (lk.tx, lk.rx, m)
            g = lk.gains[m]
            s_cap = scenario.max_tx_power * g / noise
            vm.x[t] = lp.add_variable(0.0, 1.0, name=f"x[{lk.tx},{lk.rx},{m}]")
            vm.p[t] = lp.add_variable(0.0, 1.0, name=f"p[{lk.tx},{lk.rx},{m}]")
            vm.s[t] = lp.add_variable(0.0, s_cap, name=f"s[{lk.tx},{lk.rx},{m}]")
            vm.c[t] = lp.add_variable(0.0, math.log2(1.0 + s_cap), name=f"c[{lk.tx},{lk.rx},{m}]")

    # Session flows, excluding hops out of a destination or into a source.
    for sess_idx, sess in enumerate(scenario.sessions):
        for lk in links:
            if lk.tx == sess.dest or lk.rx == sess.source:
                continue
            for m in link_channels[(lk.tx, lk.rx)]:
                vm.f[(lk.tx, lk.rx, m, sess_idx)] = lp.add_variable(
                    0.0, None, name=f"f[{lk.tx},{lk.rx},{m},{sess_idx}]"
                )

    # Node activity indicators (continuous: pushed to the max of their link
    # variables by the rows below and pulled down by the objective).
    tx_usable: dict[int, list[int]] = {}
    rx_usable: dict[int, list[int]] = {}
    for (i, j), chans in link_channels.items():
        for m in chans:
            tx_usable.setdefault(i, []).append(m)
            rx_usable.setdefault(j, []).append(m)
    for node in sorted(tx_usable):
        for m in sorted(set(tx_usable[node])):
            vm.x_tx[(node, m)] = lp.add_variable(0.0, 1.0, name=f"xt[{node},{m}]")
    for node in sorted(rx_usable):
        for m in sorted(set(rx_usable[node])):
            vm.x_rx[(node, m)] = lp.add_variable(0.0, 1.0, name=f"xr[{node},{m}]")

    span_cap_u = scenario.max_span_hz / width
    for node in sorted(tx_usable):
        vm.q_tx[node] = lp.add_variable(0.0, span_cap_u, name=f"qt[{node}]")
        vm.fixed_tx[node] = lp.add_variable(0.0, radio.tx_fixed_total_w, name=f"a1[{node}]")
    for node in sorted(rx_usable):
        vm.q_rx[node] = lp.add_variable(0.0, span_cap_u, name=f"qr[{node}]")
        vm.fixed_rx[node] = lp.add_variable(0.0, radio.rx_fixed_total_w, name=f"b1[{node}]")

    vm.p_total = lp.add_variable(0.0, None, objective=1.0, name="p_total")

    fam = vm.row_families
    for family in (
        "activity",
        "half_duplex",
        "interference",
        "coupling",
        "snr_def",
        "hull",
        "capacity",
        "flow_demand",
        "endpoint_activity",
        "flow_conservation",
        "fixed_power",
        "span",
        "span_count",
        "total_power",
    ):
        fam[family] = 0

    def add(coeffs, sense, rhs, family, name=""):
        lp.add_constraint(coeffs, sense, rhs, name=name)
        fam[family] = fam.get(family, 0) + 1

    # Activity coupling: a node transmits (receives) on a channel whenever any
    # of its links does.
    for (i, j, m), xv in vm.x.items():
        add({vm.x_tx[(i, m)]: 1.0, xv: -1.0}, ">=", 0.0, "activity", f"xt[{i},{m}]>=x[{i},{j},{m}]")
        add({vm.x_rx[(j, m)]: 1.0, xv: -1.0}, ">=", 0.0, "activity", f"xr[{j},{m}]>=x[{i},{j},{m}]")

    # Half duplex: one use of a channel per node.
    for node in sorted(scenario.nodes, key=lambda n: n.id):
        for m in sorted(node.channels):
            coeffs: dict[int, float] = {}
            for (i, j, mm), xv in vm.x.items():
                if mm == m and (i == node.id or j == node.id):
                    coeffs[xv] = 1.0
            if coeffs:
                add(coeffs, "<=", 1.0, "half_duplex", f"hd[{node.id},{m}]")

    # Protected-receiver interference rows; vacuous rows (allowed interference
    # power above the transmit cap) are dropped.
    for (i, j, m), xv in vm.x.items():
        for (k, h, mm), pv in vm.p.items():
            if mm != m or (k, h) == (i, j):
                continue
            g_kj = scenario.gain(k, j, m)
            if g_kj is None:
                continue
            coef = 1.0 - scenario.interference_threshold / (g_kj * p_unit)
            if coef <= 0.0:
                continue
            add({pv: 1.0, xv: coef}, "<=", 1.0, "interference", f"int[{k},{h}|{i},{j},{m}]")

    # Power/scheduling coupling, plus the implied capacity activation: with
    # binary x, no schedule means no power and hence no capacity, so
    # c <= c_max * x holds at every integer point and tightens the relaxation.
    for t, xv in vm.x.items():
        add({vm.p[t]: 1.0, xv: -couple}, "<=", 0.0, "coupling", f"couple[{t}]")
        add({vm.c[t]: 1.0, xv: -lp.high[vm.c[t]]}, "<=", 0.0, "coupling", f"cap_act[{t}]")

    # SNR definition and capacity hull.
    for t, lk_gain in ((t, scenario.gain(t[0], t[1], t[2])) for t in vm.x):
        s_cap = p_unit * lk_gain / noise
        add({vm.s[t]: 1.0, vm.p[t]: -s_cap}, "==", 0.0, "snr_def", f"snr[{t}]")
        hull = build_hull(0.0, s_cap)
        for seg, row in enumerate(hull.rows):
            add(
                {vm.c[t]: row.coef_c * ln2, vm.s[t]: row.coef_s},
                row.sense,
                row.rhs,
                "hull",
                f"hull{seg}[{t}]",
            )

    # Aggregate flow on a link-channel is limited by its capacity.
    for t in vm.x:
        coeffs = {vm.c[t]: -1.0}
        for sess_idx in range(len(scenario.sessions)):
            fv = vm.f.get((t[0], t[1], t[2], sess_idx))
            if fv is not None:
                coeffs[fv] = 1.0
        add(coeffs, "<=", 0.0, "capacity", f"cap[{t}]")

    # Session demand and conservation.  A positive demand also means the
    # source transmits somewhere and the destination receives somewhere,
    # which every integer schedule satisfies; stating it keeps the
    # relaxation from serving demand with vanishing activity.
    endpoint_rows: set[tuple[str, int]] = set()
    for sess_idx, sess in enumerate(scenario.sessions):
        rate_u = sess.rate_bps / width
        out_src = {fv: 1.0 for (i, _j, _m, l), fv in vm.f.items() if l == sess_idx and i == sess.source}
        add(out_src, ">=", rate_u, "flow_demand", f"src[{sess_idx}]")
        into_dst = {fv: 1.0 for (_i, j, _m, l), fv in vm.f.items() if l == sess_idx and j == sess.dest}
        add(into_dst, ">=", rate_u, "flow_demand", f"dst[{sess_idx}]")
        if sess.rate_bps > 0 and ("tx", sess.source) not in endpoint_rows:
            endpoint_rows.add(("tx", sess.source))
            coeffs = {xv: 1.0 for (n, _m), xv in vm.x_tx.items() if n == sess.source}
            if coeffs:
                add(coeffs, ">=", 1.0, "endpoint_activity", f"src_active[{sess.source}]")
        if sess.rate_bps > 0 and ("rx", sess.dest) not in endpoint_rows:
            endpoint_rows.add(("rx", sess.dest))
            coeffs = {xv: 1.0 for (n, _m), xv in vm.x_rx.items() if n == sess.dest}
            if coeffs:
                add(coeffs, ">=", 1.0, "endpoint_activity", f"dst_active[{sess.dest}]")
        for node in sorted(n.id for n in scenario.nodes):
            if node in (sess.source, sess.dest):
                continue
            coeffs = {}
            for (i, j, _m, l), fv in vm.f.items():
                if l != sess_idx:
                    continue
                if i == node:
                    coeffs[fv] = coeffs.get(fv, 0.0) + 1.0
                if j == node:
                    coeffs[fv] = coeffs.get(fv, 0.0) - 1.0
            if coeffs:
                add(coeffs, "==", 0.0, "flow_conservation", f"cons[{sess_idx},{node}]")

    # Fixed circuit power engages when any channel is active on a path.
    for (node, m), xtv in vm.x_tx.items():
        add({vm.fixed_tx[node]: 1.0, xtv: -radio.tx_fixed_total_w}, ">=", 0.0, "fixed_power", f"a1[{node},{m}]")
    for (node, m), xrv in vm.x_rx.items():
        add({vm.fixed_rx[node]: 1.0, xrv: -radio.rx_fixed_total_w}, ">=", 0.0, "fixed_power", f"b1[{node},{m}]")

    # Span lower bounds over remapped channel indices (span unit: one width).
    # Channels do not overlap, so any k used channels span at least k widths;
    # that counting row is valid alongside the pairwise index encoding and
    # keeps the relaxation honest when activity spreads thinly.
    for node, qv in vm.q_tx.items():
        avail = sorted(m for (n, m) in vm.x_tx if n == node)
        rows = linearize_span_constraints([index_of[m] for m in avail], guard, 1.0)
        idx_to_chan = {index_of[m]: m for m in avail}
        for r_i, row in enumerate(rows):
            coeffs = {qv: 1.0}
            for idx, coef in row.x_coeffs.items():
                coeffs[vm.x_tx[(node, idx_to_chan[idx])]] = coef
            add(coeffs, ">=", row.rhs, "span", f"span_t[{node},{r_i}]")
        count_row = {qv: 1.0}
        for m in avail:
            count_row[vm.x_tx[(node, m)]] = -1.0
        add(count_row, ">=", 0.0, "span_count", f"span_count_t[{node}]")
    for node, qv in vm.q_rx.items():
        avail = sorted(m for (n, m) in vm.x_rx if n == node)
        rows = linearize_span_constraints([index_of[m] for m in avail], guard, 1.0)
        idx_to_chan = {index_of[m]: m for m in avail}
        for r_i, row in enumerate(rows):
            coeffs = {qv: 1.0}
            for idx, coef in row.x_coeffs.items():
                coeffs[vm.x_rx[(node, idx_to_chan[idx])]] = coef
            add(coeffs, ">=", row.rhs, "span", f"span_r[{node},{r_i}]")
        count_row = {qv: 1.0}
        for m in avail:
            count_row[vm.x_rx[(node, m)]] = -1.0
        add(count_row, ">=", 0.0, "span_count", f"span_count_r[{node}]")

    # Total system power, in watts.
    coeffs = {vm.p_total: -1.0}
    for node, var in vm.fixed_tx.items():
        coeffs[var] = 1.0
    for node, var in vm.fixed_rx.items():
        coeffs[var] = 1.0
    for node, var in vm.q_tx.items():
        coeffs[var] = 2.0 * radio.tx_slope_w_per_sps * width
    for node, var in vm.q_rx.items():
        coeffs[var] = 2.0 * radio.rx_slope_w_per_sps * width
    for t, pv in vm.p.items():
        coeffs[pv] = kpa * p_unit
    add(coeffs, "<=", 0.0, "total_power", "p_total_def")

    return lp, vm


def expected_row_counts(scenario: Scenario) -> dict[str, int]:
    """Closed-form row counts of :func:`build_milp` from the scenario sets."""
    link_channels = {(lk.tx, lk.rx): scenario.link_channels(lk.tx, lk.rx) for lk in scenario.links}
    triples = [(i, j, m) for (i, j), chans in link_channels.items() for m in chans]
    t_count = len(triples)
    tx_usable: dict[int, set[int]] = {}
    rx_usable: dict[int, set[int]] = {}
    for (i, j), chans in link_channels.items():
        tx_usable.setdefault(i, set()).update(chans)
        rx_usable.setdefault(j, set()).update(chans)

    half_duplex = 0
    for node in scenario.nodes:
        for m in node.channels:
            if any(m == mm and (node.id in (i, j)) for (i, j, mm) in triples):
                half_duplex += 1

    interference = 0
    for (i, j, m) in triples:
        for (k, h, mm) in triples:
            if mm != m or (k, h) == (i, j):
                continue
            g = scenario.gain(k, j, m)
            if g is None:
                continue
            if scenario.max_tx_power - scenario.interference_threshold / g > 0.0:
                interference += 1

    flows = 0
    conservation = 0
    endpoint = set()
    for sess in scenario.sessions:
        pairs = [
            (i, j)
            for (i, j), chans in link_channels.items()
            if chans and i != sess.dest and j != sess.source
        ]
        flows += sum(len(link_channels[pr]) for pr in pairs)
        touched = {n for pr in pairs for n in pr}
        conservation += len(touched - {sess.source, sess.dest})
        if sess.rate_bps > 0:
            if sess.source in tx_usable:
                endpoint.add(("tx", sess.source))
            if sess.dest in rx_usable:
                endpoint.add(("rx", sess.dest))

    span = sum(len(chs) ** 2 for chs in tx_usable.values()) + sum(len(chs) ** 2 for chs in rx_usable.values())
    return {
        "activity": 2 * t_count,
        "half_duplex": half_duplex,
        "interference": interference,
        "coupling": 2 * t_count,
        "snr_def": t_count,
        "hull": 4 * t_count,
        "capacity": t_count,
        "flow_demand": 2 * len(scenario.sessions),
        "endpoint_activity": len(endpoint),
        "flow_conservation": conservation,
        "fixed_power": sum(len(v) for v in tx_usable.values()) + sum(len(v) for v in rx_usable.values()),
        "span": span,
        "span_count": len(tx_usable) + len(rx_usable),
        "total_power": 1,
    }


# ---------------------------------------------------------------------------
# Fixed-schedule evaluation
# ---------------------------------------------------------------------------


def power_caps(scenario: Scenario, schedule: Schedule) -> dict[Triple, float]:
    """Per-triple transmit power caps implied by limits and the active schedule.

    A transmitter sharing a channel with another active link may not deliver
    more than the interference threshold at that link's receiver; on top sit
    the global cap and the coupling constant.
    """
    caps: dict[Triple, float] = {}
    triples = schedule.active_triples()
    for (i, j, m) in triples:
        cap = min(scenario.max_tx_power, scenario.big_m_power)
        for (k, h, mm) in triples:
            if mm != m or (k, h) == (i, j):
                continue
            g_ih = scenario.gain(i, h, m)
            if g_ih is not None:
                cap = min(cap, scenario.interference_threshold / g_ih)
        caps[(i, j, m)] = cap
    return caps


def repair_powers(
    flows: Mapping[tuple[int, int, int, int], float],
    schedule: Schedule,
    scenario: Scenario,
) -> dict[Triple, float]:
    """Recompute powers from flows so capacity meets the flow exactly.

    Keeps flows and scheduling untouched and inverts the capacity curve per
    active link-channel.  Raises :class:`RepairError` when a repaired power
    exceeds the coupling constant, the transmit cap or an interference limit,
    or when flow rides an unscheduled link-channel.
    """
    width = scenario.width_hz
    noise = scenario.noise_power()
    agg: dict[Triple, float] = {t: 0.0 for t in schedule.active_triples()}
    for (i, j, m, _l), val in flows.items():
        if val <= 0.0:
            continue
        t = (i, j, m)
        if t not in agg:
            raise RepairError(f"flow on unscheduled link-channel {t}")
        agg[t] += val
    caps = power_caps(scenario, schedule)
    powers: dict[Triple, float] = {}
    for t, total in agg.items():
        g = scenario.gain(t[0], t[1], t[2])
        if g is None:
            raise RepairError(f"schedule uses link-channel {t} with no defined gain")
        p = (noise / g) * (2.0 ** (total / width) - 1.0)
        # Tolerance absorbs LP-level feasibility noise in the flows.
        if p > caps[t] * (1.0 + 1e-6) + 1e-30:
            raise RepairError(f"repaired power {p:.3e} W exceeds cap {caps[t]:.3e} W on {t}")
        powers[t] = min(p, caps[t])
    return powers


@dataclass
class Allocation:
    status: str  # optimal | infeasible
    flows: dict[tuple[int, int, int, int], float] = field(default_factory=dict)
    aggregates: dict[Triple, float] = field(default_factory=dict)
    powers: dict[Triple, float] = field(default_factory=dict)
    transmit_rf_w: float = 0.0


def allocate_fixed_schedule(scenario: Scenario, schedule: Schedule) -> Allocation:
    """Optimal flow splitting and powers for a frozen schedule.

    With the binary assignment fixed, the program reduces to a convex
    minimization of amplifier power over the flow polytope.  It is solved as
    a sequence of LPs: the convex power-vs-flow curve of each active
    link-channel is under-approximated by tangents that are refined at the
    current iterate until the linearized cost agrees with the true cost.
    Powers in the result come from :func:`repair_powers`, so capacities equal
    aggregate flows exactly.
    """
    width = scenario.width_hz
    noise = scenario.noise_power()
    kpa = scenario.radio.amp_scale
    triples = schedule.active_triples()
    if not triples:
        if any(s.rate_bps > 0 for s in scenario.sessions):
            return Allocation(status="infeasible")
        return Allocation(status="optimal")

    # Dimensionless formulation keeps the LP well scaled: flows in units of
    # the channel bandwidth, each triple's power in units of noise/gain, so
    # the curve is 2**u - 1 with O(1) coefficients everywhere.
    caps = power_caps(scenario, schedule)
    gains = {}
    u_cap = {}
    for t in triples:
        g = scenario.gain(t[0], t[1], t[2])
        if g is None:
            return Allocation(status="infeasible")
        gains[t] = g
        cap = max(caps[t], 0.0)
        u_cap[t] = math.log2(1.0 + gains[t] * cap / noise)

    obj_scale = max(noise / gains[t] for t in triples)

    def curve(u: float) -> float:
        return 2.0 ** u - 1.0

    def slope(u: float) -> float:
        return math.log(2.0) * 2.0 ** u

    lp = LinearProgram()
    f_var: dict[tuple[int, int, int, int], int] = {}
    agg_var: dict[Triple, int] = {}
    pow_var: dict[Triple, int] = {}
    for t in triples:
        agg_var[t] = lp.add_variable(0.0, u_cap[t], name=f"F{t}")
        pow_var[t] = lp.add_variable(0.0, None, objective=(noise / gains[t]) / obj_scale, name=f"P{t}")
    for sess_idx, sess in enumerate(scenario.sessions):
        for (i, j, m) in triples:
            if i == sess.dest or j == sess.source:
                continue
            f_var[(i, j, m, sess_idx)] = lp.add_variable(0.0, None, name=f"f[{i},{j},{m},{sess_idx}]")

    for t in triples:
        coeffs = {agg_var[t]: -1.0}
        for sess_idx in range(len(scenario.sessions)):
            fv = f_var.get((t[0], t[1], t[2], sess_idx))
            if fv is not None:
                coeffs[fv] = 1.0
        lp.add_constraint(coeffs, "==", 0.0)

    for sess_idx, sess in enumerate(scenario.sessions):
        rate = sess.rate_bps / width
        src = {fv: 1.0 for (i, _j, _m, l), fv in f_var.items() if l == sess_idx and i == sess.source}
        if not src and rate > 0:
            return Allocation(status="infeasible")
        lp.add_constraint(src, ">=", rate)
        dst = {fv: 1.0 for (_i, j, _m, l), fv in f_var.items() if l == sess_idx and j == sess.dest}
        if not dst and rate > 0:
            return Allocation(status="infeasible")
        lp.add_constraint(dst, ">=", rate)
        nodes = {n for (i, j, _m, l) in f_var if l == sess_idx for n in (i, j)}
        for node in sorted(nodes - {sess.source, sess.dest}):
            coeffs = {}
            for (i, j, _m, l), fv in f_var.items():
                if l != sess_idx:
                    continue
                if i == node:
                    coeffs[fv] = coeffs.get(fv, 0.0) + 1.0
                if j == node:
                    coeffs[fv] = coeffs.get(fv, 0.0) - 1.0
            if coeffs:
                lp.add_constraint(coeffs, "==", 0.0)

    def add_cut(t: Triple, at: float) -> None:
        k = slope(at)
        lp.add_constraint({pow_var[t]: 1.0, agg_var[t]: -k}, ">=", curve(at) - k * at)

    for t in triples:
        add_cut(t, 0.0)
        if u_cap[t] > 0.0:
            add_cut(t, u_cap[t])

    def scaled_cost(x: np.ndarray) -> float:
        return sum((noise / gains[t]) / obj_scale * curve(x[agg_var[t]]) for t in triples)

    best: tuple[float, np.ndarray] | None = None
    best_gap = math.inf
    stalled = 0
    for _ in range(400):
        res = solve_lp(lp)
        if res.status == "infeasible":
            return Allocation(status="infeasible")
        if res.status != "optimal":
            raise RuntimeError(f"fixed-schedule allocation LP failed: {res.status} {res.message}")
        x = res.x
        true_cost = scaled_cost(x)
        if best is None or true_cost < best[0]:
            best = (true_cost, x)
        gap = true_cost - res.objective
        scale = max(1e-6, true_cost)
        if gap <= 1e-7 * scale:
            break
        # The LP eventually hits its own numerical floor; accept a slightly
        # larger gap once progress stops.
        if gap < 0.9 * best_gap:
            best_gap = gap
            stalled = 0
        else:
            stalled += 1
            if stalled >= 20 and gap <= 1e-6 * scale:
                break
        for t in triples:
            add_cut(t, x[agg_var[t]])
    else:
        raise RuntimeError("fixed-schedule allocation did not converge")

    x = best[1]
    alloc_flows = {key: float(x[var]) * width for key, var in f_var.items() if x[var] * width > 1e-9}
    powers = repair_powers(alloc_flows, schedule, scenario)
    aggregates = {t: float(x[agg_var[t]]) * width for t in triples}
    return Allocation(
        status="optimal",
        flows=alloc_flows,
        aggregates=aggregates,
        powers=powers,
        transmit_rf_w=kpa * sum(powers.values()),
    )


def breakdown_for(scenario: Scenario, schedule: Schedule, powers: Mapping[Triple, float]) -> PowerBreakdown:
    """System-power breakdown of a solution, using frequency spans."""
    spans = node_spans(schedule, scenario)
    total = PowerBreakdown()
    for n in scenario.nodes:
        tx_ch = schedule.tx_channels(n.id)
        rx_ch = schedule.rx_channels(n.id)
        tx_p = [p for (i, _j, _m), p in powers.items() if i == n.id]
        total = total + node_power(
            scenario.radio,
            spans.tx(n.id),
            spans.rx(n.id),
            tx_active=bool(tx_ch),
            rx_active=bool(rx_ch),
            tx_powers_w=tx_p,
        )
    return total


# ---------------------------------------------------------------------------
# Branch-and-bound pipeline
# ---------------------------------------------------------------------------


@dataclass
class Solution:
    """A solver outcome: schedule, allocation, spans, power and solver stats."""

    method: str
    status: str  # solved | limit | infeasible
    schedule: Schedule | None = None
    powers: dict[Triple, float] = field(default_factory=dict)
    flows: dict[tuple[int, int, int, int], float] = field(default_factory=dict)
    spans: SpanResult | None = None
    breakdown: PowerBreakdown | None = None
    bnb: BnbResult | None = None
    warnings: list[str] = field(default_factory=list)
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def objective_w(self) -> float | None:
        return None if self.breakdown is None else self.breakdown.total_w


def evaluate_schedule(scenario: Scenario, schedule: Schedule) -> tuple[float, dict[str, Any]] | None:
    """Certified system power of a schedule, or None when it cannot carry the demand."""
    if schedule.half_duplex_violations():
        return None
    spans = node_spans(schedule, scenario)
    if spans.over_cap:
        return None
    alloc = allocate_fixed_schedule(scenario, schedule)
    if alloc.status != "optimal":
        return None
    breakdown = breakdown_for(scenario, schedule, alloc.powers)
    payload = {
        "schedule": schedule,
        "flows": alloc.flows,
        "powers": alloc.powers,
        "breakdown": breakdown,
    }
    return breakdown.total_w, payload


def solve_bnb(
    scenario: Scenario,
    limits: BnbLimits | None = None,
    warm_start: Solution | None = None,
    method_name: str = "bnb",
) -> Solution:
    """Branch-and-bound system-power minimization with feasibility repair."""
    lp, vm = build_milp(scenario)

    def evaluator(assignment: Mapping[int, int], _x: np.ndarray):
        return evaluate_schedule(scenario, vm.schedule_from_assignment(assignment))

    warm = None
    if warm_start is not None and warm_start.schedule is not None and warm_start.breakdown is not None:
        from .check import check_solution

        assignment = {var: 0 for var in vm.x.values()}
        for t in warm_start.schedule.active_triples():
            var = vm.x.get(t)
            if var is None:
                assignment = None
                break
            assignment[var] = 1
        # A warm incumbent prunes the search, so it must be verified feasible.
        if assignment is not None and check_solution(
            scenario, warm_start.schedule, warm_start.powers, warm_start.flows
        ).ok:
            payload = {
                "schedule": warm_start.schedule,
                "flows": warm_start.flows,
                "powers": warm_start.powers,
                "breakdown": warm_start.breakdown,
            }
            warm = (warm_start.breakdown.total_w, assignment, payload)

    res = branch_and_bound(lp, vm.binaries, limits=limits, incumbent_evaluator=evaluator, warm_start=warm)

    if res.objective is None:
        status = "infeasible" if res.status == "infeasible" else "limit"
        return Solution(method=method_name, status=status, bnb=res)

    payload = res.incumbent_data
    schedule = payload["schedule"]
    return Solution(
        method=method_name,
        status="solved" if res.status in ("optimal", "gap-limit") else "limit",
        schedule=schedule,
        powers=payload["powers"],
        flows=payload["flows"],
        spans=node_spans(schedule, scenario),
        breakdown=payload["breakdown"],
        bnb=res,
    )
