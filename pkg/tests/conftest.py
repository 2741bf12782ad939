"""Shared fixtures and independent oracles for the test suite.

The oracles here deliberately share no code with the package: link power
allocation is done by closed-form capped waterfilling over exhaustive
support/clamp patterns, and global optima come from brute-force enumeration
of every schedule.  They are the reference the solvers are judged against.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
import pytest

from ncospan.power import PRESET_RADIOS, RadioProfile
from ncospan.scenario import (
    Channel,
    Link,
    Node,
    Scenario,
    Session,
    contiguous_plan,
    validate_scenario,
)


def make_p2p_scenario(
    gains_db,
    rate_bps=4e6,
    width_hz=3e6,
    noise_density=4e-21,
    max_tx_power=0.05,
    big_m=None,
    max_span_hz=None,
    radio=None,
    seed=3,
):
    """Two nodes, one link, len(gains_db) contiguous channels."""
    chans = contiguous_plan(len(gains_db), width_hz, first_center_hz=width_hz * 100 + width_hz / 2, first_id=1)
    ids = frozenset(c.id for c in chans)
    gains = {c.id: 10.0 ** (db / 10.0) for c, db in zip(chans, gains_db)}
    scenario = Scenario(
        nodes=(Node(1, 0.0, 0.0, ids), Node(2, 1000.0, 0.0, ids)),
        channels=chans,
        links=(Link(1, 2, gains),),
        sessions=(Session(1, 2, rate_bps),),
        noise_density=noise_density,
        interference_threshold=0.1 * noise_density * width_hz,
        max_tx_power=max_tx_power,
        big_m_power=big_m if big_m is not None else max_tx_power,
        max_span_hz=max_span_hz if max_span_hz is not None else (chans[-1].high_hz - chans[0].low_hz),
        radio=radio if radio is not None else PRESET_RADIOS["high-slope"],
        rng_seed=seed,
    )
    validate_scenario(scenario)
    return scenario


# ---------------------------------------------------------------------------
# Closed-form capped waterfilling (per-link oracle)
# ---------------------------------------------------------------------------


def waterfill_min_power(width_hz, noise_w, gains, caps_w, demand_bps):
    """Minimum total power delivering the demand over parallel channels.

    Exhausts every support/clamp pattern; free channels share a common water
    level solved in closed form.  Returns (total power, per-channel powers)
    or None when no pattern carries the demand.  Exact up to float error.
    """
    m_count = len(gains)
    if demand_bps <= 0:
        return 0.0, [0.0] * m_count
    floors = [noise_w / g for g in gains]
    best = None
    for support in range(1, 2 ** m_count):
        sup = [k for k in range(m_count) if support >> k & 1]
        for clamp_bits in range(2 ** len(sup)):
            clamped = [sup[i] for i in range(len(sup)) if clamp_bits >> i & 1]
            free = [k for k in sup if k not in clamped]
            cap_rate = sum(width_hz * math.log2(1.0 + gains[k] * caps_w[k] / noise_w) for k in clamped)
            rest = demand_bps - cap_rate
            powers = [0.0] * m_count
            for k in clamped:
                powers[k] = caps_w[k]
            if not free:
                if rest > 1e-9 * max(1.0, demand_bps):
                    continue
            else:
                if rest < 0:
                    continue
                log_mu = (rest / width_hz + sum(math.log2(floors[k]) for k in free)) / len(free)
                if log_mu > 300:
                    continue
                mu = 2.0 ** log_mu
                ok = True
                for k in free:
                    p = mu - floors[k]
                    if p < -1e-12 * floors[k] or p > caps_w[k] * (1 + 1e-9):
                        ok = False
                        break
                    powers[k] = max(0.0, min(p, caps_w[k]))
                if not ok:
                    continue
            total = sum(powers)
            if best is None or total < best[0] - 1e-18:
                best = (total, powers)
    return best


# ---------------------------------------------------------------------------
# Exhaustive schedule enumeration (global oracle)
# ---------------------------------------------------------------------------


@dataclass
class SmallInstance:
    scenario: Scenario
    link_demands: dict  # (tx, rx) -> forced aggregate rate, bit/s


def _circuit_power(scenario, active):
    """Fixed + span circuit power of a schedule, recomputed from raw edges."""
    radio = scenario.radio
    by_id = {c.id: c for c in scenario.channels}
    total = 0.0
    node_ids = [n.id for n in scenario.nodes]
    for node in node_ids:
        tx_ch = {m for (i, j, m) in active if i == node}
        rx_ch = {m for (i, j, m) in active if j == node}
        if tx_ch:
            lo = min(by_id[m].center_hz - by_id[m].width_hz / 2 for m in tx_ch)
            hi = max(by_id[m].center_hz + by_id[m].width_hz / 2 for m in tx_ch)
            total += radio.tx_fixed_total_w + 2.0 * radio.tx_slope_w_per_sps * (hi - lo)
        if rx_ch:
            lo = min(by_id[m].center_hz - by_id[m].width_hz / 2 for m in rx_ch)
            hi = max(by_id[m].center_hz + by_id[m].width_hz / 2 for m in rx_ch)
            total += radio.rx_fixed_total_w + 2.0 * radio.rx_slope_w_per_sps * (hi - lo)
    return total


def _schedule_ok(scenario, active):
    """Half-duplex and span-cap screening of an active triple set."""
    usage = {}
    for (i, j, m) in active:
        usage[(i, m)] = usage.get((i, m), 0) + 1
        usage[(j, m)] = usage.get((j, m), 0) + 1
    if any(v > 1 for v in usage.values()):
        return False
    by_id = {c.id: c for c in scenario.channels}
    for node in {n.id for n in scenario.nodes}:
        for chans in ({m for (i, _j, m) in active if i == node}, {m for (_i, j, m) in active if j == node}):
            if not chans:
                continue
            lo = min(by_id[m].low_hz for m in chans)
            hi = max(by_id[m].high_hz for m in chans)
            if hi - lo > scenario.max_span_hz * (1 + 1e-12):
                return False
    return True


def _triple_caps(scenario, active):
    caps = {}
    for (i, j, m) in active:
        cap = min(scenario.max_tx_power, scenario.big_m_power)
        for (k, h, mm) in active:
            if mm != m or (k, h) == (i, j):
                continue
            g = scenario.gain(i, h, m)
            if g is not None:
                cap = min(cap, scenario.interference_threshold / g)
        caps[(i, j, m)] = cap
    return caps


def exhaustive_best_power(instance: SmallInstance):
    """Brute-force optimum: every schedule, closed-form allocation per link.

    Returns (best total system power, best active set) or None when no
    schedule can carry the demands.
    """
    scenario = instance.scenario
    width = scenario.width_hz
    noise = scenario.noise_power()
    kpa = scenario.radio.amp_scale
    links = [(lk.tx, lk.rx) for lk in scenario.links]
    per_link_sets = []
    for (i, j) in links:
        chans = scenario.link_channels(i, j)
        subsets = []
        for r in range(len(chans) + 1):
            subsets.extend(itertools.combinations(chans, r))
        per_link_sets.append(subsets)

    best = None
    for combo in itertools.product(*per_link_sets):
        active = [(i, j, m) for (i, j), chans in zip(links, combo) for m in chans]
        demand_ok = all(
            chans or instance.link_demands.get((i, j), 0.0) <= 0
            for (i, j), chans in zip(links, combo)
        )
        if not demand_ok:
            continue
        if not _schedule_ok(scenario, active):
            continue
        caps = _triple_caps(scenario, active)
        total = _circuit_power(scenario, active)
        feasible = True
        for (i, j), chans in zip(links, combo):
            demand = instance.link_demands.get((i, j), 0.0)
            if not chans:
                continue
            gains = [scenario.gain(i, j, m) for m in chans]
            cap_list = [caps[(i, j, m)] for m in chans]
            out = waterfill_min_power(width, noise, gains, cap_list, demand)
            if out is None:
                feasible = False
                break
            total += kpa * out[0]
        if not feasible:
            continue
        if best is None or total < best[0]:
            best = (total, tuple(sorted(active)))
    return best


# ---------------------------------------------------------------------------
# Random small instances with forced single-path routing
# ---------------------------------------------------------------------------


def random_small_instance(rng: np.random.Generator) -> SmallInstance:
    """Chains, forks and joins of at most 3 links whose routes are forced."""
    width = float(rng.choice([1e6, 3e6]))
    m_count = int(rng.integers(2, 5))
    chans = contiguous_plan(m_count, width, first_center_hz=width * 200 + width / 2, first_id=1)
    topology = rng.integers(0, 5)
    if topology == 0:
        node_ids = [1, 2]
        edges = [(1, 2)]
        candidates = [(1, 2)]
    elif topology == 1:
        node_ids = [1, 2, 3]
        edges = [(1, 2), (2, 3)]
        candidates = [(1, 3), (1, 2), (2, 3)]
    elif topology == 2:
        node_ids = [1, 2, 3]
        edges = [(1, 2), (1, 3)]
        candidates = [(1, 2), (1, 3)]
    elif topology == 3:
        node_ids = [1, 2, 3]
        edges = [(1, 3), (2, 3)]
        candidates = [(1, 3), (2, 3)]
    else:
        node_ids = [1, 2, 3, 4]
        edges = [(1, 2), (2, 3), (3, 4)]
        candidates = [(1, 4), (1, 2), (2, 3), (3, 4), (1, 3), (2, 4)]

    n_sessions = min(int(rng.integers(1, 3)), len(candidates))
    picks = [candidates[k] for k in rng.choice(len(candidates), size=n_sessions, replace=False)]
    sessions = []
    for (s, d) in picks:
        eff = rng.uniform(0.4, 1.5)
        sessions.append(Session(source=s, dest=d, rate_bps=eff * width))

    chan_ids = set(c.id for c in chans)
    node_channels = {n: set(chan_ids) for n in node_ids}
    if m_count >= 3 and rng.random() < 0.3:
        victim = int(rng.choice(node_ids))
        dropped = int(rng.choice(sorted(chan_ids)))
        node_channels[victim].discard(dropped)

    nodes = tuple(Node(n, float(10 * n), 0.0, frozenset(node_channels[n])) for n in node_ids)
    links = []
    for (i, j) in edges:
        shared = sorted(node_channels[i] & node_channels[j])
        gains = {m: 10.0 ** (rng.uniform(-118.0, -104.0) / 10.0) for m in shared}
        links.append(Link(i, j, gains))

    # Forced aggregates: each session has exactly one path in these graphs.
    path_of = {}
    for (s, d) in picks:
        if (s, d) in edges:
            path_of[(s, d)] = [(s, d)]
        else:
            chain = {(1, 3): [(1, 2), (2, 3)], (1, 4): [(1, 2), (2, 3), (3, 4)], (2, 4): [(2, 3), (3, 4)]}
            path_of[(s, d)] = chain[(s, d)]
    demands = {}
    for sess, (s, d) in zip(sessions, picks):
        for e in path_of[(s, d)]:
            demands[e] = demands.get(e, 0.0) + sess.rate_bps

    noise_density = 4e-21
    noise = noise_density * width
    # Cap drawn around the worst single-channel demand so it sometimes bites.
    worst = 0.0
    for (i, j), dem in demands.items():
        lk = next(l for l in links if (l.tx, l.rx) == (i, j))
        gmin = min(lk.gains.values())
        worst = max(worst, (noise / gmin) * (2.0 ** (dem / width) - 1.0))
    p_max = worst * float(rng.choice([0.7, 1.5, 3.0])) if worst > 0 else 1.0
    big_m = p_max * float(rng.choice([1.0, 2.0]))
    span_cap = (chans[-1].high_hz - chans[0].low_hz) if rng.random() < 0.7 else 2.0 * width

    base = PRESET_RADIOS["high-slope"]
    radio = base.scaled_slopes(10.0 ** rng.uniform(-2.0, 0.0))

    scenario = Scenario(
        nodes=nodes,
        channels=chans,
        links=tuple(links),
        sessions=tuple(sessions),
        noise_density=noise_density,
        interference_threshold=0.1 * noise,
        max_tx_power=p_max,
        big_m_power=big_m,
        max_span_hz=span_cap,
        radio=radio,
        rng_seed=int(rng.integers(0, 2**31)),
    )
    validate_scenario(scenario)
    return SmallInstance(scenario=scenario, link_demands=demands)


@pytest.fixture(scope="session")
def p2p_two_channel():
    return make_p2p_scenario([-110.0, -105.0])
