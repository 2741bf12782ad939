"""Spectrum span computation from channel schedules.

A node occupying non-contiguous channels with a single front end must span
the whole gap between the outermost edges of its used channels, nulling
everything in between; the converter sampling rate then scales with that
span, not with the occupied bandwidth.  Two measures coexist:

* :func:`span_frequency` works on real band edges and is what evaluation,
  the greedy scheduler and all reports use.
* :func:`span_index` works on remapped integer channel indices and matches
  the linear encoding used inside the MILP.  On plans whose centers are
  exactly width-spaced the two agree; on irregular TV plans they can differ
  by a few MHz, which is documented and accepted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .scenario import Channel, Scenario, remap_channel_indices

__all__ = ["Schedule", "SpanResult", "span_frequency", "span_index", "node_spans"]


@dataclass(frozen=True)
class Schedule:
    """Binary link-channel assignment, stored as channel sets per directed link."""

    assignments: Mapping[tuple[int, int], frozenset[int]]

    @staticmethod
    def from_assignments(raw: Mapping[tuple[int, int], Iterable[int]]) -> "Schedule":
        return Schedule(
            assignments={pair: frozenset(chs) for pair, chs in raw.items() if chs}
        )

    def is_empty(self) -> bool:
        return not self.assignments

    def active_links(self) -> list[tuple[int, int]]:
        return sorted(self.assignments)

    def active_triples(self) -> list[tuple[int, int, int]]:
        out = []
        for (i, j), chans in sorted(self.assignments.items()):
            out.extend((i, j, m) for m in sorted(chans))
        return out

    def channels_of(self, tx: int, rx: int) -> frozenset[int]:
        return self.assignments.get((tx, rx), frozenset())

    def uses(self, tx: int, rx: int, channel_id: int) -> bool:
        return channel_id in self.channels_of(tx, rx)

    def tx_channels(self, node: int) -> frozenset[int]:
        chans: set[int] = set()
        for (i, _j), cs in self.assignments.items():
            if i == node:
                chans |= cs
        return frozenset(chans)

    def rx_channels(self, node: int) -> frozenset[int]:
        chans: set[int] = set()
        for (_i, j), cs in self.assignments.items():
            if j == node:
                chans |= cs
        return frozenset(chans)

    def nodes(self) -> set[int]:
        out: set[int] = set()
        for i, j in self.assignments:
            out.add(i)
            out.add(j)
        return out

    def half_duplex_violations(self) -> list[tuple[int, int]]:
        """(node, channel) pairs where a node uses one channel more than once."""
        usage: dict[tuple[int, int], int] = {}
        for (i, j), chans in self.assignments.items():
            for m in chans:
                usage[(i, m)] = usage.get((i, m), 0) + 1
                usage[(j, m)] = usage.get((j, m), 0) + 1
        return sorted(key for key, count in usage.items() if count > 1)

    def with_channel(self, tx: int, rx: int, channel_id: int) -> "Schedule":
        new = {pair: set(chs) for pair, chs in self.assignments.items()}
        new.setdefault((tx, rx), set()).add(channel_id)
        return Schedule.from_assignments(new)


@dataclass(frozen=True)
class SpanResult:
    """Per-node transmit/receive spans in Hz, plus any span-cap violations."""

    tx_hz: Mapping[int, float]
    rx_hz: Mapping[int, float]
    over_cap: tuple[tuple[int, str], ...] = field(default=())

    def tx(self, node: int) -> float:
        return self.tx_hz.get(node, 0.0)

    def rx(self, node: int) -> float:
        return self.rx_hz.get(node, 0.0)


def span_frequency(used: Iterable[Channel]) -> float:
    """Gap in Hz between the outermost edges of the used channels (0 if none)."""
    lows = []
    highs = []
    for c in used:
        lows.append(c.low_hz)
        highs.append(c.high_hz)
    if not lows:
        return 0.0
    return max(highs) - min(lows)


def span_index(used_indices: Iterable[int], guard_count: int, width_hz: float) -> float:
    """Span in Hz implied by integer model indices: width * (max - min + 1).

    ``guard_count`` is the constant that stands in for an unused channel when
    taking the minimum index; any value at least as large as every usable
    index reproduces the encoding used in the optimization model.
    """
    idx = list(used_indices)
    if not idx:
        return 0.0
    lo = min(min(idx), guard_count)
    hi = max(idx)
    return width_hz * (hi - lo + 1)


def node_spans(schedule: Schedule, scenario: Scenario) -> SpanResult:
    """Frequency spans of every node under a schedule; flags span-cap excesses.

    A violation of the hardware span cap is reported, not raised: callers
    decide whether the schedule is usable.
    """
    by_id = {c.id: c for c in scenario.channels}
    tx: dict[int, float] = {}
    rx: dict[int, float] = {}
    over: list[tuple[int, str]] = []
    for n in scenario.nodes:
        t = span_frequency(by_id[m] for m in schedule.tx_channels(n.id))
        r = span_frequency(by_id[m] for m in schedule.rx_channels(n.id))
        tx[n.id] = t
        rx[n.id] = r
        if t > scenario.max_span_hz * (1 + 1e-12):
            over.append((n.id, "tx"))
        if r > scenario.max_span_hz * (1 + 1e-12):
            over.append((n.id, "rx"))
    return SpanResult(tx_hz=tx, rx_hz=rx, over_cap=tuple(over))


def model_guard_count(scenario: Scenario) -> int:
    """Guard constant for index spans: the largest remapped index of the plan."""
    return max(remap_channel_indices(scenario.channels))
