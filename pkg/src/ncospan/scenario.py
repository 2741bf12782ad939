"""Network scenario model: nodes, channels, links, sessions and limits.

A :class:`Scenario` is the immutable input to every solver in this package.
It bundles the physical layer (channel plan, per-link per-channel power
gains), the traffic layer (sessions with minimum rates), the radio hardware
profile and the scalar solver limits.  Scenarios come from three places:
hand construction, a JSON file (:func:`load_scenario`), or the deterministic
generator (:func:`generate_scenario`).

Units are SI throughout: Hz, watts, bit/s, meters.  The file format uses
MHz and dB because that is how channel plans and link budgets are written
down; conversion happens at the parse boundary.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .power import PRESET_RADIOS, RadioProfile

__all__ = [
    "Channel",
    "Node",
    "Link",
    "Session",
    "Scenario",
    "GeneratorConfig",
    "ScenarioError",
    "load_scenario",
    "save_scenario",
    "generate_scenario",
    "remap_channel_indices",
    "WICHITA_CHANNELS",
]

MHZ = 1.0e6


class ScenarioError(ValueError):
    """Raised when a scenario file is malformed or an invariant is violated."""


@dataclass(frozen=True)
class Channel:
    """One licensed channel: an external integer label plus its band edges."""

    id: int
    center_hz: float
    width_hz: float

    @property
    def low_hz(self) -> float:
        return self.center_hz - self.width_hz / 2.0

    @property
    def high_hz(self) -> float:
        return self.center_hz + self.width_hz / 2.0


@dataclass(frozen=True)
class Node:
    id: int
    x: float
    y: float
    channels: frozenset[int]

    def distance_to(self, other: "Node") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class Link:
    """Directed link with per-channel linear power gains (dimensionless)."""

    tx: int
    rx: int
    gains: Mapping[int, float]


@dataclass(frozen=True)
class Session:
    """End-to-end traffic demand: ``rate_bps`` must be delivered source->dest."""

    source: int
    dest: int
    rate_bps: float


@dataclass(frozen=True)
class Scenario:
    """Immutable problem instance shared read-only by all solvers."""

    nodes: tuple[Node, ...]
    channels: tuple[Channel, ...]
    links: tuple[Link, ...]
    sessions: tuple[Session, ...]
    noise_density: float  # W/Hz
    interference_threshold: float  # W, received power other links may add
    max_tx_power: float  # W, per link-channel cap
    big_m_power: float  # W, scheduling/power coupling constant
    max_span_hz: float  # hardware cap on any node's spectrum span
    radio: RadioProfile
    rng_seed: int = 0

    # -- lookups ---------------------------------------------------------

    def node_by_id(self, node_id: int) -> Node:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(f"unknown node id {node_id}")

    def channel_by_id(self, channel_id: int) -> Channel:
        for c in self.channels:
            if c.id == channel_id:
                return c
        raise KeyError(f"unknown channel id {channel_id}")

    def link(self, tx: int, rx: int) -> Link | None:
        return self._link_index().get((tx, rx))

    def _link_index(self) -> dict[tuple[int, int], Link]:
        idx = getattr(self, "_links_by_pair", None)
        if idx is None:
            idx = {(lk.tx, lk.rx): lk for lk in self.links}
            object.__setattr__(self, "_links_by_pair", idx)
        return idx

    def gain(self, tx: int, rx: int, channel_id: int) -> float | None:
        """Linear gain tx->rx on a channel, or None when no defined path."""
        lk = self.link(tx, rx)
        if lk is None:
            return None
        return lk.gains.get(channel_id)

    def link_channels(self, tx: int, rx: int) -> tuple[int, ...]:
        """Channels usable on the directed link: intersection of endpoint sets."""
        shared = self.node_by_id(tx).channels & self.node_by_id(rx).channels
        return tuple(sorted(shared))

    @property
    def width_hz(self) -> float:
        return self.channels[0].width_hz

    def noise_power(self) -> float:
        """Noise power over one channel bandwidth."""
        return self.noise_density * self.width_hz

    def with_radio(self, radio: RadioProfile) -> "Scenario":
        return replace(self, radio=radio)

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, rng_seed=seed)


# The seven TV channels usable by fixed devices in Wichita, Kansas, kept as a
# static plan (no live spectrum-database queries).
WICHITA_CHANNELS: tuple[Channel, ...] = tuple(
    Channel(id=cid, center_hz=center * MHZ, width_hz=6.0 * MHZ)
    for cid, center in [(2, 57.0), (5, 79.0), (6, 85.0), (17, 491.0), (23, 527.0), (24, 533.0), (47, 671.0)]
)


def remap_channel_indices(channels: Sequence[Channel]) -> list[int]:
    """Map channels to integer model indices ``floor(center / width)``.

    TV-band center frequencies are not proportional to the external channel
    labels, while the span encoding used inside the MILP needs indices whose
    differences track frequency differences.  The floor mapping restores that
    coherence and is strictly increasing for any non-overlapping plan.
    """
    indices = [int(math.floor(c.center_hz / c.width_hz + 1e-9)) for c in channels]
    return indices


def validate_scenario(s: Scenario) -> None:
    """Check every model invariant; raise ScenarioError naming the violation."""
    if not s.channels:
        raise ScenarioError("scenario has no channels")
    if not s.nodes:
        raise ScenarioError("scenario has no nodes")

    ids = [c.id for c in s.channels]
    if len(set(ids)) != len(ids):
        raise ScenarioError("duplicate channel id")
    widths = {c.width_hz for c in s.channels}
    if any(w <= 0 for w in widths):
        raise ScenarioError("channel width must be positive")
    if len(widths) > 1:
        raise ScenarioError("channel widths must be uniform across the plan")
    for a, b in zip(s.channels, s.channels[1:]):
        if not b.center_hz > a.center_hz:
            raise ScenarioError("channel centers must be strictly increasing")
        if b.low_hz < a.high_hz - 1e-6:
            raise ScenarioError(f"channel overlap between {a.id} and {b.id}")

    node_ids = [n.id for n in s.nodes]
    if len(set(node_ids)) != len(node_ids):
        raise ScenarioError("duplicate node id")
    chan_set = set(ids)
    for n in s.nodes:
        if not (math.isfinite(n.x) and math.isfinite(n.y)):
            raise ScenarioError(f"node {n.id} has non-finite position")
        if not n.channels <= chan_set:
            raise ScenarioError(f"node {n.id} lists channels outside the global plan")

    seen_pairs = set()
    for lk in s.links:
        if lk.tx == lk.rx:
            raise ScenarioError(f"link {lk.tx}->{lk.rx} must join distinct nodes")
        if lk.tx not in set(node_ids) or lk.rx not in set(node_ids):
            raise ScenarioError(f"link {lk.tx}->{lk.rx} references unknown node")
        if (lk.tx, lk.rx) in seen_pairs:
            raise ScenarioError(f"duplicate link {lk.tx}->{lk.rx}")
        seen_pairs.add((lk.tx, lk.rx))
        shared = set(s.link_channels(lk.tx, lk.rx))
        missing = shared - set(lk.gains)
        if missing:
            raise ScenarioError(
                f"link {lk.tx}->{lk.rx} missing gain for shared channel(s) {sorted(missing)}"
            )
        extra = set(lk.gains) - chan_set
        if extra:
            raise ScenarioError(f"link {lk.tx}->{lk.rx} has gain for unknown channel(s) {sorted(extra)}")
        for m, g in lk.gains.items():
            if not (g > 0 and math.isfinite(g)):
                raise ScenarioError(f"link {lk.tx}->{lk.rx} gain on channel {m} must be finite and > 0")

    for i, sess in enumerate(s.sessions):
        if sess.source == sess.dest:
            raise ScenarioError(f"session {i} source equals dest")
        if sess.source not in set(node_ids) or sess.dest not in set(node_ids):
            raise ScenarioError(f"session {i} references unknown node")
        if not sess.rate_bps > 0:
            raise ScenarioError(f"session {i} rate must be positive")

    if s.noise_density <= 0:
        raise ScenarioError("noise density must be positive")
    width = s.channels[0].width_hz
    if not s.interference_threshold < s.noise_density * width:
        raise ScenarioError("interference threshold must be below the per-channel noise power")
    if s.max_tx_power <= 0:
        raise ScenarioError("max transmit power must be positive")
    if s.big_m_power < s.max_tx_power:
        raise ScenarioError("coupling constant A must be at least the transmit power cap")
    if s.max_span_hz < width:
        raise ScenarioError("max span must admit at least one channel width")


# ---------------------------------------------------------------------------
# File format
# ---------------------------------------------------------------------------

_TOP_KEYS = {"channels", "nodes", "links", "sessions", "radio", "limits", "seed"}
_LIMIT_KEYS = {"N0", "P_I", "P_max", "A", "q_max_mhz"}
_RADIO_KEYS = {
    "dac_intercept_w",
    "dac_slope_w_per_sps",
    "adc_intercept_w",
    "adc_slope_w_per_sps",
    "tx_fixed_w",
    "rx_fixed_w",
    "papr_db",
    "drain_efficiency",
}


def _require_keys(obj: dict, allowed: set[str], required: set[str], where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ScenarioError(f"unknown key(s) {sorted(unknown)} in {where}")
    missing = required - set(obj)
    if missing:
        raise ScenarioError(f"missing key(s) {sorted(missing)} in {where}")


def _parse_radio(obj: dict) -> RadioProfile:
    if "preset" in obj:
        _require_keys(obj, {"preset"}, {"preset"}, "radio")
        name = obj["preset"]
        if name not in PRESET_RADIOS:
            raise ScenarioError(f"unknown radio preset '{name}'")
        return PRESET_RADIOS[name]
    _require_keys(obj, _RADIO_KEYS, _RADIO_KEYS, "radio")
    return RadioProfile(
        dac_intercept_w=float(obj["dac_intercept_w"]),
        dac_slope_w_per_sps=float(obj["dac_slope_w_per_sps"]),
        adc_intercept_w=float(obj["adc_intercept_w"]),
        adc_slope_w_per_sps=float(obj["adc_slope_w_per_sps"]),
        tx_fixed_w=float(obj["tx_fixed_w"]),
        rx_fixed_w=float(obj["rx_fixed_w"]),
        papr_db=float(obj["papr_db"]),
        drain_efficiency=float(obj["drain_efficiency"]),
    )


def load_scenario(path: str) -> Scenario:
    """Parse and fully validate a scenario file.

    The file is JSON with sections ``channels``, ``nodes``, ``links`` (gains
    in dB), ``sessions``, ``radio``, ``limits`` and ``seed``; unknown keys
    are rejected so typos fail loudly instead of silently defaulting.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"cannot parse scenario file: {exc}") from exc
    if not isinstance(doc, dict):
        raise ScenarioError("scenario file must hold a JSON object")
    _require_keys(doc, _TOP_KEYS, _TOP_KEYS - {"seed"}, "scenario")

    channels = []
    for obj in doc["channels"]:
        _require_keys(obj, {"id", "center_mhz", "width_mhz"}, {"id", "center_mhz", "width_mhz"}, "channels")
        channels.append(
            Channel(id=int(obj["id"]), center_hz=float(obj["center_mhz"]) * MHZ, width_hz=float(obj["width_mhz"]) * MHZ)
        )

    nodes = []
    for obj in doc["nodes"]:
        _require_keys(obj, {"id", "x", "y", "channels"}, {"id", "x", "y", "channels"}, "nodes")
        nodes.append(Node(id=int(obj["id"]), x=float(obj["x"]), y=float(obj["y"]), channels=frozenset(int(c) for c in obj["channels"])))

    links = []
    for obj in doc["links"]:
        _require_keys(obj, {"tx", "rx", "gains_db"}, {"tx", "rx", "gains_db"}, "links")
        gains = {int(m): 10.0 ** (float(db) / 10.0) for m, db in obj["gains_db"].items()}
        links.append(Link(tx=int(obj["tx"]), rx=int(obj["rx"]), gains=gains))

    sessions = []
    for obj in doc["sessions"]:
        _require_keys(obj, {"source", "dest", "rate_bps"}, {"source", "dest", "rate_bps"}, "sessions")
        sessions.append(Session(source=int(obj["source"]), dest=int(obj["dest"]), rate_bps=float(obj["rate_bps"])))

    limits = doc["limits"]
    _require_keys(limits, _LIMIT_KEYS, _LIMIT_KEYS, "limits")

    scenario = Scenario(
        nodes=tuple(nodes),
        channels=tuple(channels),
        links=tuple(links),
        sessions=tuple(sessions),
        noise_density=float(limits["N0"]),
        interference_threshold=float(limits["P_I"]),
        max_tx_power=float(limits["P_max"]),
        big_m_power=float(limits["A"]),
        max_span_hz=float(limits["q_max_mhz"]) * MHZ,
        radio=_parse_radio(doc["radio"]),
        rng_seed=int(doc.get("seed", 0)),
    )
    validate_scenario(scenario)
    return scenario


def save_scenario(scenario: Scenario, path: str) -> None:
    """Write a scenario file that :func:`load_scenario` parses back identically."""
    doc = {
        "channels": [
            {"id": c.id, "center_mhz": c.center_hz / MHZ, "width_mhz": c.width_hz / MHZ} for c in scenario.channels
        ],
        "nodes": [{"id": n.id, "x": n.x, "y": n.y, "channels": sorted(n.channels)} for n in scenario.nodes],
        "links": [
            {
                "tx": lk.tx,
                "rx": lk.rx,
                "gains_db": {str(m): 10.0 * math.log10(g) for m, g in sorted(lk.gains.items())},
            }
            for lk in scenario.links
        ],
        "sessions": [
            {"source": s.source, "dest": s.dest, "rate_bps": s.rate_bps} for s in scenario.sessions
        ],
        "radio": {
            "dac_intercept_w": scenario.radio.dac_intercept_w,
            "dac_slope_w_per_sps": scenario.radio.dac_slope_w_per_sps,
            "adc_intercept_w": scenario.radio.adc_intercept_w,
            "adc_slope_w_per_sps": scenario.radio.adc_slope_w_per_sps,
            "tx_fixed_w": scenario.radio.tx_fixed_w,
            "rx_fixed_w": scenario.radio.rx_fixed_w,
            "papr_db": scenario.radio.papr_db,
            "drain_efficiency": scenario.radio.drain_efficiency,
        },
        "limits": {
            "N0": scenario.noise_density,
            "P_I": scenario.interference_threshold,
            "P_max": scenario.max_tx_power,
            "A": scenario.big_m_power,
            "q_max_mhz": scenario.max_span_hz / MHZ,
        },
        "seed": scenario.rng_seed,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Deterministic generation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GeneratorConfig:
    """Parameter record for :func:`generate_scenario`; the seed is part of it."""

    n_nodes: int
    area_m: float
    pathloss_exponent: float
    shadowing_db: float
    channels: tuple[Channel, ...]
    sessions: tuple[Session, ...]
    seed: int
    max_link_distance_m: float | None = None
    positions: tuple[tuple[float, float], ...] | None = None
    noise_density: float = 4.0e-21
    interference_fraction: float = 0.1  # P_I as a fraction of per-channel noise power
    max_tx_power: float = 4.0
    big_m_power: float | None = None
    max_span_hz: float | None = None
    radio: RadioProfile = field(default_factory=lambda: PRESET_RADIOS["high-slope"])


def generate_scenario(cfg: GeneratorConfig) -> Scenario:
    """Build a scenario with distance-law gains and seeded per-channel shadowing.

    Gains follow ``d**(-pathloss) * 10**(X/10)`` with X drawn uniformly from
    +-shadowing_db/2 per (link, channel).  Identical configs (seed included)
    produce identical scenarios.
    """
    rng = np.random.default_rng(cfg.seed)
    if cfg.positions is not None:
        if len(cfg.positions) != cfg.n_nodes:
            raise ScenarioError("positions override must list one (x, y) per node")
        pos = [(float(x), float(y)) for x, y in cfg.positions]
        # Keep the stream identical whether or not positions were supplied.
        rng.uniform(0.0, cfg.area_m, size=(cfg.n_nodes, 2))
    else:
        pts = rng.uniform(0.0, cfg.area_m, size=(cfg.n_nodes, 2))
        pos = [(float(x), float(y)) for x, y in pts]

    chan_ids = frozenset(c.id for c in cfg.channels)
    nodes = tuple(Node(id=i + 1, x=pos[i][0], y=pos[i][1], channels=chan_ids) for i in range(cfg.n_nodes))

    for a in range(cfg.n_nodes):
        for b in range(a + 1, cfg.n_nodes):
            if nodes[a].distance_to(nodes[b]) <= 0.0:
                raise ScenarioError(f"degenerate geometry: nodes {a + 1} and {b + 1} coincide")

    cutoff = cfg.max_link_distance_m if cfg.max_link_distance_m is not None else math.inf
    links = []
    for a in nodes:
        for b in nodes:
            if a.id == b.id:
                continue
            d = a.distance_to(b)
            if d > cutoff:
                continue
            base = d ** (-cfg.pathloss_exponent)
            shared = sorted(a.channels & b.channels)
            fluct = rng.uniform(-cfg.shadowing_db / 2.0, cfg.shadowing_db / 2.0, size=len(shared))
            gains = {m: base * 10.0 ** (x / 10.0) for m, x in zip(shared, fluct)}
            links.append(Link(tx=a.id, rx=b.id, gains=gains))

    width = cfg.channels[0].width_hz
    plan_span = cfg.channels[-1].high_hz - cfg.channels[0].low_hz
    scenario = Scenario(
        nodes=nodes,
        channels=tuple(cfg.channels),
        links=tuple(links),
        sessions=tuple(cfg.sessions),
        noise_density=cfg.noise_density,
        interference_threshold=cfg.interference_fraction * cfg.noise_density * width,
        max_tx_power=cfg.max_tx_power,
        big_m_power=cfg.big_m_power if cfg.big_m_power is not None else cfg.max_tx_power,
        max_span_hz=cfg.max_span_hz if cfg.max_span_hz is not None else plan_span,
        radio=cfg.radio,
        rng_seed=cfg.seed,
    )
    validate_scenario(scenario)
    return scenario


def contiguous_plan(n_channels: int, width_hz: float, first_center_hz: float | None = None, first_id: int = 1) -> tuple[Channel, ...]:
    """A plan of adjacent equal-width channels (model indices then match labels)."""
    if first_center_hz is None:
        first_center_hz = width_hz / 2.0 + width_hz * first_id
    return tuple(
        Channel(id=first_id + k, center_hz=first_center_hz + k * width_hz, width_hz=width_hz)
        for k in range(n_channels)
    )
