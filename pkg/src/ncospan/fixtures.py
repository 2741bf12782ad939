"""Ready-made study scenarios used by the demos and the verification suite.

Two fixtures mirror the published experiments in shape (not in unpublished
gain values): a point-to-point link with twenty 3 MHz channels of
alternating good/bad quality at 18 Mbps, and a twelve-node network with
three 10 Mbps sessions over the seven-channel Wichita TV plan.  Both are
deterministic functions of their seeds.
"""

from __future__ import annotations

import numpy as np

from .power import PRESET_RADIOS, RadioProfile
from .scenario import (
    Channel,
    GeneratorConfig,
    Link,
    Node,
    Scenario,
    Session,
    WICHITA_CHANNELS,
    contiguous_plan,
    generate_scenario,
    validate_scenario,
)

__all__ = ["single_link_scenario", "multihop_scenario"]

MHZ = 1.0e6


def single_link_scenario(
    radio: RadioProfile | None = None,
    seed: int = 7,
    rate_bps: float = 18e6,
    good_gain_db: float = -115.0,
    bad_gain_db: float = -135.0,
    jitter_db: float = 0.5,
) -> Scenario:
    """Point-to-point fixture: 20 alternating good/bad channels, 3 MHz each.

    Even-position channels are good, odd-position channels are ~20 dB worse;
    a small seeded jitter keeps gains distinct so "the best channel" is
    unambiguous.
    """
    if radio is None:
        radio = PRESET_RADIOS["high-slope"]
    channels = contiguous_plan(20, 3.0 * MHZ, first_center_hz=501.0 * MHZ + 1.5 * MHZ, first_id=1)
    rng = np.random.default_rng(seed)
    gains = {}
    for pos, ch in enumerate(channels):
        base_db = good_gain_db if pos % 2 == 0 else bad_gain_db
        gains[ch.id] = 10.0 ** ((base_db + rng.uniform(-jitter_db / 2, jitter_db / 2)) / 10.0)
    chan_ids = frozenset(ch.id for ch in channels)
    noise_density = 4.0e-21
    width = channels[0].width_hz
    scenario = Scenario(
        nodes=(
            Node(id=1, x=0.0, y=0.0, channels=chan_ids),
            Node(id=2, x=3000.0, y=0.0, channels=chan_ids),
        ),
        channels=channels,
        links=(Link(tx=1, rx=2, gains=gains),),
        sessions=(Session(source=1, dest=2, rate_bps=rate_bps),),
        noise_density=noise_density,
        interference_threshold=0.1 * noise_density * width,
        max_tx_power=1.0,
        big_m_power=1.0,
        max_span_hz=channels[-1].high_hz - channels[0].low_hz,
        radio=radio,
        rng_seed=seed,
    )
    validate_scenario(scenario)
    return scenario


# Hand-laid twelve-node topology: three sources on the left, a relay mesh in
# the middle, three destinations on the right.  Kilometer-scale hops in the
# portable-device power class (100 mW cap).
_MULTIHOP_POSITIONS: tuple[tuple[float, float], ...] = (
    (0.0, 667.0),  # 1
    (0.0, 2667.0),  # 2
    (0.0, 4667.0),  # 3
    (3000.0, 333.0),  # 4
    (3000.0, 1833.0),  # 5
    (3000.0, 3500.0),  # 6
    (3000.0, 5000.0),  # 7
    (6000.0, 1000.0),  # 8
    (6000.0, 4333.0),  # 9
    (9000.0, 500.0),  # 10
    (9000.0, 2667.0),  # 11
    (9000.0, 4833.0),  # 12
)


def multihop_scenario(
    radio: RadioProfile | None = None,
    seed: int = 1,
    rate_bps: float = 10e6,
    max_link_distance_m: float = 3233.0,
    max_tx_power: float = 0.1,
) -> Scenario:
    """Twelve-node, three-session fixture on the Wichita channel plan.

    Nodes 1, 2 and 3 send to nodes 12, 11 and 10.  Links exist between node
    pairs within radio range; more distant pairs neither communicate nor
    interfere.
    """
    if radio is None:
        radio = PRESET_RADIOS["high-slope"]
    cfg = GeneratorConfig(
        n_nodes=12,
        area_m=9000.0,
        pathloss_exponent=3.0,
        shadowing_db=12.0,
        channels=WICHITA_CHANNELS,
        sessions=(
            Session(source=1, dest=12, rate_bps=rate_bps),
            Session(source=2, dest=11, rate_bps=rate_bps),
            Session(source=3, dest=10, rate_bps=rate_bps),
        ),
        seed=seed,
        max_link_distance_m=max_link_distance_m,
        positions=_MULTIHOP_POSITIONS,
        noise_density=4.0e-21,
        interference_fraction=0.1,
        max_tx_power=max_tx_power,
        radio=radio,
    )
    return generate_scenario(cfg)
