"""Radio front-end power accounting.

The system power of a node splits into three parts: RF transmit power scaled
by the amplifier constant (peak-to-average power ratio over drain
efficiency), transmitter-path circuit power, and receiver-path circuit
power.  Circuit power is affine in the converter sampling rate, which must
be at least twice the node's spectrum span; every other front-end block
(filters, mixer, LNA, IFA) contributes a fixed term while active.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

__all__ = [
    "RadioProfile",
    "PowerBreakdown",
    "PRESET_RADIOS",
    "fit_affine_from_points",
    "papr_db_worstcase",
    "node_power",
]


@dataclass(frozen=True)
class RadioProfile:
    """Hardware constants of one transceiver design.

    Converter power curves are affine in sampling rate (intercept + slope);
    slopes are in W per sample/s.  ``tx_fixed_w`` collects the transmit-side
    filter and mixer power, ``rx_fixed_w`` the receive-side filter, mixer,
    IFA and LNA power.
    """

    dac_intercept_w: float
    dac_slope_w_per_sps: float
    adc_intercept_w: float
    adc_slope_w_per_sps: float
    tx_fixed_w: float
    rx_fixed_w: float
    papr_db: float
    drain_efficiency: float

    def __post_init__(self) -> None:
        if self.dac_slope_w_per_sps < 0 or self.adc_slope_w_per_sps < 0:
            raise ValueError("converter power slopes must be non-negative")
        if not 0.0 < self.drain_efficiency <= 1.0:
            raise ValueError("drain efficiency must lie in (0, 1]")

    # Aggregated coefficients of the per-node power model.
    @property
    def tx_fixed_total_w(self) -> float:
        """Fixed transmit-path power while the transmitter is active."""
        return self.dac_intercept_w + self.tx_fixed_w

    @property
    def rx_fixed_total_w(self) -> float:
        return self.adc_intercept_w + self.rx_fixed_w

    @property
    def tx_slope_w_per_sps(self) -> float:
        return self.dac_slope_w_per_sps

    @property
    def rx_slope_w_per_sps(self) -> float:
        return self.adc_slope_w_per_sps

    @property
    def amp_scale(self) -> float:
        """RF power multiplier 10**(PAPR_dB/10) / efficiency."""
        return 10.0 ** (self.papr_db / 10.0) / self.drain_efficiency

    def scaled_slopes(self, factor: float) -> "RadioProfile":
        return replace(
            self,
            dac_slope_w_per_sps=self.dac_slope_w_per_sps * factor,
            adc_slope_w_per_sps=self.adc_slope_w_per_sps * factor,
        )

    def without_circuit(self) -> "RadioProfile":
        """Same amplifier model but zero circuit power (transmit-only objective)."""
        return replace(
            self,
            dac_intercept_w=0.0,
            dac_slope_w_per_sps=0.0,
            adc_intercept_w=0.0,
            adc_slope_w_per_sps=0.0,
            tx_fixed_w=0.0,
            rx_fixed_w=0.0,
        )


@dataclass(frozen=True)
class PowerBreakdown:
    """System power split into RF transmit and circuit parts; total is their sum."""

    tx_rf_w: float = 0.0
    tx_circuit_w: float = 0.0
    rx_circuit_w: float = 0.0

    @property
    def total_w(self) -> float:
        return self.tx_rf_w + self.tx_circuit_w + self.rx_circuit_w

    def __add__(self, other: "PowerBreakdown") -> "PowerBreakdown":
        return PowerBreakdown(
            tx_rf_w=self.tx_rf_w + other.tx_rf_w,
            tx_circuit_w=self.tx_circuit_w + other.tx_circuit_w,
            rx_circuit_w=self.rx_circuit_w + other.rx_circuit_w,
        )


def fit_affine_from_points(points: Sequence[tuple[float, float]]) -> tuple[float, float]:
    """Least-squares affine fit of a converter power curve.

    ``points`` are (sampling rate, power) samples in whatever units the
    datasheet uses; the returned (intercept, slope) keep those units.  A
    single sample fixes the intercept at zero.  Negative fitted slopes are
    clamped to zero with a warning because a power curve cannot fall with
    sampling rate.
    """
    if not points:
        raise ValueError("need at least one (rate, power) point")
    rates = [float(r) for r, _ in points]
    powers = [float(p) for _, p in points]
    if len(points) == 1:
        rate, pwr = rates[0], powers[0]
        if rate == 0:
            raise ValueError("single calibration point must have a nonzero rate")
        return 0.0, pwr / rate
    if len(set(rates)) == 1:
        if len(set(powers)) > 1:
            raise ValueError("identical rates with distinct powers cannot be fit")
        return powers[0], 0.0
    import numpy as np

    slope, intercept = np.polyfit(np.asarray(rates), np.asarray(powers), 1)
    if slope < 0:
        noise_floor = 1e-12 * max(abs(p) for p in powers) / max(abs(r) for r in rates if r)
        if slope < -noise_floor:
            warnings.warn("fitted converter slope was negative; clamping to 0", stacklevel=2)
        slope = 0.0
        intercept = sum(powers) / len(powers)
    return float(intercept), float(slope)


def papr_db_worstcase(n_subcarriers: int, gamma: float, coding_gain_db: float = 0.0) -> float:
    """Worst-case peak-to-average power ratio in dB for an N-subcarrier OFDM signal.

    Solves ``1 - exp(-N * e**(-x) * sqrt(pi*x/3)) = gamma`` for the threshold
    x (linear ratio) by bisection on the decreasing tail branch, converts to
    dB and subtracts the coding gain.
    """
    if n_subcarriers < 1:
        raise ValueError("need at least one subcarrier")
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie strictly between 0 and 1")
    target = -math.log1p(-gamma)

    def excess(x: float) -> float:
        return n_subcarriers * math.exp(-x) * math.sqrt(math.pi * x / 3.0) - target

    # The left factor peaks at x = 1/2 and decays beyond; the physical root is
    # the one on the decaying tail.
    lo = 0.5
    if excess(lo) <= 0.0:
        raise ValueError("no root in search bracket: exceedance target above curve maximum")
    hi = 1.0
    while excess(hi) > 0.0:
        hi *= 2.0
        if hi > 1e9:
            raise ValueError("no root in search bracket")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    return 10.0 * math.log10(x) - coding_gain_db


def node_power(
    profile: RadioProfile,
    tx_span_hz: float,
    rx_span_hz: float,
    tx_active: bool,
    rx_active: bool,
    tx_powers_w: Iterable[float] = (),
) -> PowerBreakdown:
    """Power contribution of one node given its spans, activity and RF powers.

    Sampling rate is twice the spectrum span on each path.  Fixed terms are
    gated by the activity flags; an idle node contributes nothing.
    """
    if tx_span_hz < 0 or rx_span_hz < 0:
        raise ValueError("spans must be non-negative")
    if not tx_active and tx_span_hz > 0:
        raise ValueError("inactive transmit path cannot have positive span")
    if not rx_active and rx_span_hz > 0:
        raise ValueError("inactive receive path cannot have positive span")
    rf = 0.0
    for p in tx_powers_w:
        if p < 0:
            raise ValueError("transmit powers must be non-negative")
        rf += p
    tx_circ = (profile.tx_fixed_total_w if tx_active else 0.0) + profile.tx_slope_w_per_sps * 2.0 * tx_span_hz
    rx_circ = (profile.rx_fixed_total_w if rx_active else 0.0) + profile.rx_slope_w_per_sps * 2.0 * rx_span_hz
    return PowerBreakdown(tx_rf_w=profile.amp_scale * rf, tx_circuit_w=tx_circ, rx_circuit_w=rx_circ)


# Converter presets.  The high-slope curves are single-point fits through the
# origin of a 1056 mW @ 150 MS/s DAC and a 908 mW @ 125 MS/s ADC.  The
# low-slope preset is a labeled approximation: same shape with slopes scaled
# by 0.05, standing in for low-power converter parts whose exact curves are
# not tabulated here.
_HIGH = RadioProfile(
    dac_intercept_w=0.0,
    dac_slope_w_per_sps=1.056 / 150e6,
    adc_intercept_w=0.0,
    adc_slope_w_per_sps=0.908 / 125e6,
    tx_fixed_w=0.0353,
    rx_fixed_w=0.0608,
    papr_db=9.0,
    drain_efficiency=0.75,
)

PRESET_RADIOS: dict[str, RadioProfile] = {
    "high-slope": _HIGH,
    "low-slope": _HIGH.scaled_slopes(0.05),
}
