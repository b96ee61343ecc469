"""Closed-form consumption math for apps on a battery-powered device.

Single source of truth for the formulas shared by the simulator, the
detector, and the reporting layer: channel capacity and its inversion
(power needed to sustain a demanded rate), battery drain and lifetime,
and energy totals. Everything here is a pure function of its arguments;
no clocks, no RNG, no I/O.

Two unit families flow through this package and never mix:

* channel path: SI (watts, hertz, bits/s), for apps described by channel
  parameters (noise power, gain, bandwidth, SNR).
* measured path: device-native units (Mbps, %, mAh), for apps replayed
  from per-app usage readings as a phone reports them.

A scenario commits to one family; traces carry a unit tag so downstream
consumers know which family they are looking at.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# Tolerance for pure-math identities (round trips, additivity). The
# detector's behavioral tolerance is a separate, much looser knob.
REL_TOL = 1e-9


class DomainError(ValueError):
    """An argument fell outside a formula's domain."""


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise DomainError(msg)


@dataclass(frozen=True)
class ChannelParams:
    noise_power: float   # squared noise amplitude at the receiver, watts
    channel_gain: float  # squared channel coefficient magnitude, dimensionless
    bandwidth: float     # hertz
    snr: float           # linear signal-to-noise ratio, not dB

    def __post_init__(self):
        _require(self.noise_power > 0, f"noise_power must be > 0, got {self.noise_power}")
        _require(self.channel_gain > 0, f"channel_gain must be > 0, got {self.channel_gain}")
        _require(self.bandwidth > 0, f"bandwidth must be > 0, got {self.bandwidth}")
        _require(self.snr >= 0, f"snr must be >= 0, got {self.snr}")


def check_snr_consistency(channel: ChannelParams, transmit_power: float,
                          rel_tol: float = REL_TOL) -> None:
    """Raise if the stated SNR disagrees with transmit_power * gain / noise.

    Only meaningful when a profile carries both an SNR and an explicit
    transmit power; profiles built from one or the other skip this check.
    """
    implied = transmit_power * channel.channel_gain / channel.noise_power
    scale = max(abs(implied), abs(channel.snr), 1e-300)
    if abs(implied - channel.snr) > rel_tol * scale:
        raise DomainError(
            f"snr {channel.snr} inconsistent with implied {implied} "
            f"from transmit power {transmit_power}")


@dataclass(frozen=True)
class AppProfile:
    """Channel-path description of one app's steady-state behavior."""

    app_id: str
    channel: ChannelParams
    demand_rate: float        # bits/s the app pushes through the channel
    current_draw: float       # mA while active
    duty_cycle: float = 1.0   # fraction of each tick the app is actually active

    def __post_init__(self):
        _require(self.demand_rate >= 0, f"demand_rate must be >= 0, got {self.demand_rate}")
        _require(self.current_draw >= 0, f"current_draw must be >= 0, got {self.current_draw}")
        _require(0.0 <= self.duty_cycle <= 1.0,
                 f"duty_cycle must be in [0, 1], got {self.duty_cycle}")


@dataclass(frozen=True)
class MeasuredProfile:
    """Measured-path description: per-tick averages as a device reports them.

    data_rate is in Mbps, battery_used in % of a full charge, power_used in
    mAh, all per tick. There is no channel to invert here, so these numbers
    are replayed as-is.
    """

    app_id: str
    data_rate: float
    battery_used: float
    power_used: float
    current: float = 0.0

    def __post_init__(self):
        for name in ("data_rate", "battery_used", "power_used", "current"):
            _require(getattr(self, name) >= 0, f"{name} must be >= 0")


@dataclass(frozen=True)
class BatteryModel:
    capacity: float                    # mAh at full charge
    level: float                       # mAh remaining
    circuit_battery_drain: float = 0.0  # mAh per tick spent by the circuit itself
    circuit_current: float = 0.0       # mA baseline draw of the circuit
    derating: float = 0.7              # packs deliver less than nameplate under load

    def __post_init__(self):
        _require(self.capacity > 0, f"capacity must be > 0, got {self.capacity}")
        _require(0.0 <= self.level <= self.capacity,
                 f"level must be in [0, capacity], got {self.level}")
        _require(self.circuit_battery_drain >= 0, "circuit_battery_drain must be >= 0")
        _require(self.circuit_current >= 0, "circuit_current must be >= 0")
        _require(self.derating > 0, "derating must be > 0")


@dataclass(frozen=True)
class EnergyParams:
    """Inputs to the transmission-energy total.

    battery_energy_drawn is the drain power in watts while transmitting.
    (The name keeps the battery framing of the surrounding model; the units
    only work out to watt-hours if it is read as a power.)
    """

    transmission_latency: float   # seconds spent transmitting
    battery_energy_drawn: float   # watts drawn while transmitting

    def __post_init__(self):
        _require(self.transmission_latency >= 0, "transmission_latency must be >= 0")
        _require(self.battery_energy_drawn >= 0, "battery_energy_drawn must be >= 0")


def shannon_rate(bandwidth: float, snr: float) -> float:
    """Capacity of a band-limited noisy channel, bits/s."""
    _require(bandwidth > 0, f"bandwidth must be > 0, got {bandwidth}")
    _require(snr >= 0, f"snr must be >= 0, got {snr}")
    return bandwidth * math.log2(1.0 + snr)


def inverse_shannon_power(noise_power: float, channel_gain: float,
                          demand_rate: float, bandwidth: float) -> float:
    """Transmit power needed to sustain demand_rate, watts.

    Inverts the capacity law: exactly 0 at zero demand, and strictly
    increasing (exponentially) as the demanded rate grows.
    """
    _require(noise_power > 0, f"noise_power must be > 0, got {noise_power}")
    _require(channel_gain > 0, f"channel_gain must be > 0, got {channel_gain}")
    _require(bandwidth > 0, f"bandwidth must be > 0, got {bandwidth}")
    _require(demand_rate >= 0, f"demand_rate must be >= 0, got {demand_rate}")
    return (noise_power / channel_gain) * (2.0 ** (demand_rate / bandwidth) - 1.0)


def app_power(profile: AppProfile) -> float:
    """One app's duty-scaled transmit power, watts."""
    c = profile.channel
    return inverse_shannon_power(c.noise_power, c.channel_gain,
                                 profile.demand_rate, c.bandwidth) * profile.duty_cycle


def app_rate(profile: AppProfile) -> float:
    """One app's duty-scaled channel rate, bits/s."""
    return shannon_rate(profile.channel.bandwidth, profile.channel.snr) * profile.duty_cycle


def total_estimated_power(profiles) -> float:
    """Sum of duty-scaled per-app powers, in list order. Empty list is 0."""
    total = 0.0
    for p in profiles:
        total += app_power(p)
    return total


def total_rate(profiles) -> float:
    """Sum of duty-scaled per-app channel rates, in list order."""
    total = 0.0
    for p in profiles:
        total += app_rate(p)
    return total


def battery_consumed(samples) -> float:
    """Total battery drawn across (initial_level, final_level) pairs, mAh."""
    total = 0.0
    for initial, final in samples:
        _require(final >= 0, f"final level must be >= 0, got {final}")
        _require(initial >= final,
                 f"final level {final} exceeds initial level {initial}")
        total += initial - final
    return total


def battery_lifetime(capacity: float, currents, derating: float = 0.7) -> float:
    """Hours a pack lasts under a constant set of current draws.

    Division happens before derating; with the default 0.7 this keeps
    round capacity/current ratios exact where the other order drifts in
    the last bit.
    """
    _require(capacity > 0, f"capacity must be > 0, got {capacity}")
    load = 0.0
    for i in currents:
        _require(i >= 0, f"current must be >= 0, got {i}")
        load += i
    if load <= 0:
        raise DomainError("no load; lifetime undefined")
    return (capacity / load) * derating


def remaining_lifetime(battery: BatteryModel, consumed: float, currents) -> float:
    """Hours left after `consumed` mAh are gone, under the given draws.

    The circuit's own drain and current are charged on top of the per-app
    figures. Strictly decreasing in consumed and in any added current.
    """
    _require(consumed >= 0, f"consumed must be >= 0, got {consumed}")
    remaining = battery.capacity - consumed - battery.circuit_battery_drain
    if remaining < 0:
        raise DomainError("battery exhausted")
    load = battery.circuit_current
    for i in currents:
        _require(i >= 0, f"current must be >= 0, got {i}")
        load += i
    if load <= 0:
        raise DomainError("no load; lifetime undefined")
    return (remaining / load) * battery.derating


def energy_efficiency(rate: float, power: float) -> float:
    """Data rate per unit power. Undefined for an idle (zero-power) app."""
    if power <= 0:
        raise DomainError("idle app has undefined efficiency")
    return rate / power


def total_energy_efficiency(profiles) -> float:
    """Sum of per-app efficiencies, skipping idle apps.

    Idle apps contribute no data and no power, so dropping them keeps the
    aggregate defined without changing what it measures.
    """
    total = 0.0
    for p in profiles:
        power = app_power(p)
        if power > 0:
            total += app_rate(p) / power
    return total


def energy_consumed(params: EnergyParams) -> float:
    """Transmission energy in watt-hours: drain power times latency."""
    return (params.battery_energy_drawn * params.transmission_latency) / 3600.0


def total_energy_consumed(params_list) -> float:
    total = 0.0
    for params in params_list:
        total += energy_consumed(params)
    return total


def attack_energy_efficiency(valid_rate: float, intruder_rate: float,
                             valid_power: float, intruder_power: float,
                             numerator: str = "minus") -> float:
    """Device-level efficiency while a hidden consumer is active.

    The default "minus" form charges the intruder's power to the device
    while denying it credit for the data it moves; that form is strictly
    below the clean efficiency for any strictly positive intruder.  The
    "plus" form credits the intruder's data too (plain total-over-total),
    which does not guarantee that ordering.
    """
    if numerator == "minus":
        rate = valid_rate - intruder_rate
    elif numerator == "plus":
        rate = valid_rate + intruder_rate
    else:
        raise DomainError(f"numerator must be 'minus' or 'plus', got {numerator!r}")
    power = valid_power + intruder_power
    if power <= 0:
        raise DomainError("idle app has undefined efficiency")
    return rate / power


def app_tick_usage(profile: AppProfile, dt_seconds: float):
    """Noise-free consumption of one channel-path app over one tick.

    Returns (data_bits, power_watts, battery_mah, current_ma). Data moved
    is the channel rate over the tick; battery drawn follows the app's
    current over the tick. The simulator and the detector both build on
    this so that, absent noise, their numbers agree bit for bit.
    """
    _require(dt_seconds > 0, f"dt_seconds must be > 0, got {dt_seconds}")
    rate = app_rate(profile)
    power = app_power(profile)
    current = profile.current_draw * profile.duty_cycle
    return (rate * dt_seconds, power, current * (dt_seconds / 3600.0), current)


def measured_tick_usage(profile: MeasuredProfile):
    """Per-tick consumption of a measured-path app (its readings, as-is)."""
    return (profile.data_rate, profile.power_used, profile.battery_used,
            profile.current)


def tick_usage(profile, dt_seconds: float):
    """Dispatch on profile kind; both paths return the same 4-tuple shape."""
    if isinstance(profile, MeasuredProfile):
        return measured_tick_usage(profile)
    return app_tick_usage(profile, dt_seconds)


def profile_to_dict(profile) -> dict:
    if isinstance(profile, MeasuredProfile):
        return {
            "kind": "measured",
            "app_id": profile.app_id,
            "data_rate": profile.data_rate,
            "battery_used": profile.battery_used,
            "power_used": profile.power_used,
            "current": profile.current,
        }
    return {
        "kind": "channel",
        "app_id": profile.app_id,
        "noise_power": profile.channel.noise_power,
        "channel_gain": profile.channel.channel_gain,
        "bandwidth": profile.channel.bandwidth,
        "snr": profile.channel.snr,
        "demand_rate": profile.demand_rate,
        "current_draw": profile.current_draw,
        "duty_cycle": profile.duty_cycle,
    }


def profile_from_dict(d: dict):
    kind = d.get("kind", "channel" if "bandwidth" in d else "measured")
    if kind == "measured":
        return MeasuredProfile(
            app_id=d["app_id"],
            data_rate=float(d["data_rate"]),
            battery_used=float(d["battery_used"]),
            power_used=float(d["power_used"]),
            current=float(d.get("current", 0.0)),
        )
    if kind != "channel":
        raise DomainError(f"unknown profile kind {kind!r}")
    return AppProfile(
        app_id=d["app_id"],
        channel=ChannelParams(
            noise_power=float(d["noise_power"]),
            channel_gain=float(d["channel_gain"]),
            bandwidth=float(d["bandwidth"]),
            snr=float(d["snr"]),
        ),
        demand_rate=float(d["demand_rate"]),
        current_draw=float(d["current_draw"]),
        duty_cycle=float(d.get("duty_cycle", 1.0)),
    )
