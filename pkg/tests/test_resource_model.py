"""Closed-form consumption math: worked examples plus the ordering and
additivity properties the detection logic leans on."""

import math

import pytest
from hypothesis import given, settings, strategies as st

from abma.resource_model import (
    REL_TOL,
    AppProfile,
    BatteryModel,
    ChannelParams,
    DomainError,
    EnergyParams,
    MeasuredProfile,
    app_power,
    app_rate,
    app_tick_usage,
    attack_energy_efficiency,
    battery_consumed,
    battery_lifetime,
    check_snr_consistency,
    energy_consumed,
    energy_efficiency,
    inverse_shannon_power,
    measured_tick_usage,
    profile_from_dict,
    profile_to_dict,
    remaining_lifetime,
    shannon_rate,
    tick_usage,
    total_energy_consumed,
    total_energy_efficiency,
    total_estimated_power,
    total_rate,
)

# Strategy bounds are deliberately narrow enough that any one app's
# contribution stays far above the ulp of a 13-app total; the strict
# orderings below are real-number facts and the tests must not let
# float cancellation manufacture counterexamples.
channels = st.builds(
    ChannelParams,
    noise_power=st.floats(1e-6, 1e-3),
    channel_gain=st.floats(1e-3, 1.0),
    bandwidth=st.floats(1e3, 1e7),
    snr=st.floats(0.1, 1e3),
)


def _app_profiles(min_size=1, max_size=12):
    def build(i, channel, rate_frac, current):
        return AppProfile(
            app_id=f"app{i}",
            channel=channel,
            demand_rate=rate_frac * channel.bandwidth,
            current_draw=current,
        )

    one = st.builds(build,
                    i=st.integers(0, 10_000),
                    channel=channels,
                    rate_frac=st.floats(0.1, 10.0),
                    current=st.floats(1.0, 500.0))
    return st.lists(one, min_size=min_size, max_size=max_size)


def close(a, b, rel=REL_TOL):
    return math.isclose(a, b, rel_tol=rel, abs_tol=0.0)


# ---------------------------------------------------------------- rate/power


def test_shannon_rate_worked_values():
    assert shannon_rate(1.0, 0.0) == 0.0
    assert shannon_rate(1.0, 1.0) == 1.0
    assert shannon_rate(2.0, 3.0) == 4.0


def test_shannon_rate_domain():
    with pytest.raises(DomainError):
        shannon_rate(0.0, 1.0)
    with pytest.raises(DomainError):
        shannon_rate(1.0, -0.1)


def test_inverse_shannon_power_worked_values():
    assert inverse_shannon_power(1.0, 1.0, 1.0, 1.0) == 1.0
    assert inverse_shannon_power(1.0, 1.0, 0.0, 1.0) == 0.0
    # (2/4) * (2^3 - 1) = 3.5
    assert inverse_shannon_power(2.0, 4.0, 3.0, 1.0) == 3.5


def test_inverse_shannon_power_domain():
    for bad in ((0.0, 1.0, 1.0, 1.0), (1.0, 0.0, 1.0, 1.0), (1.0, 1.0, 1.0, 0.0),
                (1.0, 1.0, -1.0, 1.0)):
        with pytest.raises(DomainError):
            inverse_shannon_power(*bad)


@given(channels)
def test_rate_power_round_trip(channel):
    """Feeding the capacity back through the power law recovers the
    SNR-scaled noise floor to within the pure-math tolerance."""
    rate = shannon_rate(channel.bandwidth, channel.snr)
    power = inverse_shannon_power(channel.noise_power, channel.channel_gain,
                                  rate, channel.bandwidth)
    expected = channel.noise_power * channel.snr / channel.channel_gain
    assert close(power, expected)


@given(channels, st.floats(0.0, 5.0), st.floats(1e-6, 1.0))
def test_power_strictly_increasing_in_rate(channel, rate_frac, bump_frac):
    base = channel.bandwidth * rate_frac
    lo = inverse_shannon_power(channel.noise_power, channel.channel_gain,
                               base, channel.bandwidth)
    hi = inverse_shannon_power(channel.noise_power, channel.channel_gain,
                               base + bump_frac * channel.bandwidth,
                               channel.bandwidth)
    assert hi > lo


@given(_app_profiles(0, 6), _app_profiles(0, 6))
def test_totals_additive_over_concatenation(left, right):
    assert close(total_estimated_power(left + right),
                 total_estimated_power(left) + total_estimated_power(right),
                 rel=1e-12) or total_estimated_power(left + right) == 0.0
    assert close(total_rate(left + right),
                 total_rate(left) + total_rate(right),
                 rel=1e-12) or total_rate(left + right) == 0.0


def test_totals_empty():
    assert total_estimated_power([]) == 0.0
    assert total_rate([]) == 0.0
    assert total_energy_efficiency([]) == 0.0


def test_duty_cycle_scales_linearly():
    c = ChannelParams(noise_power=1e-6, channel_gain=0.1, bandwidth=1e6, snr=10.0)
    full = AppProfile("a", c, demand_rate=2e6, current_draw=100.0)
    half = AppProfile("a", c, demand_rate=2e6, current_draw=100.0, duty_cycle=0.5)
    assert app_power(half) == app_power(full) * 0.5
    assert app_rate(half) == app_rate(full) * 0.5


# ------------------------------------------------------------------ battery


def test_battery_consumed_worked_values():
    assert battery_consumed([(100.0, 100.0)]) == 0.0
    assert battery_consumed([(100.0, 90.0), (50.0, 45.0)]) == 15.0


def test_battery_consumed_rejects_gain():
    with pytest.raises(DomainError):
        battery_consumed([(90.0, 100.0)])


def test_battery_lifetime_worked_values():
    # division first keeps the flagship figure exact
    assert battery_lifetime(4000.0, [700.0], 0.7) == 4.0
    assert battery_lifetime(4000.0, [1000.0], 1.0) == 4.0
    assert battery_lifetime(4000.0, [500.0, 500.0], 0.7) == 2.8


def test_battery_lifetime_no_load():
    with pytest.raises(DomainError, match="no load"):
        battery_lifetime(4000.0, [0.0, 0.0])
    with pytest.raises(DomainError):
        battery_lifetime(4000.0, [])


@given(st.floats(100.0, 10_000.0), st.lists(st.floats(1.0, 500.0), min_size=1, max_size=8))
def test_derating_is_exactly_linear(capacity, currents):
    assert battery_lifetime(capacity, currents, 0.7) == \
        0.7 * battery_lifetime(capacity, currents, 1.0)


def test_remaining_lifetime_worked_values():
    b = BatteryModel(capacity=4000.0, level=4000.0)
    assert remaining_lifetime(b, 0.0, [700.0]) == 4.0

    b = BatteryModel(capacity=4000.0, level=4000.0,
                     circuit_battery_drain=200.0, circuit_current=100.0)
    clean = remaining_lifetime(b, 1000.0, [700.0])
    assert clean == (2800.0 / 800.0) * 0.7
    assert close(clean, 2.45)
    # a hidden consumer shortens it on both axes: more consumed, more draw
    shorter = remaining_lifetime(b, 1000.0 + 300.0, [700.0, 200.0])
    assert shorter == (2500.0 / 1000.0) * 0.7
    assert close(shorter, 1.75)
    assert shorter < clean


def test_remaining_lifetime_exhausted():
    b = BatteryModel(capacity=100.0, level=100.0, circuit_battery_drain=10.0)
    with pytest.raises(DomainError, match="exhausted"):
        remaining_lifetime(b, 95.0, [10.0])


def test_battery_model_invariants():
    with pytest.raises(DomainError):
        BatteryModel(capacity=100.0, level=101.0)
    with pytest.raises(DomainError):
        BatteryModel(capacity=0.0, level=0.0)


# ------------------------------------------------------------------- energy


def test_energy_efficiency_worked_values():
    assert energy_efficiency(2.0, 1.0) == 2.0
    assert energy_efficiency(0.0, 5.0) == 0.0
    assert close(energy_efficiency(89.363, 471.573), 89.363 / 471.573)


def test_energy_efficiency_idle_undefined():
    with pytest.raises(DomainError, match="idle app"):
        energy_efficiency(1.0, 0.0)


def test_energy_consumed_worked_values():
    assert energy_consumed(EnergyParams(5.0, 0.0)) == 0.0
    assert energy_consumed(EnergyParams(1.0, 3600.0)) == 1.0
    total = total_energy_consumed([EnergyParams(1.0, 3600.0),
                                   EnergyParams(0.5, 3600.0)])
    assert total == 1.5


def test_attack_efficiency_numerator_switch():
    # minus denies the hidden app credit for its data; plus grants it
    minus = attack_energy_efficiency(10.0, 2.0, 4.0, 1.0, numerator="minus")
    plus = attack_energy_efficiency(10.0, 2.0, 4.0, 1.0, numerator="plus")
    assert minus == (10.0 - 2.0) / 5.0
    assert plus == (10.0 + 2.0) / 5.0
    with pytest.raises(DomainError):
        attack_energy_efficiency(1.0, 1.0, 1.0, 1.0, numerator="both")


# -------------------------------------------------- orderings under attack


@settings(max_examples=200)
@given(_app_profiles(1, 12), _app_profiles(1, 1))
def test_hidden_consumer_orderings(valid, intruder_list):
    """A strictly positive hidden consumer moves every aggregate the same
    way, for any valid set: power and rate and energy up, lifetime and
    efficiency down."""
    intruder = intruder_list[0]
    everyone = valid + [intruder]

    p_val = total_estimated_power(valid)
    p_att = total_estimated_power(everyone)
    assert p_att > p_val

    r_val = total_rate(valid)
    r_att = total_rate(everyone)
    assert r_att > r_val

    battery = BatteryModel(capacity=1e6, level=1e6,
                           circuit_battery_drain=1.0, circuit_current=50.0)
    dt = 60.0
    consumed_val = sum(app_tick_usage(p, dt)[2] for p in valid)
    consumed_att = consumed_val + app_tick_usage(intruder, dt)[2]
    life_val = remaining_lifetime(battery, consumed_val,
                                  [p.current_draw for p in valid])
    life_att = remaining_lifetime(battery, consumed_att,
                                  [p.current_draw for p in everyone])
    assert life_att < life_val

    e_val = total_energy_consumed([EnergyParams(dt, app_power(p)) for p in valid])
    e_att = total_energy_consumed([EnergyParams(dt, app_power(p)) for p in everyone])
    assert e_att > e_val

    ee_val = energy_efficiency(r_val, p_val)
    ee_att = attack_energy_efficiency(r_val, app_rate(intruder),
                                      p_val, app_power(intruder))
    assert ee_att < ee_val


@given(_app_profiles(1, 12))
def test_reduced_consumption_never_reads_as_attack(valid):
    # dropping an app moves every aggregate the "safe" direction
    subset = valid[:-1]
    assert total_estimated_power(subset) <= total_estimated_power(valid)
    assert total_rate(subset) <= total_rate(valid)


# -------------------------------------------------------------- tick usage


def test_app_tick_usage_fields():
    c = ChannelParams(noise_power=1e-6, channel_gain=0.1, bandwidth=1e6, snr=3.0)
    p = AppProfile("a", c, demand_rate=1e6, current_draw=120.0)
    data, power, battery, current = app_tick_usage(p, 60.0)
    assert data == shannon_rate(1e6, 3.0) * 60.0
    assert power == inverse_shannon_power(1e-6, 0.1, 1e6, 1e6)
    assert battery == 120.0 * (60.0 / 3600.0)
    assert current == 120.0


def test_measured_tick_usage_passthrough():
    m = MeasuredProfile("tbl", data_rate=0.577, battery_used=2.0,
                        power_used=16.44, current=0.0)
    assert measured_tick_usage(m) == (0.577, 16.44, 2.0, 0.0)
    # dispatch sees the same numbers regardless of dt
    assert tick_usage(m, 1.0) == tick_usage(m, 3600.0)


def test_tick_usage_rejects_bad_dt():
    c = ChannelParams(noise_power=1e-6, channel_gain=0.1, bandwidth=1e6, snr=3.0)
    p = AppProfile("a", c, demand_rate=1e6, current_draw=120.0)
    with pytest.raises(DomainError):
        app_tick_usage(p, 0.0)


# ------------------------------------------------------------- (de)serialize


def test_profile_dict_round_trip():
    c = ChannelParams(noise_power=1e-6, channel_gain=0.1, bandwidth=1e6, snr=3.0)
    p = AppProfile("a", c, demand_rate=1e6, current_draw=120.0, duty_cycle=0.25)
    assert profile_from_dict(profile_to_dict(p)) == p

    m = MeasuredProfile("tbl", 0.577, 2.0, 16.44, 7.0)
    assert profile_from_dict(profile_to_dict(m)) == m


def test_profile_kind_inferred_from_shape():
    d = {"app_id": "x", "data_rate": 1.0, "battery_used": 2.0, "power_used": 3.0}
    assert isinstance(profile_from_dict(d), MeasuredProfile)


def test_profile_unknown_kind():
    with pytest.raises(DomainError):
        profile_from_dict({"kind": "mystery", "app_id": "x"})


def test_snr_consistency_check():
    c = ChannelParams(noise_power=2.0, channel_gain=4.0, bandwidth=1.0, snr=6.0)
    check_snr_consistency(c, transmit_power=3.0)  # 3*4/2 == 6
    with pytest.raises(DomainError, match="inconsistent"):
        check_snr_consistency(c, transmit_power=4.0)
