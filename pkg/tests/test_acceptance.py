"""End-to-end acceptance checks.

One test per shipping criterion; each prints a single PASS or FAIL line
(run `pytest tests/test_acceptance.py -s` to see the lines on success;
pytest shows them automatically on failure). Wall-clock budgets are part
of the criteria and asserted here.
"""

import json
import math
import time
from contextlib import contextmanager

from abma.cli import EXIT_ALARM, EXIT_OK, main
from abma.datasets import load_dataset
from abma.detector import (
    ENERGY,
    POWER,
    RATE,
    DetectorConfig,
    aggregate_observed,
    estimate_baseline,
    first_alarm_tick,
    run_monitor,
)
from abma.device_sim import build_scenario, profiles_from_config, run_simulation
from abma.prng import Xoshiro256StarStar, stream_seed
from abma.resource_model import (
    BatteryModel,
    EnergyParams,
    battery_lifetime,
    energy_consumed,
    inverse_shannon_power,
    remaining_lifetime,
    shannon_rate,
)
from abma.trace_io import dataset_to_trace, dataset_valid_profiles

MASTER_SEED = 271828


@contextmanager
def _criterion(label, budget_seconds=None):
    start = time.perf_counter()
    try:
        yield
        elapsed = time.perf_counter() - start
        if budget_seconds is not None and elapsed >= budget_seconds:
            raise AssertionError(
                f"{label} took {elapsed:.2f}s, budget {budget_seconds}s")
    except BaseException:
        print(f"{label}: FAIL")
        raise
    print(f"{label}: PASS ({elapsed:.2f}s)")


def _rng(label):
    return Xoshiro256StarStar(stream_seed(MASTER_SEED, label))


# --------------------------------------------------------------- criterion 1


def test_acceptance_1_measured_table_replay(capsys):
    with _criterion("acceptance 1 (measured-table replay)", budget_seconds=1.0):
        assert main(["replay", "--table", "3", "--duration", "1h",
                     "--with-intruder", "true", "--epsilon", "0.05"]) == EXIT_ALARM
        out = capsys.readouterr().out
        assert "power: estimated 471.573 observed 645.723 VIOLATED" in out
        assert "rate: estimated 89.363 observed 120.063 VIOLATED" in out
        assert main(["replay", "--table", "3", "--duration", "1h",
                     "--with-intruder", "false", "--epsilon", "0.05"]) == EXIT_OK
        capsys.readouterr()

        expected_1h = {"est_power": 471.573, "obs_power": 645.723,
                       "est_rate": 89.363, "obs_rate": 120.063,
                       "est_battery": 27.88, "obs_battery": 33.10}
        for source in ("mobile_data", "hybrid"):
            for duration in ("1h", "1d", "1w", "1m"):
                ds = load_dataset(source, duration)
                profiles = dataset_valid_profiles(ds)
                config = DetectorConfig(tolerance=0.05, consecutive_required=1,
                                        battery_ref=100.0, dt_seconds=60.0)
                with_i = dataset_to_trace(ds, include_intruder=True)
                without = dataset_to_trace(ds, include_intruder=False)
                assert first_alarm_tick(run_monitor(with_i, profiles, config)) == 0, \
                    (source, duration)
                assert first_alarm_tick(run_monitor(without, profiles, config)) is None, \
                    (source, duration)
                if source == "mobile_data" and duration == "1h":
                    est = estimate_baseline(profiles, [], config)
                    obs = aggregate_observed(list(with_i.samples), 60.0)
                    got = {"est_power": est.est_power, "obs_power": obs.obs_power,
                           "est_rate": est.est_rate, "obs_rate": obs.obs_rate,
                           "est_battery": est.est_battery,
                           "obs_battery": obs.obs_battery}
                    for key, want in expected_1h.items():
                        assert math.isclose(got[key], want, rel_tol=0.0,
                                            abs_tol=1e-6), (key, got[key], want)


# --------------------------------------------------------------- criterion 2


def _random_channel_app(rng, app_id):
    # Bounds keep every term within ~6 orders of magnitude of the device
    # totals, so strict float comparisons cannot be faked by lost precision.
    bandwidth = 1.0e4 * 10.0 ** (3.0 * rng.random())
    snr = 0.5 + 99.5 * rng.random()
    demand = (0.2 + 1.8 * rng.random()) * shannon_rate(bandwidth, snr)
    return {
        "kind": "channel", "app_id": app_id,
        "noise_power": 1.0e-9, "channel_gain": 1.0e-8,
        "bandwidth": bandwidth, "snr": snr, "demand_rate": demand,
        "current_draw": 10.0 + 290.0 * rng.random(), "duty_cycle": 1.0,
    }


def _battery_block():
    return {"capacity_mah": 4000.0, "level_mah": 4000.0,
            "circuit_drain_mah_per_tick": 0.1, "circuit_current_ma": 10.0,
            "derating": 0.7}


def _scenario_dict(apps, seed, horizon, intruder=None, trigger=0, jitter=0.0):
    config = {
        "seed": seed, "units": "si", "dt_seconds": 60.0,
        "horizon_ticks": horizon,
        "device": {"battery": _battery_block(), "connectivity": "WiFi"},
        "apps": apps,
        "noise": {"relative_jitter": jitter},
    }
    if intruder is not None:
        config["attack"] = {"enabled": True, "trigger_tick": trigger,
                            "download_duration_ticks": 0, "profile": intruder}
    return config


def _tick_totals(trace):
    totals = []
    for _t, _events, samples in trace.by_tick():
        totals.append((
            sum(s.power_used for s in samples),
            sum(s.data_used for s in samples),
            sum(s.battery_delta for s in samples),
            [s.current for s in samples],
        ))
    return totals


def test_acceptance_2_hidden_consumer_orderings():
    with _criterion("acceptance 2 (hidden-consumer orderings)", budget_seconds=10.0):
        rng = _rng("acceptance-orderings")
        battery = BatteryModel(**{
            "capacity": 4000.0, "level": 4000.0, "circuit_battery_drain": 0.1,
            "circuit_current": 10.0, "derating": 0.7})
        counterexamples = []
        for index in range(1000):
            n_apps = 1 + int(rng.random() * 12)
            apps = [_random_channel_app(rng, f"app-{index}-{i}")
                    for i in range(n_apps)]
            intruder = _random_channel_app(rng, f"ghost-{index}")
            seed = MASTER_SEED + index
            with_i = run_simulation(build_scenario(
                _scenario_dict(apps, seed, 4, intruder=intruder)))
            without = run_simulation(build_scenario(
                _scenario_dict(apps, seed, 4)))

            consumed_att = consumed_val = 0.0
            energy_att = energy_val = 0.0
            for tick, (att, val) in enumerate(zip(_tick_totals(with_i.trace),
                                                  _tick_totals(without.trace))):
                consumed_att += att[2] + battery.circuit_battery_drain
                consumed_val += val[2] + battery.circuit_battery_drain
                energy_att += att[0] * 60.0 / 3600.0
                energy_val += val[0] * 60.0 / 3600.0
                life_att = remaining_lifetime(battery, consumed_att, att[3])
                life_val = remaining_lifetime(battery, consumed_val, val[3])
                ok = (att[0] > val[0] and att[1] > val[1]
                      and life_att < life_val and energy_att > energy_val)
                if not ok:
                    counterexamples.append((index, tick))
        assert counterexamples == []


# --------------------------------------------------------------- criterion 3


def _margin_intruder(apps, fraction, app_id):
    """Channel profile drawing `fraction` of the visible apps' total power."""
    total = sum(inverse_shannon_power(a["noise_power"], a["channel_gain"],
                                      a["demand_rate"], a["bandwidth"])
                for a in apps)
    # snr 3 with demand at exactly twice the bandwidth makes the required
    # power (noise * 3 / gain); solve for the noise term.
    return {
        "kind": "channel", "app_id": app_id,
        "noise_power": fraction * total * 1.0e-8 / 3.0, "channel_gain": 1.0e-8,
        "bandwidth": 1.0e6, "snr": 3.0, "demand_rate": 2.0e6,
        "current_draw": 50.0, "duty_cycle": 1.0,
    }


def test_acceptance_3_soundness_and_detectability():
    with _criterion("acceptance 3 (soundness and detectability)",
                    budget_seconds=30.0):
        rng = _rng("acceptance-soundness")
        config = DetectorConfig(tolerance=0.05, consecutive_required=3,
                                battery_ref=4000.0, dt_seconds=60.0)

        false_positives = 0
        for index in range(500):
            n_apps = 1 + int(rng.random() * 12)
            apps = [_random_channel_app(rng, f"clean-{index}-{i}")
                    for i in range(n_apps)]
            result = run_simulation(build_scenario(
                _scenario_dict(apps, MASTER_SEED + index, 8)))
            verdicts = run_monitor(result.trace,
                                   profiles_from_config(apps, "si"), config)
            if first_alarm_tick(verdicts) is not None:
                false_positives += 1
        assert false_positives == 0

        detected = 0
        for index in range(500):
            n_apps = 1 + int(rng.random() * 12)
            apps = [_random_channel_app(rng, f"prey-{index}-{i}")
                    for i in range(n_apps)]
            trigger = 2 + int(rng.random() * 4)  # 2..5
            intruder = _margin_intruder(apps, 0.2, f"ghost-{index}")
            result = run_simulation(build_scenario(_scenario_dict(
                apps, MASTER_SEED + index, trigger + 6,
                intruder=intruder, trigger=trigger)))
            verdicts = run_monitor(result.trace,
                                   profiles_from_config(apps, "si"), config)
            alarm = first_alarm_tick(verdicts)
            expected = trigger + (config.consecutive_required - 1)
            assert alarm == expected, (index, alarm, expected)
            detected += 1
        assert detected == 500


# --------------------------------------------------------------- criterion 4


def test_acceptance_4_closed_form_oracles():
    with _criterion("acceptance 4 (closed-form oracles)"):
        assert battery_lifetime(4000.0, [700.0], 0.7) == 4.0

        rng = _rng("acceptance-roundtrip")
        worst = 0.0
        for _ in range(10_000):
            noise = 1.0e-9 * 10.0 ** (6.0 * rng.random())
            gain = 1.0e-9 * 10.0 ** (8.0 * rng.random())
            bandwidth = 1.0e3 * 10.0 ** (5.0 * rng.random())
            snr = 1.0e-3 * 10.0 ** (7.0 * rng.random())
            rate = shannon_rate(bandwidth, snr)
            power = inverse_shannon_power(noise, gain, rate, bandwidth)
            recovered = power * gain / noise
            worst = max(worst, abs(recovered - snr) / snr)
        assert worst < 1e-9, worst

        one_wh = energy_consumed(EnergyParams(transmission_latency=1.0,
                                              battery_energy_drawn=3600.0))
        assert one_wh == 1.0


# --------------------------------------------------------------- criterion 5


def test_acceptance_5_byte_determinism(tmp_path, capsys):
    with _criterion("acceptance 5 (byte determinism)"):
        config = tmp_path / "scenario.json"
        from abma.device_sim import default_config
        config.write_text(json.dumps(default_config()))
        a, b = str(tmp_path / "a.ndjson"), str(tmp_path / "b.ndjson")
        assert main(["simulate", "--config", str(config), "--out", a]) == EXIT_OK
        assert main(["simulate", "--config", str(config), "--out", b]) == EXIT_OK
        with open(a, "rb") as fa, open(b, "rb") as fb:
            assert fa.read() == fb.read()

        base = default_config()
        base["horizon_ticks"] = 10
        base["attack"]["trigger_tick"] = 4
        base["attack"]["download_duration_ticks"] = 0
        spec = {"variable": "Duration", "values": [8, 10], "seeds": [7, 8],
                "base_scenario": base}
        spec_path = tmp_path / "spec.json"
        spec_path.write_text(json.dumps(spec))
        out1, out2 = str(tmp_path / "s1"), str(tmp_path / "s2")
        assert main(["sweep", "--spec", str(spec_path), "--out", out1]) == EXIT_OK
        assert main(["sweep", "--spec", str(spec_path), "--out", out2]) == EXIT_OK
        with open(f"{out1}/metrics.csv", "rb") as f1, \
                open(f"{out2}/metrics.csv", "rb") as f2:
            csv1, csv2 = f1.read(), f2.read()
        assert csv1 == csv2
        assert csv1.count(b"\n") == 5  # header + 4 cells
        capsys.readouterr()  # drop the subcommand chatter; keep one verdict line


# --------------------------------------------------------------- criterion 6


def _margin_grid_scenario(seed, jitter, margin, n_apps=4, horizon=20):
    # Identical visible apps, intruder a scaled clone: every per-tick
    # aggregate carries the hidden contribution at exactly `margin` times
    # the visible total, and the trigger at tick 0 keeps every tick loaded.
    apps = [{"kind": "channel", "app_id": f"app-{i}",
             "noise_power": 1.0e-9, "channel_gain": 1.0e-8,
             "bandwidth": 2.0e6, "snr": 3.0, "demand_rate": 4.0e6,
             "current_draw": 100.0, "duty_cycle": 1.0}
            for i in range(n_apps)]
    s = n_apps * margin
    intruder = {"kind": "channel", "app_id": "ghost",
                "noise_power": 1.0e-9 * s, "channel_gain": 1.0e-8,
                "bandwidth": 2.0e6 * s, "snr": 3.0, "demand_rate": 4.0e6 * s,
                "current_draw": 100.0 * s, "duty_cycle": 1.0}
    return _scenario_dict(apps, seed, horizon, intruder=intruder,
                          trigger=0, jitter=jitter), apps


def test_acceptance_6_noise_robustness_grid():
    with _criterion("acceptance 6 (noise robustness grid)", budget_seconds=120.0):
        jitters = (0.0, 0.01, 0.02, 0.05, 0.1)
        margins = (0.02, 0.05, 0.1, 0.2, 0.4)
        n_seeds = 50
        config = DetectorConfig(
            tolerance=0.01, consecutive_required=3,
            criteria_enabled=frozenset({POWER, RATE, ENERGY}),
            dt_seconds=60.0)

        rates = {}
        for jitter in jitters:
            for margin in margins:
                detected = 0
                for offset in range(n_seeds):
                    # same seeds in every cell: paired noise draws make the
                    # monotonicity comparable cell to cell
                    scenario, apps = _margin_grid_scenario(
                        MASTER_SEED + offset, jitter, margin)
                    result = run_simulation(build_scenario(scenario))
                    verdicts = run_monitor(
                        result.trace, profiles_from_config(apps, "si"), config)
                    if first_alarm_tick(verdicts) is not None:
                        detected += 1
                rates[(jitter, margin)] = detected / n_seeds

        for margin in margins:
            along_jitter = [rates[(j, margin)] for j in jitters]
            assert all(a >= b for a, b in zip(along_jitter, along_jitter[1:])), \
                (margin, along_jitter)
        for jitter in jitters:
            along_margin = [rates[(jitter, m)] for m in margins]
            assert all(a <= b for a, b in zip(along_margin, along_margin[1:])), \
                (jitter, along_margin)
        assert rates[(0.0, 0.4)] == 1.0
