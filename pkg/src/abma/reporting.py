"""Batch analyses over paired simulation runs.

A sweep varies one scenario dimension (active app count, horizon,
connectivity), runs each cell with and without the hidden consumer on
matched seeds, and reduces each pair to one metrics row: efficiency,
energy, lifetime, a complexity figure (relative growth in total power),
and detection quality against the simulator's ground truth. Rows are
emitted as plot-ready CSV with 9-significant-digit decimals so re-runs
are byte-identical.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

from .detector import (
    DetectorConfig,
    first_alarm_tick,
    resolve_battery_ref,
    run_monitor,
)
from .device_sim import BatteryExhaustedError, ScenarioError, build_scenario, run_simulation
from .resource_model import (
    DomainError,
    attack_energy_efficiency,
    energy_efficiency,
    profile_from_dict,
    remaining_lifetime,
)
from .trace_io import fmt9

SWEEP_VARIABLES = ("ActiveAppCount", "Duration", "Connectivity")

# Link-rate scaling mirrors the built-in scenario's connectivity modes.
_CONNECTIVITY_SCALE = {"WiFi": 1.0, "MobileData": 0.03, "Hybrid": 1.03}

CSV_COLUMNS = (
    "scenario_id", "variable", "value", "seed",
    "ee_valid", "ee_attack",
    "energy_valid", "energy_attack",
    "lifetime_valid", "lifetime_attack",
    "complexity_pct",
    "detection_rate", "false_positive_rate", "mean_ttd",
)


class SweepError(ValueError):
    pass


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    values: tuple
    repetitions: int = 1
    base_scenario: dict = None
    seeds: tuple = None  # one run per (value, seed); default derived from repetitions

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise SweepError(f"unknown sweep variable {self.variable!r}")
        if not self.values:
            raise SweepError("values must be nonempty")
        if self.repetitions < 1:
            raise SweepError("repetitions must be >= 1")

    def resolved_seeds(self, base_seed: int):
        if self.seeds:
            return tuple(int(s) for s in self.seeds)
        return tuple(base_seed + i for i in range(self.repetitions))


@dataclass(frozen=True)
class MetricsRow:
    scenario_id: str
    variable: str
    value: object
    seed: int
    ee_valid: float
    ee_attack: float
    energy_valid: float
    energy_attack: float
    lifetime_valid: float
    lifetime_attack: float
    complexity_pct: float
    detection_rate: float        # 1.0 if this cell's attack run alarmed
    false_positive_rate: float   # 1.0 if this cell's clean run alarmed
    mean_ttd: float              # ticks from activation to alarm; None if missed


def _scale_channel_profile(entry: dict, ratio: float) -> dict:
    scaled = dict(entry)
    if entry.get("kind", "channel") == "channel":
        scaled["bandwidth"] = entry["bandwidth"] * ratio
        scaled["demand_rate"] = entry["demand_rate"] * ratio
    return scaled


def apply_variable(base: dict, variable: str, value) -> dict:
    """One cell's scenario config: the base with `variable` set to `value`."""
    config = copy.deepcopy(base)
    if variable == "ActiveAppCount":
        n = int(value)
        if n < 1:
            raise SweepError("ActiveAppCount values must be >= 1")
        apps = config.get("apps", [])
        if not apps:
            raise SweepError("base scenario has no apps to vary")
        chosen = []
        for i in range(n):
            src = dict(apps[i % len(apps)])
            if i >= len(apps):
                src["app_id"] = f"{src['app_id']}-{i // len(apps)}"
            chosen.append(src)
        config["apps"] = chosen
    elif variable == "Duration":
        config["horizon_ticks"] = int(value)
    elif variable == "Connectivity":
        if value not in _CONNECTIVITY_SCALE:
            raise SweepError(f"unknown connectivity value {value!r}")
        old = config.get("device", {}).get("connectivity", "WiFi")
        ratio = _CONNECTIVITY_SCALE[value] / _CONNECTIVITY_SCALE.get(old, 1.0)
        config.setdefault("device", {})["connectivity"] = value
        config["apps"] = [_scale_channel_profile(a, ratio) for a in config.get("apps", [])]
        if "attack" in config:
            config["attack"]["profile"] = _scale_channel_profile(
                config["attack"]["profile"], ratio)
    else:
        raise SweepError(f"unknown sweep variable {variable!r}")
    return config


def cell_configs(spec: SweepSpec, value, seed: int):
    """(with-attack, without-attack) configs for one sweep cell."""
    base = spec.base_scenario
    if not base:
        raise SweepError("sweep needs a base_scenario")
    if "attack" not in base:
        raise SweepError("base scenario needs an attack block to pair runs")
    config = apply_variable(base, spec.variable, value)
    config["seed"] = int(seed)
    with_attack = copy.deepcopy(config)
    with_attack["attack"]["enabled"] = True
    without_attack = copy.deepcopy(config)
    del without_attack["attack"]
    return with_attack, without_attack


def _totals(trace):
    """(data, power, currents-at-last-tick) split into visible/hidden parts."""
    vis = {"data": 0.0, "power": 0.0}
    hid = {"data": 0.0, "power": 0.0}
    last_tick = max((s.tick for s in trace.samples), default=0)
    currents = 0.0
    for s in trace.samples:
        bucket = vis if s.visible else hid
        bucket["data"] += s.data_used
        bucket["power"] += s.power_used
        if s.tick == last_tick:
            currents += s.current
    return vis, hid, currents


def _run_cell(spec: SweepSpec, value, seed: int, detector_config: DetectorConfig,
              ee_numerator: str):
    cfg_att, cfg_val = cell_configs(spec, value, seed)
    scen_att = build_scenario(cfg_att)
    scen_val = build_scenario(cfg_val)
    res_att = run_simulation(scen_att, allow_exhaustion=True)
    res_val = run_simulation(scen_val, allow_exhaustion=True)

    vis_att, hid_att, currents_att = _totals(res_att.trace)
    vis_val, _hid_val, currents_val = _totals(res_val.trace)
    dt = scen_att.dt_seconds

    power_att = vis_att["power"] + hid_att["power"]
    power_val = vis_val["power"]
    ee_val = energy_efficiency(vis_val["data"], power_val)
    ee_att = attack_energy_efficiency(vis_att["data"], hid_att["data"],
                                      vis_att["power"], hid_att["power"],
                                      numerator=ee_numerator)

    battery0 = scen_att.initial_state.battery
    consumed_att = battery0.level - res_att.final_state.battery.level
    consumed_val = battery0.level - res_val.final_state.battery.level
    lifetime_att = remaining_lifetime(battery0, consumed_att, [currents_att])
    lifetime_val = remaining_lifetime(battery0, consumed_val, [currents_val])

    det_cfg = resolve_battery_ref(detector_config, scen_att.units,
                                  capacity=battery0.capacity)
    profiles = [profile_from_dict(e) for e in cfg_att["apps"]]
    verdicts_att = run_monitor(res_att.trace, profiles, det_cfg)
    verdicts_val = run_monitor(res_val.trace, profiles, det_cfg)
    alarm = first_alarm_tick(verdicts_att)
    fp = first_alarm_tick(verdicts_val)

    return MetricsRow(
        scenario_id=f"{spec.variable}={value}/seed={seed}",
        variable=spec.variable,
        value=value,
        seed=seed,
        ee_valid=ee_val,
        ee_attack=ee_att,
        energy_valid=power_val * dt / 3600.0,
        energy_attack=power_att * dt / 3600.0,
        lifetime_valid=lifetime_val,
        lifetime_attack=lifetime_att,
        complexity_pct=100.0 * (power_att - power_val) / power_val,
        detection_rate=1.0 if alarm is not None else 0.0,
        false_positive_rate=1.0 if fp is not None else 0.0,
        mean_ttd=(float(alarm - scen_att.activation_tick)
                  if alarm is not None else None),
    )


def _failed_cell_row(spec: SweepSpec, value, seed: int) -> MetricsRow:
    return MetricsRow(
        scenario_id=f"{spec.variable}={value}/seed={seed}",
        variable=spec.variable, value=value, seed=seed,
        ee_valid=None, ee_attack=None, energy_valid=None, energy_attack=None,
        lifetime_valid=None, lifetime_attack=None, complexity_pct=None,
        detection_rate=None, false_positive_rate=None, mean_ttd=None)


def run_sweep(spec: SweepSpec, detector_config: DetectorConfig = None,
              ee_numerator: str = "minus"):
    """One MetricsRow per (value, seed), in spec order. Deterministic.

    A cell whose run degenerates (battery dead before any usable tick, say)
    still gets its row, with empty metric fields; the sweep itself carries
    on. Rerunning that one cell reproduces the failure for diagnosis.
    """
    if detector_config is None:
        detector_config = DetectorConfig()
    base_seed = int(spec.base_scenario.get("seed", 0)) if spec.base_scenario else 0
    seeds = spec.resolved_seeds(base_seed)
    rows = []
    for value in spec.values:
        for seed in seeds:
            try:
                rows.append(_run_cell(spec, value, seed, detector_config,
                                      ee_numerator))
            except (BatteryExhaustedError, DomainError, ScenarioError):
                rows.append(_failed_cell_row(spec, value, seed))
    return rows


def detection_quality(verdict_batches, ground_truth):
    """(detection_rate, false_positive_rate, mean_ttd) over aligned batches.

    ground_truth holds each run's activation tick, or None for a clean run.
    A rate is None when its denominator is empty (no runs of that kind).
    """
    if len(verdict_batches) != len(ground_truth):
        raise ValueError(
            f"{len(verdict_batches)} batches vs {len(ground_truth)} truths")
    if not verdict_batches:
        raise ValueError("empty batch")
    detected = missed = clean = alarmed_clean = 0
    ttds = []
    for verdicts, truth in zip(verdict_batches, ground_truth):
        alarm = first_alarm_tick(verdicts)
        if truth is None:
            clean += 1
            if alarm is not None:
                alarmed_clean += 1
        elif alarm is None:
            missed += 1
        else:
            detected += 1
            ttds.append(alarm - truth)
    with_truth = detected + missed
    detection_rate = detected / with_truth if with_truth else None
    fpr = alarmed_clean / clean if clean else None
    mean_ttd = sum(ttds) / len(ttds) if ttds else None
    return detection_rate, fpr, mean_ttd


def _cell_text(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return fmt9(v)
    return str(v)


def emit_csv(rows, path) -> None:
    """Stable column order, header row, 9-digit decimals; byte-deterministic."""
    with open(path, "w", encoding="utf-8", newline="\n") as fp:
        fp.write(",".join(CSV_COLUMNS) + "\n")
        for row in rows:
            fp.write(",".join(_cell_text(getattr(row, col)) for col in CSV_COLUMNS) + "\n")


def read_metrics_csv(path):
    """Parse a metrics CSV back into MetricsRow values."""
    def _num(text):
        if text == "":
            return None
        return float(text)

    def _value(text):
        try:
            return int(text)
        except ValueError:
            return text

    rows = []
    with open(path, "r", encoding="utf-8") as fp:
        header = fp.readline().strip().split(",")
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV columns {header}")
        for line in fp:
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            kw = dict(zip(CSV_COLUMNS, cells))
            rows.append(MetricsRow(
                scenario_id=kw["scenario_id"],
                variable=kw["variable"],
                value=_value(kw["value"]),
                seed=int(kw["seed"]),
                ee_valid=_num(kw["ee_valid"]),
                ee_attack=_num(kw["ee_attack"]),
                energy_valid=_num(kw["energy_valid"]),
                energy_attack=_num(kw["energy_attack"]),
                lifetime_valid=_num(kw["lifetime_valid"]),
                lifetime_attack=_num(kw["lifetime_attack"]),
                complexity_pct=_num(kw["complexity_pct"]),
                detection_rate=_num(kw["detection_rate"]),
                false_positive_rate=_num(kw["false_positive_rate"]),
                mean_ttd=_num(kw["mean_ttd"]),
            ))
    return rows


def summarize(rows):
    """Per-value means across seeds, in first-seen value order."""
    order = []
    groups = {}
    for row in rows:
        if row.value not in groups:
            groups[row.value] = []
            order.append(row.value)
        groups[row.value].append(row)

    def _mean(values):
        values = [v for v in values if v is not None]
        return sum(values) / len(values) if values else None

    summary = []
    for value in order:
        cell = groups[value]
        summary.append({
            "variable": cell[0].variable,
            "value": value,
            "n_seeds": len(cell),
            "ee_valid": _mean([r.ee_valid for r in cell]),
            "ee_attack": _mean([r.ee_attack for r in cell]),
            "energy_valid": _mean([r.energy_valid for r in cell]),
            "energy_attack": _mean([r.energy_attack for r in cell]),
            "lifetime_valid": _mean([r.lifetime_valid for r in cell]),
            "lifetime_attack": _mean([r.lifetime_attack for r in cell]),
            "complexity_pct": _mean([r.complexity_pct for r in cell]),
            "detection_rate": _mean([r.detection_rate for r in cell]),
            "false_positive_rate": _mean([r.false_positive_rate for r in cell]),
            "mean_ttd": _mean([r.mean_ttd for r in cell]),
        })
    return summary


SUMMARY_COLUMNS = (
    "variable", "value", "n_seeds",
    "ee_valid", "ee_attack", "energy_valid", "energy_attack",
    "lifetime_valid", "lifetime_attack", "complexity_pct",
    "detection_rate", "false_positive_rate", "mean_ttd",
)


def emit_summary_csv(summary, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fp:
        fp.write(",".join(SUMMARY_COLUMNS) + "\n")
        for entry in summary:
            fp.write(",".join(_cell_text(entry[col]) for col in SUMMARY_COLUMNS) + "\n")
