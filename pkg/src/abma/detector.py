"""Behavioral-model detection engine.

Per tick, an estimated aggregate for the visible app set is compared
against the observed device totals (which include anything hidden) on
four criteria: power, data rate, battery level, and energy. A criterion
is violated when the observation leaves a relative tolerance band around
the estimate in the direction extra consumption pushes it: above the band
for power/rate/energy, below it for battery level. After a configurable
number of consecutive violating ticks the alarm fires and the response
(cutting connectivity) is taken.

Baselines come from the consumption model over the visible profiles, or
adaptively from a warmup window of live observations certified
intruder-free. Estimates are quantized to the trace format's 9-digit
grid per app before summing, so a noise-free trace matches its estimate
bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from ._version import __version__
from .device_sim import BatteryExhaustedError, Simulation, disconnect
from .resource_model import profile_from_dict, tick_usage
from .trace_io import VERDICT_FORMAT_VERSION, round9

POWER = "Power"
RATE = "Rate"
BATTERY = "Battery"
ENERGY = "Energy"
CRITERIA = (POWER, RATE, BATTERY, ENERGY)

BASELINE_MODES = ("Model", "LiveAdaptive")


class DetectorConfigError(ValueError):
    pass


class InsufficientHistoryError(ValueError):
    """Adaptive baseline asked for before its warmup window filled."""


class TickMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class DetectorConfig:
    tolerance: float = 0.05          # relative band half-width
    consecutive_required: int = 3    # violating ticks before the alarm
    warmup_window: int = 10          # ticks of live data an adaptive baseline needs
    baseline_mode: str = "Model"
    criteria_enabled: frozenset = frozenset(CRITERIA)
    battery_ref: float = None        # full battery level the used-sum counts down from
    dt_seconds: float = 60.0

    def __post_init__(self):
        if not (0.0 <= self.tolerance < 1.0):
            raise DetectorConfigError(f"tolerance must be in [0, 1), got {self.tolerance}")
        if self.consecutive_required < 1:
            raise DetectorConfigError("consecutive_required must be >= 1")
        if self.warmup_window < 1:
            raise DetectorConfigError("warmup_window must be >= 1")
        if self.baseline_mode not in BASELINE_MODES:
            raise DetectorConfigError(f"unknown baseline_mode {self.baseline_mode!r}")
        unknown = set(self.criteria_enabled) - set(CRITERIA)
        if unknown:
            raise DetectorConfigError(f"unknown criteria {sorted(unknown)}")


@dataclass(frozen=True)
class BaselineEstimate:
    tick: int
    est_power: float
    est_rate: float     # data moved over the tick, same unit as observed data
    est_battery: float  # battery used over the tick
    est_energy: float
    source: str = "Model"


@dataclass(frozen=True)
class ObservedAggregate:
    tick: int
    obs_power: float
    obs_rate: float
    obs_battery: float
    obs_energy: float


@dataclass(frozen=True)
class DetectionVerdict:
    tick: int
    violated: frozenset
    intruder_present: bool
    alarm_raised: bool
    response_taken: bool = False


def estimate_baseline(visible_profiles, history, config: DetectorConfig,
                      tick: int = 0) -> BaselineEstimate:
    """Expected aggregate for the visible app set at one tick.

    Model mode evaluates the consumption model per profile, quantizing each
    app's figures exactly as the telemetry path does before summing.
    Adaptive mode averages the trailing warmup window of `history`, which
    the caller certifies intruder-free.
    """
    if config.baseline_mode == "LiveAdaptive":
        if len(history) < config.warmup_window:
            raise InsufficientHistoryError(
                f"adaptive baseline needs {config.warmup_window} observed ticks, "
                f"have {len(history)}")
        window = history[-config.warmup_window:]
        n = float(len(window))
        return BaselineEstimate(
            tick=tick,
            est_power=sum(o.obs_power for o in window) / n,
            est_rate=sum(o.obs_rate for o in window) / n,
            est_battery=sum(o.obs_battery for o in window) / n,
            est_energy=sum(o.obs_energy for o in window) / n,
            source="LiveAdaptive",
        )
    est_rate = 0.0
    est_power = 0.0
    est_battery = 0.0
    for p in visible_profiles:
        data, power, battery, _current = tick_usage(p, config.dt_seconds)
        est_rate += round9(data)
        est_power += round9(power)
        est_battery += round9(battery)
    return BaselineEstimate(
        tick=tick,
        est_power=est_power,
        est_rate=est_rate,
        est_battery=est_battery,
        est_energy=est_power * config.dt_seconds / 3600.0,
        source="Model",
    )


def aggregate_observed(samples, dt_seconds: float = 60.0, tick=None) -> ObservedAggregate:
    """Device-total consumption at one tick, hidden contributions included."""
    if samples:
        ticks = {s.tick for s in samples}
        if len(ticks) > 1:
            raise TickMismatchError(f"samples span ticks {sorted(ticks)}")
        tick = samples[0].tick
    elif tick is None:
        tick = 0
    obs_rate = 0.0
    obs_power = 0.0
    obs_battery = 0.0
    for s in samples:
        obs_rate += s.data_used
        obs_power += s.power_used
        obs_battery += s.battery_delta
    return ObservedAggregate(
        tick=tick,
        obs_power=obs_power,
        obs_rate=obs_rate,
        obs_battery=obs_battery,
        obs_energy=obs_power * dt_seconds / 3600.0,
    )


def evaluate(baseline: BaselineEstimate, observed: ObservedAggregate,
             config: DetectorConfig, streak: int):
    """Compare one tick; returns (verdict, new_streak).

    Violations are one-sided: a hidden consumer can only push power, rate,
    and energy above the estimate and battery level below it, so only
    those directions count. The streak counts consecutive ticks with at
    least one enabled violation; the alarm needs a full streak.
    """
    if baseline.tick != observed.tick:
        raise TickMismatchError(
            f"baseline tick {baseline.tick} vs observed tick {observed.tick}")
    eps = config.tolerance
    enabled = config.criteria_enabled
    violated = set()
    if POWER in enabled and observed.obs_power > baseline.est_power * (1.0 + eps):
        violated.add(POWER)
    if RATE in enabled and observed.obs_rate > baseline.est_rate * (1.0 + eps):
        violated.add(RATE)
    if ENERGY in enabled and observed.obs_energy > baseline.est_energy * (1.0 + eps):
        violated.add(ENERGY)
    if BATTERY in enabled:
        if config.battery_ref is None:
            raise DetectorConfigError(
                "battery_ref required while the Battery criterion is enabled")
        obs_level = max(config.battery_ref - observed.obs_battery, 0.0)
        est_level = max(config.battery_ref - baseline.est_battery, 0.0)
        if obs_level < est_level * (1.0 - eps):
            violated.add(BATTERY)
    new_streak = streak + 1 if violated else 0
    present = new_streak >= config.consecutive_required
    verdict = DetectionVerdict(
        tick=observed.tick,
        violated=frozenset(violated),
        intruder_present=present,
        alarm_raised=present,
    )
    return verdict, new_streak


def respond(state, verdict: DetectionVerdict):
    """Cut connectivity in reaction to an alarm. Idempotent on the device."""
    if not verdict.alarm_raised:
        raise ValueError("respond requires a raised alarm")
    return disconnect(state)


def resolve_battery_ref(config: DetectorConfig, units: str,
                        capacity=None) -> DetectorConfig:
    """Fill in battery_ref for a unit system when the config left it open.

    Table-native traces count battery in % of a full charge, so the
    reference is 100. SI-path traces count mAh, so the pack capacity is
    needed; without one the Battery criterion cannot run.
    """
    if config.battery_ref is not None:
        return config
    if units == "table-native":
        return replace(config, battery_ref=100.0)
    if capacity is not None:
        return replace(config, battery_ref=float(capacity))
    if BATTERY in config.criteria_enabled:
        raise DetectorConfigError(
            "battery_ref (pack capacity) required for si traces "
            "while the Battery criterion is enabled")
    return replace(config, battery_ref=0.0)


class Monitor:
    """Per-tick detection fold: census tracking, baseline, debounce."""

    def __init__(self, visible_profiles, config: DetectorConfig):
        self.profiles = list(visible_profiles)
        self.config = config
        self.streak = 0
        self.history = []
        self._frozen = None  # adaptive baseline locked after warmup

    def _handle_events(self, events):
        for e in events:
            if e.kind == "census":
                self.profiles = [profile_from_dict(d)
                                 for d in e.data.get("visible_profiles", [])]
                # The baseline no longer describes the device; start over.
                self.streak = 0
                self.history = []
                self._frozen = None

    def observe(self, tick: int, events, samples) -> DetectionVerdict:
        self._handle_events(events)
        obs = aggregate_observed(samples, self.config.dt_seconds, tick=tick)
        if self.config.baseline_mode == "LiveAdaptive":
            if self._frozen is None:
                self.history.append(obs)
                if len(self.history) >= self.config.warmup_window:
                    self._frozen = estimate_baseline(
                        self.profiles, self.history, self.config, tick=tick)
                # Still warming up (or just finished on this tick): nothing
                # to compare against yet, so the tick passes clean.
                return DetectionVerdict(tick=tick, violated=frozenset(),
                                        intruder_present=False, alarm_raised=False)
            baseline = replace(self._frozen, tick=tick)
        else:
            baseline = estimate_baseline(self.profiles, [], self.config, tick=tick)
        verdict, self.streak = evaluate(baseline, obs, self.config, self.streak)
        return verdict


def run_monitor(trace, visible_profiles, config: DetectorConfig):
    """Fold the detector over a trace; returns one verdict per tick."""
    cfg = replace(config, dt_seconds=trace.header.dt_seconds)
    cfg = resolve_battery_ref(cfg, trace.header.units)
    monitor = Monitor(visible_profiles, cfg)
    return [monitor.observe(tick, events, samples)
            for tick, events, samples in trace.by_tick()]


def first_alarm_tick(verdicts):
    for v in verdicts:
        if v.alarm_raised:
            return v.tick
    return None


@dataclass
class ClosedLoopResult:
    verdicts: list
    trace: object
    final_state: object
    alarm_tick: int = None
    response_tick: int = None
    exhausted: bool = False


def run_closed_loop(scenario, config: DetectorConfig,
                    allow_exhaustion: bool = True) -> ClosedLoopResult:
    """Simulate and detect in lockstep, applying the response to the device.

    The response (disconnect) lands after the alarming tick's telemetry,
    so its effect shows from the next tick on. Monitoring continues after
    the response; with communication cut, the observed aggregates fall to
    the estimate's floor or below and the verdicts go clean.
    """
    cfg = replace(config, dt_seconds=scenario.dt_seconds)
    cfg = resolve_battery_ref(cfg, scenario.units,
                              capacity=scenario.initial_state.battery.capacity)
    sim = Simulation(scenario)
    monitor = Monitor(scenario.initial_state.visible_apps, cfg)
    verdicts = []
    alarm_tick = None
    response_tick = None
    exhausted = False
    while sim.state.clock < scenario.horizon:
        t = sim.state.clock
        events_before = len(sim.events)
        try:
            samples = sim.step_once()
        except BatteryExhaustedError:
            exhausted = True
            if allow_exhaustion:
                break
            raise
        new_events = sim.events[events_before:]
        verdict = monitor.observe(t, new_events, samples)
        if verdict.alarm_raised:
            if alarm_tick is None:
                alarm_tick = t
            if response_tick is None:
                sim.state = respond(sim.state, verdict)
                response_tick = t
            verdict = replace(verdict, response_taken=True)
        verdicts.append(verdict)
    return ClosedLoopResult(verdicts=verdicts, trace=sim.trace(),
                            final_state=sim.state, alarm_tick=alarm_tick,
                            response_tick=response_tick, exhausted=exhausted)


def detector_config_dict(config: DetectorConfig) -> dict:
    return {
        "tolerance": config.tolerance,
        "consecutive_required": config.consecutive_required,
        "warmup_window": config.warmup_window,
        "baseline_mode": config.baseline_mode,
        "criteria_enabled": sorted(config.criteria_enabled),
        "battery_ref": config.battery_ref,
    }


def verdict_log_records(verdicts, scenario_hash: str, config: DetectorConfig):
    """Records for the verdict log: header, one verdict per tick, and an
    alarm record at each alarm onset carrying the provenance hash."""
    records = [{
        "type": "header",
        "format_version": VERDICT_FORMAT_VERSION,
        "tool_version": __version__,
        "config_hash": scenario_hash,
        "detector": detector_config_dict(config),
    }]
    previous_alarm = False
    for v in verdicts:
        records.append({
            "type": "verdict",
            "tick": v.tick,
            "violated": sorted(v.violated),
            "intruder_present": v.intruder_present,
            "alarm_raised": v.alarm_raised,
            "response_taken": v.response_taken,
        })
        if v.alarm_raised and not previous_alarm:
            records.append({
                "type": "alarm",
                "tick": v.tick,
                "violated": sorted(v.violated),
                "config_hash": scenario_hash,
            })
        previous_alarm = v.alarm_raised
    return records
