"""Deterministic tick-stepped simulation of a multi-app device.

The device runs an ordered set of visible apps and, optionally, one hidden
app injected by an attack script. The hidden app is dormant until its
trigger tick, downloads in the background for a configured number of
ticks, then runs installed with full consumption, invisible to the app
census the detector sees. Every tick each active app emits one telemetry
sample; observed values carry multiplicative measurement noise from a
seeded stream, so identical (config, seed) pairs give bit-identical
traces.

Draw discipline: four noise factors per emitting app per tick, apps in
registration order (visible first, then hidden), fields in the order
data, power, battery, current. Factors are drawn even at zero jitter so
runs that differ only in jitter share the same underlying draws.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from ._version import __version__
from .prng import Xoshiro256StarStar, stream_seed
from .resource_model import (
    AppProfile,
    BatteryModel,
    MeasuredProfile,
    inverse_shannon_power,
    profile_from_dict,
    profile_to_dict,
    shannon_rate,
    tick_usage,
)
from .trace_io import (
    TelemetrySample,
    TraceEvent,
    TraceFile,
    TraceHeader,
    config_hash,
    round9,
)

CONNECTIVITY_MODES = ("WiFi", "MobileData", "Hybrid", "Disconnected")

# Attack lifecycle phases.
DORMANT = "dormant"
DOWNLOADING = "downloading"
INSTALLED = "installed"


class BatteryExhaustedError(RuntimeError):
    def __init__(self, tick: int, level: float, needed: float):
        super().__init__(
            f"battery exhausted at tick {tick}: {level} mAh left, {needed} needed")
        self.tick = tick
        self.level = level
        self.needed = needed


class ScenarioError(ValueError):
    """A scenario config is structurally valid JSON but semantically wrong."""


@dataclass(frozen=True)
class DeviceState:
    battery: BatteryModel
    visible_apps: tuple
    hidden_apps: tuple = ()
    connectivity: str = "WiFi"
    clock: int = 0
    rng_seed: int = 0
    rebaseline: bool = False  # set when the visible census changed

    def __post_init__(self):
        if self.connectivity not in CONNECTIVITY_MODES:
            raise ScenarioError(f"unknown connectivity {self.connectivity!r}")
        ids = [p.app_id for p in self.visible_apps] + [p.app_id for p in self.hidden_apps]
        if len(ids) != len(set(ids)):
            raise ScenarioError("duplicate app_id across visible and hidden apps")


@dataclass(frozen=True)
class AttackScript:
    trigger_tick: int
    download_duration: int
    intruder_profile: object
    spreading: bool = False
    spreading_rate: float = 0.05  # per-tick growth of the consumption multiplier
    spreading_cap: float = 2.0
    download_bits: float = None   # total download size; None means run at demand_rate

    def __post_init__(self):
        if self.trigger_tick < 0:
            raise ScenarioError("trigger_tick must be >= 0")
        if self.download_duration < 0:
            raise ScenarioError("download_duration must be >= 0")


@dataclass(frozen=True)
class NoiseSpec:
    relative_jitter: float = 0.0    # half-width of the multiplicative band
    stream: str = "telemetry-noise"

    def __post_init__(self):
        if not (0.0 <= self.relative_jitter < 1.0):
            raise ScenarioError("relative_jitter must be in [0, 1)")


def attack_phase(script: AttackScript, tick: int) -> str:
    if script is None or tick < script.trigger_tick:
        return DORMANT
    if tick < script.trigger_tick + script.download_duration:
        return DOWNLOADING
    return INSTALLED


def inject_intruder(state: DeviceState, profile) -> DeviceState:
    taken = {p.app_id for p in state.visible_apps} | {p.app_id for p in state.hidden_apps}
    if profile.app_id in taken:
        raise ScenarioError(f"app_id {profile.app_id!r} already registered")
    return replace(state, hidden_apps=state.hidden_apps + (profile,))


def disconnect(state: DeviceState) -> DeviceState:
    if state.connectivity == "Disconnected":
        return state
    return replace(state, connectivity="Disconnected")


def update_app_census(state: DeviceState, added, removed) -> DeviceState:
    """Change the visible app set; flags the detector to re-baseline."""
    current = list(state.visible_apps)
    ids = {p.app_id for p in current}
    hidden_ids = {p.app_id for p in state.hidden_apps}
    for app_id in removed:
        if app_id not in ids:
            raise ScenarioError(f"cannot remove unknown app {app_id!r}")
        current = [p for p in current if p.app_id != app_id]
        ids.discard(app_id)
    for profile in added:
        if profile.app_id in ids or profile.app_id in hidden_ids:
            raise ScenarioError(f"cannot add duplicate app {profile.app_id!r}")
        current.append(profile)
        ids.add(profile.app_id)
    return replace(state, visible_apps=tuple(current), rebaseline=True)


def _download_usage(profile, script: AttackScript, dt_seconds: float):
    """Consumption while the hidden app's payload is coming down."""
    if isinstance(profile, MeasuredProfile):
        # No channel to run the download through; replay the readings.
        return (profile.data_rate, profile.power_used, profile.battery_used,
                profile.current)
    if script.download_bits is not None and script.download_duration > 0:
        dl_rate = script.download_bits / (script.download_duration * dt_seconds)
    else:
        dl_rate = profile.demand_rate
    c = profile.channel
    power = inverse_shannon_power(c.noise_power, c.channel_gain, dl_rate, c.bandwidth)
    return (dl_rate * dt_seconds, power,
            profile.current_draw * (dt_seconds / 3600.0), profile.current_draw)


def _spreading_multiplier(script: AttackScript, tick: int) -> float:
    if not script.spreading:
        return 1.0
    installed_at = script.trigger_tick + script.download_duration
    return min(1.0 + script.spreading_rate * (tick - installed_at),
               script.spreading_cap)


def step(state: DeviceState, script: AttackScript, noise: NoiseSpec,
         rng: Xoshiro256StarStar, dt_seconds: float):
    """Advance the device by one tick; returns (new_state, samples).

    Raises BatteryExhaustedError when the tick's drain would take the
    battery below zero; the tick's samples are not emitted in that case.
    """
    t = state.clock
    emitting = []  # (profile, raw usage 4-tuple, visible)
    for p in state.visible_apps:
        emitting.append((p, tick_usage(p, dt_seconds), True))
    for p in state.hidden_apps:
        if script is not None and p.app_id == script.intruder_profile.app_id:
            phase = attack_phase(script, t)
            if phase == DORMANT:
                continue
            if phase == DOWNLOADING:
                usage = _download_usage(p, script, dt_seconds)
            else:
                mult = _spreading_multiplier(script, t)
                usage = tuple(v * mult for v in tick_usage(p, dt_seconds))
            emitting.append((p, usage, False))
        else:
            emitting.append((p, tick_usage(p, dt_seconds), False))

    offline = state.connectivity == "Disconnected"
    j = noise.relative_jitter
    samples = []
    battery_used = 0.0
    for profile, raw, visible in emitting:
        observed = []
        for value in raw:
            factor = 1.0 + j * (2.0 * rng.random() - 1.0)
            observed.append(value * factor)
        if offline:
            observed[0] = 0.0  # data
            observed[1] = 0.0  # communication power
        sample = TelemetrySample(
            tick=t, app_id=profile.app_id,
            data_used=round9(observed[0]),
            power_used=round9(observed[1]),
            battery_delta=round9(observed[2]),
            current=round9(observed[3]),
            visible=visible,
        )
        battery_used += sample.battery_delta
        samples.append(sample)

    battery_used += state.battery.circuit_battery_drain
    new_level = state.battery.level - battery_used
    if new_level < 0:
        raise BatteryExhaustedError(t, state.battery.level, battery_used)
    new_state = replace(state, clock=t + 1,
                        battery=replace(state.battery, level=new_level))
    return new_state, samples


@dataclass(frozen=True)
class CensusChange:
    tick: int
    added: tuple = ()
    removed: tuple = ()


@dataclass(frozen=True)
class Scenario:
    initial_state: DeviceState
    script: AttackScript
    noise: NoiseSpec
    horizon: int
    dt_seconds: float
    units: str
    seed: int
    census: tuple = ()
    config: dict = field(default_factory=dict)
    config_hash: str = ""

    @property
    def activation_tick(self):
        """First tick the hidden app contributes, or None without an attack."""
        return self.script.trigger_tick if self.script is not None else None


@dataclass
class SimulationResult:
    trace: TraceFile
    final_state: DeviceState
    exhausted: bool
    summary: dict


class Simulation:
    """Owns one run's mutable state: device, noise stream, emitted records."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.state = scenario.initial_state
        self.rng = Xoshiro256StarStar(stream_seed(scenario.seed, scenario.noise.stream))
        self.samples = []
        self.events = []
        self.exhausted = False
        self._census_by_tick = {}
        for change in scenario.census:
            self._census_by_tick.setdefault(change.tick, []).append(change)

    def step_once(self):
        """One tick: apply any census change, then emit telemetry."""
        t = self.state.clock
        for change in self._census_by_tick.get(t, ()):
            self.state = update_app_census(self.state, change.added, change.removed)
            self.events.append(TraceEvent(tick=t, kind="census", data={
                "visible_profiles": [profile_to_dict(p) for p in self.state.visible_apps],
            }))
            self.state = replace(self.state, rebaseline=False)
        try:
            self.state, samples = step(self.state, self.scenario.script,
                                       self.scenario.noise, self.rng,
                                       self.scenario.dt_seconds)
        except BatteryExhaustedError as exc:
            self.events.append(TraceEvent(tick=t, kind="battery_exhausted", data={
                "level": round9(exc.level), "needed": round9(exc.needed),
            }))
            self.exhausted = True
            raise
        self.samples.extend(samples)
        return samples

    def trace(self) -> TraceFile:
        header = TraceHeader(config_hash=self.scenario.config_hash,
                             dt_seconds=self.scenario.dt_seconds,
                             units=self.scenario.units,
                             tool_version=__version__)
        return TraceFile(header=header, samples=tuple(self.samples),
                         events=tuple(self.events))

    def summary(self) -> dict:
        return {
            "seed": self.scenario.seed,
            "config_hash": self.scenario.config_hash,
            "units": self.scenario.units,
            "dt_seconds": self.scenario.dt_seconds,
            "horizon_ticks": self.scenario.horizon,
            "ticks_run": self.state.clock,
            "exhausted": self.exhausted,
            "activation_tick": self.scenario.activation_tick,
            "final_battery_level": round9(self.state.battery.level),
            "tool_version": __version__,
        }


def run_simulation(scenario: Scenario, allow_exhaustion: bool = False) -> SimulationResult:
    sim = Simulation(scenario)
    while sim.state.clock < scenario.horizon:
        try:
            sim.step_once()
        except BatteryExhaustedError:
            if not allow_exhaustion:
                raise
            break
    return SimulationResult(trace=sim.trace(), final_state=sim.state,
                            exhausted=sim.exhausted, summary=sim.summary())


def profiles_from_config(entries, units: str):
    profiles = []
    for entry in entries:
        p = profile_from_dict(entry)
        if units == "si" and isinstance(p, MeasuredProfile):
            raise ScenarioError(
                f"app {p.app_id!r} is a measured profile but units are 'si'")
        if units == "table-native" and isinstance(p, AppProfile):
            raise ScenarioError(
                f"app {p.app_id!r} is a channel profile but units are 'table-native'")
        profiles.append(p)
    return profiles


def build_scenario(config: dict, seed_override=None) -> Scenario:
    """Turn a scenario config dict (already schema-checked) into a Scenario."""
    resolved = dict(config)
    seed = seed_override if seed_override is not None else resolved.get("seed")
    if seed is None:
        raise ScenarioError("scenario needs a seed (config key or override)")
    resolved["seed"] = int(seed)

    units = resolved.get("units", "si")
    dt_seconds = float(resolved.get("dt_seconds", 60.0))
    horizon = int(resolved.get("horizon_ticks", 60))
    if horizon < 1:
        raise ScenarioError("horizon_ticks must be >= 1")
    if dt_seconds <= 0:
        raise ScenarioError("dt_seconds must be > 0")

    device = resolved.get("device", {})
    batt = device.get("battery")
    if not batt:
        raise ScenarioError("device: 'battery' is required")
    capacity = float(batt["capacity_mah"])
    battery = BatteryModel(
        capacity=capacity,
        level=float(batt.get("level_mah", capacity)),
        circuit_battery_drain=float(batt.get("circuit_drain_mah_per_tick", 0.0)),
        circuit_current=float(batt.get("circuit_current_ma", 0.0)),
        derating=float(batt.get("derating", 0.7)),
    )

    visible = profiles_from_config(resolved.get("apps", []), units)

    script = None
    attack = resolved.get("attack")
    if attack and attack.get("enabled", True):
        intruder = profile_from_dict(attack["profile"])
        script = AttackScript(
            trigger_tick=int(attack.get("trigger_tick", 0)),
            download_duration=int(attack.get("download_duration_ticks", 0)),
            intruder_profile=intruder,
            spreading=bool(attack.get("spreading", False)),
            spreading_rate=float(attack.get("spreading_rate", 0.05)),
            spreading_cap=float(attack.get("spreading_cap", 2.0)),
            download_bits=(float(attack["download_bits"])
                           if attack.get("download_bits") is not None else None),
        )

    noise_cfg = resolved.get("noise", {})
    noise = NoiseSpec(relative_jitter=float(noise_cfg.get("relative_jitter", 0.0)))

    census = []
    for change in resolved.get("census", []):
        census.append(CensusChange(
            tick=int(change["tick"]),
            added=tuple(profiles_from_config(change.get("add", []), units)),
            removed=tuple(change.get("remove", [])),
        ))

    state = DeviceState(
        battery=battery,
        visible_apps=tuple(visible),
        connectivity=device.get("connectivity", "WiFi"),
        clock=0,
        rng_seed=resolved["seed"],
    )
    if script is not None:
        state = inject_intruder(state, script.intruder_profile)

    return Scenario(
        initial_state=state,
        script=script,
        noise=noise,
        horizon=horizon,
        dt_seconds=dt_seconds,
        units=units,
        seed=resolved["seed"],
        census=tuple(census),
        config=resolved,
        config_hash=config_hash(resolved),
    )


# Built-in scenario: a mid-range handset with a 4000 mAh pack, six everyday
# apps, and one hidden consumer triggered twenty minutes in. Channel gains
# put per-app transmit power in the 0.05-0.7 W range; WiFi-mode rates total
# about 34 Mbps against a 72 Mbps link, mobile mode throttles to about 1 Mbps.
_DEFAULT_APPS = (
    # (app_id, bandwidth Hz, snr, current mA)
    ("whatsapp", 1.0e6, 0.5, 30.0),
    ("facebook", 4.0e6, 3.0, 120.0),
    ("youtube", 6.0e6, 7.0, 180.0),
    ("chrome", 3.0e6, 3.0, 110.0),
    ("gmail", 0.5e6, 0.4, 20.0),
    ("amazon", 1.0e6, 0.7, 40.0),
)

_CONNECTIVITY_RATE_SCALE = {"WiFi": 1.0, "MobileData": 0.03, "Hybrid": 1.03}


def default_config(connectivity: str = "WiFi", with_attack: bool = True,
                   seed: int = 42) -> dict:
    """The built-in demo scenario (also the base for sweeps)."""
    scale = _CONNECTIVITY_RATE_SCALE.get(connectivity, 1.0)
    apps = []
    for app_id, bandwidth, snr, current in _DEFAULT_APPS:
        bw = bandwidth * scale
        apps.append({
            "kind": "channel",
            "app_id": app_id,
            "noise_power": 1.0e-9,
            "channel_gain": 1.0e-8,
            "bandwidth": bw,
            "snr": snr,
            # demand matched to capacity keeps power at noise*snr/gain
            "demand_rate": round9(shannon_rate(bw, snr)),
            "current_draw": current,
            "duty_cycle": 1.0,
        })
    config = {
        "seed": seed,
        "units": "si",
        "dt_seconds": 60.0,
        "horizon_ticks": 60,
        "device": {
            "battery": {
                "capacity_mah": 4000.0,
                "level_mah": 4000.0,
                "circuit_drain_mah_per_tick": 0.1,
                "circuit_current_ma": 10.0,
                "derating": 0.7,
            },
            "connectivity": connectivity,
        },
        "apps": apps,
        "noise": {"relative_jitter": 0.01},
    }
    if with_attack:
        bw = 2.0e6 * scale
        config["attack"] = {
            "enabled": True,
            "trigger_tick": 20,
            "download_duration_ticks": 3,
            "spreading": False,
            "profile": {
                "kind": "channel",
                "app_id": "hidden-consumer",
                "noise_power": 1.0e-9,
                "channel_gain": 1.0e-8,
                "bandwidth": bw,
                "snr": 4.0,
                "demand_rate": round9(shannon_rate(bw, 4.0)),
                "current_draw": 150.0,
                "duty_cycle": 1.0,
            },
        }
    return config
