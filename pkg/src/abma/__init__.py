"""Deterministic mobile-device simulator with behavioral-model intrusion
detection.

The library models a device running a set of visible applications plus an
optional hidden resource-consuming one, produces byte-stable telemetry
traces, and checks each tick's observed aggregates against what the visible
apps alone should use.
"""

from ._version import __version__
from .datasets import load_dataset
from .detector import (
    BASELINE_MODES,
    BATTERY,
    CRITERIA,
    ENERGY,
    POWER,
    RATE,
    DetectionVerdict,
    DetectorConfig,
    Monitor,
    first_alarm_tick,
    resolve_battery_ref,
    run_closed_loop,
    run_monitor,
)
from .device_sim import (
    AttackScript,
    BatteryExhaustedError,
    DeviceState,
    NoiseSpec,
    Scenario,
    ScenarioError,
    Simulation,
    build_scenario,
    default_config,
    run_simulation,
)
from .resource_model import (
    AppProfile,
    BatteryModel,
    ChannelParams,
    DomainError,
    MeasuredProfile,
    attack_energy_efficiency,
    battery_lifetime,
    energy_efficiency,
    inverse_shannon_power,
    remaining_lifetime,
    shannon_rate,
)
from .trace_io import (
    TRACE_FORMAT_VERSION,
    TelemetrySample,
    TraceFile,
    TraceParseError,
    read_trace,
    round9,
    write_trace,
)

__all__ = [
    "__version__",
    "AppProfile",
    "AttackScript",
    "BASELINE_MODES",
    "BATTERY",
    "BatteryExhaustedError",
    "BatteryModel",
    "CRITERIA",
    "ChannelParams",
    "DetectionVerdict",
    "DetectorConfig",
    "DeviceState",
    "DomainError",
    "ENERGY",
    "MeasuredProfile",
    "Monitor",
    "NoiseSpec",
    "POWER",
    "RATE",
    "Scenario",
    "ScenarioError",
    "Simulation",
    "TRACE_FORMAT_VERSION",
    "TelemetrySample",
    "TraceFile",
    "TraceParseError",
    "attack_energy_efficiency",
    "battery_lifetime",
    "build_scenario",
    "default_config",
    "energy_efficiency",
    "first_alarm_tick",
    "inverse_shannon_power",
    "load_dataset",
    "read_trace",
    "remaining_lifetime",
    "resolve_battery_ref",
    "round9",
    "run_closed_loop",
    "run_monitor",
    "run_simulation",
    "shannon_rate",
    "write_trace",
]
