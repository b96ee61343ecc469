"""Command-line front end.

Subcommands: simulate, detect, replay, sweep, report, validate-config.
Exit codes: 0 ok; 1 alarm raised (detect, replay); 2 usage or config
error; 3 runtime error. Flags override config-file values, which
override built-in defaults.
"""

from __future__ import annotations

import argparse
import json
import os
import secrets
import sys
from importlib import resources

import jsonschema

from ._version import __version__
from .datasets import DURATIONS, ChecksumError, load_dataset
from .detector import (
    BATTERY,
    CRITERIA,
    ENERGY,
    POWER,
    RATE,
    DetectorConfig,
    DetectorConfigError,
    aggregate_observed,
    detector_config_dict,
    estimate_baseline,
    first_alarm_tick,
    resolve_battery_ref,
    run_monitor,
    verdict_log_records,
)
from .device_sim import (
    BatteryExhaustedError,
    ScenarioError,
    build_scenario,
    default_config,
    profiles_from_config,
    run_simulation,
)
from .reporting import (
    SweepError,
    SweepSpec,
    cell_configs,
    emit_csv,
    emit_summary_csv,
    read_metrics_csv,
    run_sweep,
    summarize,
)
from .resource_model import DomainError
from .trace_io import (
    TRACE_FORMAT_VERSION,
    VERDICT_FORMAT_VERSION,
    TraceParseError,
    TraceVersionError,
    config_hash,
    dataset_to_trace,
    dataset_valid_profiles,
    fmt9,
    read_trace,
    write_ndjson,
    write_trace,
)

EXIT_OK = 0
EXIT_ALARM = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

_TABLE_SOURCES = {"3": "mobile_data", "4": "hybrid"}
_CRITERIA_FLAGS = {"power": POWER, "rate": RATE, "battery": BATTERY, "energy": ENERGY}


class CliConfigError(Exception):
    """Bad input file or flag combination; maps to exit code 2."""


def _load_json(path):
    try:
        with open(path, "r", encoding="utf-8") as fp:
            return json.load(fp)
    except FileNotFoundError:
        raise CliConfigError(f"{path}: no such file") from None
    except json.JSONDecodeError as exc:
        raise CliConfigError(f"{path}:{exc.lineno}: {exc.msg}") from None


def _load_schema(name: str) -> dict:
    text = resources.files("abma.schemas").joinpath(name).read_text(encoding="utf-8")
    return json.loads(text)


def validate_config(instance: dict, kind: str) -> None:
    """Schema-check a config dict; error messages carry dotted field paths."""
    validator = jsonschema.Draft202012Validator(_load_schema(f"{kind}.schema.json"))
    errors = sorted(validator.iter_errors(instance),
                    key=lambda e: ([str(p) for p in e.absolute_path], e.message))
    if errors:
        lines = []
        for err in errors[:10]:
            path = ".".join(str(p) for p in err.absolute_path) or kind
            lines.append(f"{path}: {err.message}")
        if len(errors) > 10:
            lines.append(f"... and {len(errors) - 10} more")
        raise CliConfigError("\n".join(lines))


def _resolve_scenario_config(arg: str) -> dict:
    if arg == "default":
        return default_config()
    config = _load_json(arg)
    validate_config(config, "scenario")
    return config


def _bool_arg(text: str) -> bool:
    t = text.lower()
    if t in ("true", "1", "yes"):
        return True
    if t in ("false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected true or false, got {text!r}")


def _criteria_arg(text: str) -> frozenset:
    names = set()
    for part in text.split(","):
        part = part.strip().lower()
        if part not in _CRITERIA_FLAGS:
            raise argparse.ArgumentTypeError(
                f"unknown criterion {part!r}; pick from {sorted(_CRITERIA_FLAGS)}")
        names.add(_CRITERIA_FLAGS[part])
    return frozenset(names)


def _cmd_simulate(args) -> int:
    config = _resolve_scenario_config(args.config)
    seed = args.seed if args.seed is not None else config.get("seed")
    seed_drawn = False
    if seed is None:
        seed = secrets.randbits(63)
        seed_drawn = True
    scenario = build_scenario(config, seed_override=seed)
    result = run_simulation(scenario, allow_exhaustion=args.allow_exhaustion)
    write_trace(result.trace, args.out)
    summary = dict(result.summary)
    summary["seed_drawn"] = seed_drawn
    summary["trace_format_version"] = TRACE_FORMAT_VERSION
    summary_path = args.summary or args.out + ".summary.json"
    with open(summary_path, "w", encoding="utf-8", newline="\n") as fp:
        json.dump(summary, fp, indent=2, sort_keys=True)
        fp.write("\n")
    print(f"trace: {args.out} ({summary['ticks_run']} ticks)")
    print(f"summary: {summary_path}")
    print(f"config_hash: {scenario.config_hash}")
    return EXIT_OK


def _cmd_detect(args) -> int:
    trace = read_trace(args.trace)
    for warning in trace.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    profile_config = _load_json(args.profiles)
    validate_config(profile_config, "scenario")
    try:
        profiles = profiles_from_config(profile_config.get("apps", []),
                                        trace.header.units)
    except ScenarioError as exc:
        raise CliConfigError(str(exc)) from None
    capacity = profile_config.get("device", {}).get("battery", {}).get("capacity_mah")
    config = DetectorConfig(
        tolerance=args.epsilon,
        consecutive_required=args.k,
        warmup_window=args.warmup,
        baseline_mode={"model": "Model", "adaptive": "LiveAdaptive"}[args.baseline],
        criteria_enabled=args.criteria,
        battery_ref=args.battery_ref,
        dt_seconds=trace.header.dt_seconds,
    )
    config = resolve_battery_ref(config, trace.header.units, capacity=capacity)
    verdicts = run_monitor(trace, profiles, config)
    records = verdict_log_records(verdicts, trace.header.config_hash, config)
    if args.out == "-":
        write_ndjson(records, sys.stdout)
    else:
        write_ndjson(records, args.out)
    alarm = first_alarm_tick(verdicts)
    if alarm is not None:
        print(f"alarm at tick {alarm}", file=sys.stderr)
        return EXIT_ALARM
    print("no alarm", file=sys.stderr)
    return EXIT_OK


def _cmd_replay(args) -> int:
    ds = load_dataset(_TABLE_SOURCES[args.table], args.duration)
    trace = dataset_to_trace(ds, include_intruder=args.with_intruder,
                             tool_version=__version__)
    profiles = dataset_valid_profiles(ds)
    config = DetectorConfig(tolerance=args.epsilon, consecutive_required=args.k,
                            dt_seconds=trace.header.dt_seconds)
    config = resolve_battery_ref(config, trace.header.units)
    baseline = estimate_baseline(profiles, [], config, tick=0)
    observed = aggregate_observed(list(trace.samples), trace.header.dt_seconds)
    verdicts = run_monitor(trace, profiles, config)
    violated = verdicts[0].violated if verdicts else frozenset()
    print(f"dataset {ds.source}/{ds.duration} "
          f"({'with' if args.with_intruder else 'without'} hidden row)")
    print(f"config_hash: {trace.header.config_hash}")
    for label, est, obs, criterion in (
            ("power", baseline.est_power, observed.obs_power, POWER),
            ("rate", baseline.est_rate, observed.obs_rate, RATE),
            ("battery_used", baseline.est_battery, observed.obs_battery, BATTERY),
            ("energy", baseline.est_energy, observed.obs_energy, ENERGY)):
        flag = "VIOLATED" if criterion in violated else "ok"
        print(f"{label}: estimated {fmt9(est)} observed {fmt9(obs)} {flag}")
    if args.out:
        write_ndjson(verdict_log_records(verdicts, trace.header.config_hash, config),
                     args.out)
    alarm = first_alarm_tick(verdicts)
    if alarm is not None:
        print(f"alarm raised at tick {alarm}")
        return EXIT_ALARM
    print("no alarm")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    spec_dict = _load_json(args.spec)
    validate_config(spec_dict, "sweep")
    base = spec_dict.get("base_scenario", "default")
    if base == "default":
        base_config = default_config()
    elif isinstance(base, str):
        base_config = _load_json(base)
        validate_config(base_config, "scenario")
    else:
        base_config = base
        validate_config(base_config, "scenario")
    spec = SweepSpec(
        variable=spec_dict["variable"],
        values=tuple(spec_dict["values"]),
        repetitions=int(spec_dict.get("repetitions", 1)),
        base_scenario=base_config,
        seeds=tuple(spec_dict["seeds"]) if spec_dict.get("seeds") else None,
    )
    detector = DetectorConfig(
        tolerance=float(spec_dict.get("epsilon", 0.05)),
        consecutive_required=int(spec_dict.get("k", 3)),
        criteria_enabled=frozenset(spec_dict.get("criteria", CRITERIA)),
    )
    rows = run_sweep(spec, detector,
                     ee_numerator=spec_dict.get("ee_numerator", "minus"))
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "metrics.csv")
    emit_csv(rows, csv_path)
    cells = []
    base_seed = int(base_config.get("seed", 0))
    for value in spec.values:
        for seed in spec.resolved_seeds(base_seed):
            with_attack, without_attack = cell_configs(spec, value, seed)
            cells.append({
                "scenario_id": f"{spec.variable}={value}/seed={seed}",
                "config_hash_attack": config_hash(with_attack),
                "config_hash_clean": config_hash(without_attack),
            })
    summary = {
        "tool_version": __version__,
        "spec_hash": config_hash(spec_dict),
        "base_config_hash": config_hash(base_config),
        "detector": detector_config_dict(detector),
        "rows": len(rows),
        "cells": cells,
    }
    summary_path = os.path.join(args.out, "sweep_summary.json")
    with open(summary_path, "w", encoding="utf-8", newline="\n") as fp:
        json.dump(summary, fp, indent=2, sort_keys=True)
        fp.write("\n")
    print(f"metrics: {csv_path} ({len(rows)} rows)")
    print(f"summary: {summary_path}")
    return EXIT_OK


def _cmd_report(args) -> int:
    csv_path = os.path.join(args.indir, "metrics.csv")
    if not os.path.exists(csv_path):
        raise CliConfigError(f"{csv_path}: no such file")
    rows = read_metrics_csv(csv_path)
    out_dir = args.out or args.indir
    os.makedirs(out_dir, exist_ok=True)
    summary = summarize(rows)
    summary_path = os.path.join(out_dir, "summary.csv")
    emit_summary_csv(summary, summary_path)
    # Imported here so report is the only subcommand that needs matplotlib
    # at runtime.
    from .figures import render_figures
    figure_paths = render_figures(summary, out_dir)
    print(f"summary: {summary_path}")
    for path in figure_paths:
        print(f"figure: {path}")
    return EXIT_OK


def _cmd_validate_config(args) -> int:
    instance = _load_json(args.config)
    validate_config(instance, args.kind)
    print(f"ok {config_hash(instance)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="abma",
        description="Deterministic device simulator with behavioral-model "
                    "intrusion detection.")
    parser.add_argument(
        "--version", action="version",
        version=f"abma {__version__} (trace format {TRACE_FORMAT_VERSION}, "
                f"verdict format {VERDICT_FORMAT_VERSION})")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario and write its trace")
    p.add_argument("--config", required=True,
                   help="scenario config path, or 'default' for the built-in scenario")
    p.add_argument("--out", required=True, help="trace output path (NDJSON)")
    p.add_argument("--seed", type=int, default=None,
                   help="override the scenario seed; drawn and recorded if absent")
    p.add_argument("--summary", default=None,
                   help="summary JSON path (default: <out>.summary.json)")
    p.add_argument("--allow-exhaustion", action="store_true",
                   help="treat battery exhaustion as a normal end of run")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("detect", help="run the detector over a trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--profiles", required=True,
                   help="scenario config naming the visible apps (and battery)")
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--k", type=int, default=3,
                   help="consecutive violating ticks before the alarm")
    p.add_argument("--baseline", choices=("model", "adaptive"), default="model")
    p.add_argument("--warmup", type=int, default=10)
    p.add_argument("--criteria", type=_criteria_arg,
                   default=frozenset(CRITERIA),
                   help="comma-separated subset of power,rate,battery,energy")
    p.add_argument("--battery-ref", type=float, default=None,
                   help="full battery level the used-sums count down from")
    p.add_argument("--out", default="-", help="verdict log path, '-' for stdout")
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("replay", help="replay an embedded measured dataset")
    p.add_argument("--table", choices=sorted(_TABLE_SOURCES), required=True,
                   help="3 = mobile-data campaign, 4 = hybrid campaign")
    p.add_argument("--duration", choices=DURATIONS, required=True)
    p.add_argument("--with-intruder", type=_bool_arg, default=True)
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--k", type=int, default=1,
                   help="debounce; the replay trace has a single tick")
    p.add_argument("--out", default=None, help="optional verdict log path")
    p.set_defaults(func=_cmd_replay)

    p = sub.add_parser("sweep", help="run a parameter sweep to CSV")
    p.add_argument("--spec", required=True, help="sweep spec JSON path")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("report", help="summarize a sweep and render figures")
    p.add_argument("--in", dest="indir", required=True,
                   help="directory holding metrics.csv")
    p.add_argument("--out", default=None, help="output directory (default: --in)")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("validate-config", help="schema-check a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--kind", choices=("scenario", "sweep"), default="scenario")
    p.set_defaults(func=_cmd_validate_config)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ScenarioError, SweepError, DetectorConfigError, DomainError,
            TraceParseError, TraceVersionError, ChecksumError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BatteryExhaustedError as exc:
        print(f"error: {exc} (use --allow-exhaustion to keep the partial run)",
              file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def console_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_entry()
