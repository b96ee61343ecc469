"""Bit-exact reading and writing of telemetry traces and verdict logs.

Traces are newline-delimited JSON: one header record, then sample and
event records in tick order. Numeric fields are serialized as decimals
with 9 significant digits, and every producer in this package quantizes
to that grid *before* a value is used or written (see round9), so
write -> read is the identity on values and re-serialization is
byte-identical. That quantization is what lets the detector demand exact
equality between estimated and observed aggregates in noise-free runs.

The same low-level encoding carries the detector's verdict logs.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from .prng import PRNG_NAME

TRACE_FORMAT_VERSION = "1.0"
VERDICT_FORMAT_VERSION = "1.0"

UNIT_SYSTEMS = ("si", "table-native")


class TraceParseError(ValueError):
    """Malformed trace content; message names the failing line."""


class TraceVersionError(ValueError):
    """Trace was written by an incompatible format version."""


def round9(x: float) -> float:
    """Snap a float to the trace format's 9-significant-digit grid.

    Idempotent, monotone nondecreasing, and exact for values that already
    have at most 9 significant decimal digits.
    """
    return float(format(float(x), ".9g"))


def fmt9(x: float) -> str:
    return format(float(x), ".9g")


def _encode_value(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return fmt9(v)
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (list, tuple)):
        return "[" + ",".join(_encode_value(item) for item in v) + "]"
    if isinstance(v, dict):
        return "{" + ",".join(
            json.dumps(k) + ":" + _encode_value(val) for k, val in v.items()) + "}"
    raise TypeError(f"cannot encode {type(v).__name__} in a trace record")


def encode_record(record: dict) -> str:
    """One NDJSON line, keys in the dict's insertion order, floats at 9 digits."""
    return _encode_value(record)


def config_hash(config: dict) -> str:
    """Stable hash of a scenario or spec dict, for provenance fields."""
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class TelemetrySample:
    tick: int
    app_id: str
    data_used: float      # bits (si) or Mbps over the tick (table-native)
    power_used: float     # watts (si) or mAh (table-native)
    battery_delta: float  # mAh (si) or % (table-native)
    current: float        # mA
    visible: bool

    def __post_init__(self):
        for name in ("data_used", "power_used", "battery_delta", "current"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True)
class TraceEvent:
    tick: int
    kind: str   # "census" or "battery_exhausted"
    data: dict = field(default_factory=dict)


@dataclass(frozen=True)
class TraceHeader:
    config_hash: str
    dt_seconds: float
    units: str
    prng_name: str = PRNG_NAME
    format_version: str = TRACE_FORMAT_VERSION
    tool_version: str = ""


@dataclass(frozen=True)
class TraceFile:
    header: TraceHeader
    samples: tuple
    events: tuple = ()
    warnings: tuple = ()

    def by_tick(self):
        """Yield (tick, events, samples) groups in tick order.

        Events sort ahead of samples within a tick: a census event applies
        before that tick's telemetry is read.
        """
        groups = {}
        for e in self.events:
            groups.setdefault(e.tick, ([], []))[0].append(e)
        for s in self.samples:
            groups.setdefault(s.tick, ([], []))[1].append(s)
        for t in sorted(groups):
            events, samples = groups[t]
            yield (t, events, samples)


def _header_record(h: TraceHeader) -> dict:
    return {
        "type": "header",
        "format_version": h.format_version,
        "tool_version": h.tool_version,
        "config_hash": h.config_hash,
        "prng": h.prng_name,
        "dt_seconds": h.dt_seconds,
        "units": h.units,
    }


def _sample_record(s: TelemetrySample) -> dict:
    return {
        "type": "sample",
        "tick": s.tick,
        "app_id": s.app_id,
        "data_used": s.data_used,
        "power_used": s.power_used,
        "battery_delta": s.battery_delta,
        "current": s.current,
        "visible": s.visible,
    }


def _event_record(e: TraceEvent) -> dict:
    rec = {"type": "event", "tick": e.tick, "event": e.kind}
    rec.update(e.data)
    return rec


def write_trace(tf: TraceFile, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fp:
        fp.write(encode_record(_header_record(tf.header)) + "\n")
        for _, events, samples in tf.by_tick():
            for e in events:
                fp.write(encode_record(_event_record(e)) + "\n")
            for s in samples:
                fp.write(encode_record(_sample_record(s)) + "\n")


def _parse_sample(rec: dict, line_no: int) -> TelemetrySample:
    try:
        return TelemetrySample(
            tick=int(rec["tick"]),
            app_id=rec["app_id"],
            data_used=float(rec["data_used"]),
            power_used=float(rec["power_used"]),
            battery_delta=float(rec["battery_delta"]),
            current=float(rec["current"]),
            visible=bool(rec["visible"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise TraceParseError(f"line {line_no}: bad sample record: {exc}") from exc


def read_trace(path) -> TraceFile:
    header = None
    samples = []
    events = []
    warnings = []
    last_tick = None
    with open(path, "r", encoding="utf-8") as fp:
        for line_no, line in enumerate(fp, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TraceParseError(f"line {line_no}: not valid JSON: {exc.msg}") from exc
            if not isinstance(rec, dict) or "type" not in rec:
                raise TraceParseError(f"line {line_no}: record has no type")
            kind = rec["type"]
            if kind == "header":
                if header is not None:
                    raise TraceParseError(f"line {line_no}: duplicate header")
                if line_no != 1:
                    raise TraceParseError(f"line {line_no}: header must be the first record")
                version = str(rec.get("format_version", ""))
                if version.split(".")[0] != TRACE_FORMAT_VERSION.split(".")[0]:
                    raise TraceVersionError(
                        f"trace format {version!r} not supported "
                        f"(local {TRACE_FORMAT_VERSION})")
                units = rec.get("units")
                if units not in UNIT_SYSTEMS:
                    raise TraceParseError(f"line {line_no}: unknown unit system {units!r}")
                prng = rec.get("prng", "")
                if prng != PRNG_NAME:
                    # Replay still works; determinism guarantees don't.
                    warnings.append(
                        f"trace generated with prng {prng!r}, local is {PRNG_NAME!r}")
                try:
                    header = TraceHeader(
                        config_hash=rec["config_hash"],
                        dt_seconds=float(rec["dt_seconds"]),
                        units=units,
                        prng_name=prng,
                        format_version=version,
                        tool_version=rec.get("tool_version", ""),
                    )
                except (KeyError, TypeError, ValueError) as exc:
                    raise TraceParseError(f"line {line_no}: bad header: {exc}") from exc
                continue
            if header is None:
                raise TraceParseError(f"line {line_no}: record precedes header")
            if kind == "sample":
                sample = _parse_sample(rec, line_no)
                tick = sample.tick
                samples.append(sample)
            elif kind == "event":
                try:
                    tick = int(rec["tick"])
                    name = rec["event"]
                except (KeyError, TypeError, ValueError) as exc:
                    raise TraceParseError(f"line {line_no}: bad event record: {exc}") from exc
                payload = {k: v for k, v in rec.items()
                           if k not in ("type", "tick", "event")}
                events.append(TraceEvent(tick=tick, kind=name, data=payload))
            else:
                raise TraceParseError(f"line {line_no}: unknown record type {kind!r}")
            if last_tick is not None and tick < last_tick:
                raise TraceParseError(f"line {line_no}: tick {tick} goes backwards")
            last_tick = tick
    if header is None:
        raise TraceParseError("line 1: expected header record, found none")
    return TraceFile(header=header, samples=tuple(samples), events=tuple(events),
                     warnings=tuple(warnings))


def dataset_to_trace(ds, include_intruder: bool, tool_version: str = "") -> TraceFile:
    """Bridge a measured dataset block to the trace interface.

    One synthetic tick whose samples carry the block's per-app averages in
    their native units; the hidden consumer's row is flagged invisible.
    """
    meta = {"dataset": ds.source, "duration": ds.duration,
            "include_intruder": include_intruder}
    samples = []
    for row in ds.rows:
        if not row.valid and not include_intruder:
            continue
        samples.append(TelemetrySample(
            tick=0, app_id=row.app_name,
            data_used=round9(row.data),
            power_used=round9(row.power),
            battery_delta=round9(row.battery_pct),
            current=0.0,
            visible=row.valid,
        ))
    header = TraceHeader(config_hash=config_hash(meta), dt_seconds=60.0,
                         units="table-native", tool_version=tool_version)
    return TraceFile(header=header, samples=tuple(samples))


def dataset_valid_profiles(ds):
    """The visible app census for a dataset block: its valid rows."""
    from .resource_model import MeasuredProfile
    return [MeasuredProfile(app_id=r.app_name, data_rate=r.data,
                            battery_used=r.battery_pct, power_used=r.power)
            for r in ds.rows if r.valid]


def write_ndjson(records, path_or_fp) -> None:
    """Write pre-built records with the canonical encoding."""
    if hasattr(path_or_fp, "write"):
        for rec in records:
            path_or_fp.write(encode_record(rec) + "\n")
    else:
        with open(path_or_fp, "w", encoding="utf-8", newline="\n") as fp:
            for rec in records:
                fp.write(encode_record(rec) + "\n")
