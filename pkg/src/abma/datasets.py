"""Embedded per-app usage datasets for the replay path.

Two measurement campaigns on a stock Android handset, each observed over
four durations: one on mobile data alone, one on a hybrid mobile+WiFi
connection. Each block lists six legitimate apps plus one hidden consumer,
with per-app averages for data (Mbps), battery use (%), and power drawn
(mAh). The week and month blocks are per-day averages; each block is
replayed as a single averaged tick, so the normalization does not matter
to the detector.

The rows are embedded (not fetched) so replay tests are hermetic, and each
block is checked against independently hand-summed column totals before it
is handed out; a mismatch means the transcription drifted.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal

SOURCES = ("mobile_data", "hybrid")
DURATIONS = ("1h", "1d", "1w", "1m")

INTRUDER_NAME = "Intruder application"


class ChecksumError(ValueError):
    """An embedded block no longer matches its recorded column totals."""


@dataclass(frozen=True)
class DatasetRow:
    app_name: str
    data: float         # Mbps
    battery_pct: float  # % of a full charge
    power: float        # mAh
    valid: bool


@dataclass(frozen=True)
class MeasuredDataset:
    source: str
    duration: str
    rows: tuple


# (app, data Mbps, battery %, power mAh, valid). The final row of every
# block is the hidden consumer.
_BLOCKS = {
    ("mobile_data", "1h"): (
        ("Whatsapp", "0.577", "2", "16.44", True),
        ("Facebook", "32.6", "7.23", "127.150", True),
        ("Youtube", "42.9", "9.1", "160.037", True),
        ("Chrome", "12.5", "6.74", "118.53", True),
        ("Gmail", "0.241", "0.83", "14.596", True),
        ("Amazon", "0.545", "1.98", "34.82", True),
        (INTRUDER_NAME, "30.7", "5.22", "174.15", False),
    ),
    ("mobile_data", "1d"): (
        ("Whatsapp", "1.3", "4.41", "72.81", True),
        ("Facebook", "57.5", "20.17", "354.72", True),
        ("Youtube", "86.6", "25", "443.4", True),
        ("Chrome", "76.7", "25.6", "454.041", True),
        ("Gmail", "4.7", "5", "85.3", True),
        ("Amazon", "1.1", "3", "49.53", True),
        (INTRUDER_NAME, "52.2", "20.23", "362.15", False),
    ),
    ("mobile_data", "1w"): (
        ("Whatsapp", "12.06", "5", "208.62", True),
        ("Facebook", "100.1", "8.2", "307.19", True),
        ("Youtube", "299.5", "30.19", "848.61", True),
        ("Chrome", "128.26", "10.2", "283.08", True),
        ("Gmail", "9.4", "3.87", "129.21", True),
        ("Amazon", "10.61", "4", "164.82", True),
        (INTRUDER_NAME, "96.6", "28.2", "598.16", False),
    ),
    ("mobile_data", "1m"): (
        ("Whatsapp", "66.2", "12.24", "510.72", True),
        ("Facebook", "157.7", "10", "374.626", True),
        ("Youtube", "322.13", "22", "974.03", True),
        ("Chrome", "302", "20.11", "558.12", True),
        ("Gmail", "58.7", "8", "344.58", True),
        ("Amazon", "101.7", "3.1", "127.74", True),
        (INTRUDER_NAME, "112", "7", "230.63", False),
    ),
    ("hybrid", "1h"): (
        ("Whatsapp", "0.5016", "1.80", "14.8", True),
        ("Facebook", "56.2", "8", "65.17", True),
        ("Youtube", "17.7", "7", "53.05", True),
        ("Chrome", "2.7", "3", "64.19", True),
        ("Gmail", "0.372", "0.8", "14.8", True),
        ("Amazon", "1", "1.41", "26.16", True),
        (INTRUDER_NAME, "21.1", "4.73", "166.81", False),
    ),
    ("hybrid", "1d"): (
        ("Whatsapp", "1.6", "3.33", "61.59", True),
        ("Facebook", "72.3", "17.6", "312.16", True),
        ("Youtube", "44.8", "13.07", "241.87", True),
        ("Chrome", "8.8", "5.82", "107.66", True),
        ("Gmail", "1.3", "3.57", "70.2", True),
        ("Amazon", "3.3", "4.10", "75.92", True),
        (INTRUDER_NAME, "61.5", "23.7", "253.6", False),
    ),
    ("hybrid", "1w"): (
        ("Whatsapp", "13.23", "5.14", "171.44", True),
        ("Facebook", "112.3", "11.32", "232.48", True),
        ("Youtube", "192.68", "12.35", "162.05", True),
        ("Chrome", "54.92", "6.026", "165.76", True),
        ("Gmail", "11.24", "3.556", "114.48", True),
        ("Amazon", "24.4", "2.27", "51.883", True),
        (INTRUDER_NAME, "109", "11.61", "259.6", False),
    ),
    ("hybrid", "1m"): (
        ("Whatsapp", "78.6", "10.29", "437.95", True),
        ("Facebook", "202.2", "8.36", "320.12", True),
        ("Youtube", "358.8", "17", "752.66", True),
        ("Chrome", "241.2", "9.26", "325.44", True),
        ("Gmail", "66.9", "6.3", "258.44", True),
        ("Amazon", "128.5", "1.3", "53.57", True),
        (INTRUDER_NAME, "215", "10.25", "328.8", False),
    ),
}

# Hand-summed column totals per block: (valid-only, all-rows) for each of
# data / battery / power. Summed independently of the rows above; exact
# decimal arithmetic, no float involvement.
_COLUMN_SUMS = {
    ("mobile_data", "1h"): (("89.363", "120.063"), ("27.88", "33.10"), ("471.573", "645.723")),
    ("mobile_data", "1d"): (("227.9", "280.1"), ("83.18", "103.41"), ("1459.801", "1821.951")),
    ("mobile_data", "1w"): (("559.93", "656.53"), ("61.46", "89.66"), ("1941.53", "2539.69")),
    ("mobile_data", "1m"): (("1008.43", "1120.43"), ("75.45", "82.45"), ("2889.816", "3120.446")),
    ("hybrid", "1h"): (("78.4736", "99.5736"), ("22.01", "26.74"), ("238.17", "404.98")),
    ("hybrid", "1d"): (("132.1", "193.6"), ("47.49", "71.19"), ("869.40", "1123.00")),
    ("hybrid", "1w"): (("408.77", "517.77"), ("40.662", "52.272"), ("898.093", "1157.693")),
    ("hybrid", "1m"): (("1076.2", "1291.2"), ("52.51", "62.76"), ("2148.18", "2476.98")),
}


def _verify_block(key, raw_rows) -> None:
    if len(raw_rows) != 7:
        raise ChecksumError(f"{key}: expected 7 rows, found {len(raw_rows)}")
    invalid = [r for r in raw_rows if not r[4]]
    if len(invalid) != 1:
        raise ChecksumError(f"{key}: expected exactly one invalid row, found {len(invalid)}")
    for col in range(3):
        valid_sum = sum(Decimal(r[1 + col]) for r in raw_rows if r[4])
        full_sum = sum(Decimal(r[1 + col]) for r in raw_rows)
        want_valid, want_full = (Decimal(s) for s in _COLUMN_SUMS[key][col])
        if valid_sum != want_valid or full_sum != want_full:
            raise ChecksumError(
                f"{key}: column {col} sums ({valid_sum}, {full_sum}) "
                f"do not match recorded ({want_valid}, {want_full})")
    for r in raw_rows:
        if any(Decimal(r[i]) <= 0 for i in (1, 2, 3)):
            raise ChecksumError(f"{key}: nonpositive value in row {r[0]!r}")


def load_dataset(source: str, duration: str) -> MeasuredDataset:
    """Return one verified block of the embedded measurements."""
    key = (source, duration)
    if key not in _BLOCKS:
        raise KeyError(
            f"no dataset for source={source!r} duration={duration!r}; "
            f"sources {SOURCES}, durations {DURATIONS}")
    raw = _BLOCKS[key]
    _verify_block(key, raw)
    rows = tuple(
        DatasetRow(app_name=r[0], data=float(r[1]), battery_pct=float(r[2]),
                   power=float(r[3]), valid=r[4])
        for r in raw)
    return MeasuredDataset(source=source, duration=duration, rows=rows)
