"""Sensor CSV reading and writing.

Rows look like::

    timestamp,hive_id,sensor_location,temperature_c
    2021-08-01T00:20:00Z,hive-3,Core,34.1

``sensor_location`` is one of Core, Peripheral, External; an empty
temperature is a missing reading. Lines starting with ``#`` are comments.
"""

from __future__ import annotations

import csv
import logging
import math
from pathlib import Path
from typing import Iterable, Mapping, Sequence
from zoneinfo import ZoneInfo

import numpy as np
import pandas as pd

from .errors import MisalignedSensors, ParseError
from .model import SANITY_HIGH, SANITY_LOW, HiveDataset, HiveType, TemperatureSeries

log = logging.getLogger(__name__)

COLUMNS = ("timestamp", "hive_id", "sensor_location", "temperature_c")
LOCATIONS = {"core": "Core", "peripheral": "Peripheral", "external": "External"}


def read_sensor_csv(path: str | Path) -> pd.DataFrame:
    """Parse and validate one CSV file into typed columns."""
    try:
        df = pd.read_csv(path, comment="#", dtype=str, keep_default_na=False,
                         skipinitialspace=True)
    except (pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from exc
    missing = [c for c in COLUMNS if c not in df.columns]
    if missing:
        raise ParseError(f"{path}: missing column(s) {', '.join(missing)}")
    df = df[list(COLUMNS)].copy()
    rows = np.arange(1, len(df) + 1)

    ts = pd.to_datetime(df["timestamp"], utc=True, errors="coerce", format="ISO8601")
    bad = ts.isna().to_numpy()
    if bad.any():
        i = int(np.argmax(bad))
        raise ParseError(f"{path}: bad timestamp {df['timestamp'].iloc[i]!r}", rows[i])

    loc = df["sensor_location"].str.strip().str.lower().map(LOCATIONS)
    bad = loc.isna().to_numpy()
    if bad.any():
        i = int(np.argmax(bad))
        raise ParseError(f"{path}: unknown sensor_location "
                         f"{df['sensor_location'].iloc[i]!r}", rows[i])

    raw = df["temperature_c"].str.strip()
    bad = (pd.to_numeric(raw, errors="coerce").isna() & (raw != "")).to_numpy()
    if bad.any():
        i = int(np.argmax(bad))
        raise ParseError(f"{path}: bad temperature {raw.iloc[i]!r}", rows[i])
    # float() rounds correctly, so written values read back bit for bit
    temp = pd.Series([float(v) if v else np.nan for v in raw], index=raw.index)
    if (df["hive_id"].str.strip() == "").any():
        i = int(np.argmax((df["hive_id"].str.strip() == "").to_numpy()))
        raise ParseError(f"{path}: empty hive_id", rows[i])

    insane = (temp < SANITY_LOW) | (temp > SANITY_HIGH)
    if insane.any():
        log.warning("%s: %d reading(s) outside [%g, %g] C dropped", path,
                    int(insane.sum()), SANITY_LOW, SANITY_HIGH)
        temp = temp.mask(insane)
    return pd.DataFrame({"timestamp": ts, "hive_id": df["hive_id"].str.strip(),
                         "sensor_location": loc, "temperature_c": temp.astype(float)})


def _day_boundaries(times: pd.DatetimeIndex, tz: str) -> tuple[int, ...]:
    local = times.tz_convert(ZoneInfo(tz))
    midnight = np.flatnonzero((local.hour == 0) & (local.minute == 0))
    return tuple(sorted({0, *midnight.tolist()}))


def ingest(paths: Sequence[str | Path] | str | Path,
           hive_types: Mapping[str, HiveType | str] | None = None,
           tz: str = "UTC") -> list[HiveDataset]:
    """Read sensor CSVs into hourly, aligned datasets, one per hive.

    Sub-hourly readings are averaged into hourly buckets; an hour with no
    readings is missing. Duplicate (hive, location, timestamp) rows are
    averaged with a warning. Hives default to control unless listed in
    ``hive_types``.
    """
    if isinstance(paths, (str, Path)):
        paths = [paths]
    frames = [read_sensor_csv(p) for p in paths]
    if not frames:
        return []
    df = pd.concat(frames, ignore_index=True)
    hive_types = dict(hive_types or {})

    keys = ["hive_id", "sensor_location", "timestamp"]
    dup = df.duplicated(keys, keep=False)
    if dup.any():
        n_dup = int(dup.sum() - df[dup].drop_duplicates(keys).shape[0])
        log.warning("%d duplicate reading(s) averaged", n_dup)
        df = df.groupby(keys, as_index=False, sort=False)["temperature_c"].mean()

    df["hour"] = df["timestamp"].dt.floor("h")
    datasets = []
    for hive_id, g in df.groupby("hive_id", sort=True):
        present = set(g["sensor_location"])
        lacking = {"Core", "External"} - present
        if lacking:
            raise MisalignedSensors(f"hive {hive_id!r} has no {' or '.join(sorted(lacking))} stream")
        grid = pd.date_range(g["hour"].min(), g["hour"].max(), freq="h")
        hourly = (g.groupby(["sensor_location", "hour"])["temperature_c"].mean()
                  .unstack("sensor_location").reindex(grid))
        series = {}
        for loc in ("External", "Peripheral", "Core"):
            vals = hourly[loc].to_numpy(float) if loc in hourly else np.full(len(grid), np.nan)
            series[loc] = TemperatureSeries(vals, grid[0].to_pydatetime())
        datasets.append(HiveDataset(
            str(hive_id), HiveType(hive_types.get(hive_id, HiveType.CONTROL)),
            series["External"], series["Peripheral"], series["Core"],
            _day_boundaries(grid, tz)))
    return datasets


def _fmt(v: float) -> str:
    return "" if math.isnan(v) else repr(float(v))


def write_sensor_csv(datasets: Iterable[HiveDataset], path: str | Path,
                     header_comment: str | None = None) -> Path:
    """Write datasets as canonical hourly sensor rows.

    An all-missing peripheral stream is omitted.
    """
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh)
        w.writerow(COLUMNS)
        for ds in datasets:
            streams = [("External", ds.ext), ("Peripheral", ds.peri), ("Core", ds.core)]
            streams = [(n, s) for n, s in streams if n != "Peripheral" or s.present.any()]
            times = [t.strftime("%Y-%m-%dT%H:%M:%SZ") for t in ds.core.times()]
            for name, s in streams:
                for t, v in zip(times, s.values):
                    w.writerow((t, ds.hive_id, name, _fmt(v)))
    return path
