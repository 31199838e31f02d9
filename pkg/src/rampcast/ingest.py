"""SCADA CSV ingestion: parse per-turbine rows, regularise to a fixed cadence,
aggregate to farm level and derive the engineered features.

Row accounting is exact: every data row of the input is either accepted or
rejected with a reason.
"""

from __future__ import annotations

import csv
import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from rampcast.core import Frame, UniformSeries

log = logging.getLogger(__name__)

FEATURES = ("Ws_avg", "Wa_avg", "P_avg", "Ot_avg")
FRAME_COLUMNS = ("P_tot", "pct_rated", "Ws", "Wa_sin", "Wa_cos", "Ot")
SINGLE_TURBINE = "farm"


class IngestError(ValueError):
    pass


@dataclass(frozen=True)
class ColumnMapping:
    """Canonical feature name -> source header. ``timestamp`` and ``P_avg`` are mandatory."""

    timestamp: str = "Date_time"
    P_avg: str = "P_avg"
    turbine_id: str | None = "Wind_turbine_name"
    Ws_avg: str | None = "Ws_avg"
    Wa_avg: str | None = "Wa_avg"
    Ot_avg: str | None = "Ot_avg"
    delimiter: str = ","
    timestamp_format: str = "iso"
    decimal_separator: str = "."

    def __post_init__(self) -> None:
        if not self.timestamp or not self.P_avg:
            raise IngestError("timestamp and P_avg column mappings are mandatory")

    def feature_columns(self) -> dict[str, str]:
        return {k: getattr(self, k) for k in FEATURES if getattr(self, k)}


@dataclass(frozen=True)
class FarmConfig:
    rated_power: float = 8200.0
    expected_turbines: tuple[str, ...] = ()
    cadence: int = 600
    gap_fill_limit: int = 3
    policy: str = "strict"

    def __post_init__(self) -> None:
        if not self.rated_power > 0:
            raise IngestError("rated_power must be > 0")
        if self.gap_fill_limit < 0:
            raise IngestError("gap_fill_limit must be >= 0")
        if self.cadence <= 0:
            raise IngestError("cadence must be > 0 seconds")
        if self.policy not in ("strict", "available"):
            raise IngestError(f"aggregation policy must be strict or available, got {self.policy!r}")


@dataclass(frozen=True)
class Record:
    turbine: str
    timestamp: datetime
    values: dict


@dataclass
class IngestReport:
    rows_read: int = 0
    rows_accepted: int = 0
    rejected: Counter = field(default_factory=Counter)
    coverage: dict = field(default_factory=dict)
    gaps_filled: int = 0
    gaps_missing: int = 0
    grid_conflicts: int = 0
    over_rated_slots: int = 0
    span: tuple[str, str] | None = None
    sources: list = field(default_factory=list)

    @property
    def rows_rejected(self) -> int:
        return sum(self.rejected.values())

    def merge(self, other: "IngestReport") -> None:
        self.rows_read += other.rows_read
        self.rows_accepted += other.rows_accepted
        self.rejected.update(other.rejected)
        self.sources.extend(other.sources)

    def to_dict(self) -> dict:
        return {
            "rows_read": self.rows_read,
            "rows_accepted": self.rows_accepted,
            "rows_rejected": self.rows_rejected,
            "rejections": dict(sorted(self.rejected.items())),
            "coverage_pct": {k: self.coverage[k] for k in sorted(self.coverage)},
            "gaps_filled": self.gaps_filled,
            "gaps_missing": self.gaps_missing,
            "grid_conflicts": self.grid_conflicts,
            "over_rated_slots": self.over_rated_slots,
            "span": list(self.span) if self.span else None,
            "sources": self.sources,
        }


def parse_timestamp(text: str, fmt: str) -> datetime:
    text = text.strip()
    if fmt == "iso":
        if text.endswith("Z"):
            text = text[:-1] + "+00:00"
        ts = datetime.fromisoformat(text)
    else:
        ts = datetime.strptime(text, fmt)
    if ts.tzinfo is None:
        return ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def _number(text: str, decimal: str) -> float | None:
    text = text.strip()
    if text == "" or text.lower() in ("nan", "na", "null"):
        return None
    if decimal != ".":
        text = text.replace(decimal, ".")
    v = float(text)
    if not math.isfinite(v):
        raise ValueError(text)
    return v


def parse_scada(path, mapping: ColumnMapping = ColumnMapping()) -> tuple[dict[str, list[Record]], IngestReport]:
    """Read one delimited SCADA extract into per-turbine record lists.

    Bad rows are counted by reason and skipped; only a missing mandatory
    header column or an empty file aborts.
    """
    path = Path(path)
    report = IngestReport(sources=[str(path)])
    out: dict[str, list[Record]] = defaultdict(list)
    seen: set[tuple[str, datetime]] = set()
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh, delimiter=mapping.delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        pos = {h: i for i, h in enumerate(header)}
        need = [mapping.timestamp, mapping.P_avg]
        lacking = [c for c in need if c not in pos]
        if lacking:
            raise IngestError(f"{path}: mandatory column(s) {lacking} missing from header")
        if mapping.turbine_id and mapping.turbine_id not in pos:
            raise IngestError(f"{path}: turbine id column {mapping.turbine_id!r} missing from header")
        feats = {}
        for k, col in mapping.feature_columns().items():
            if col in pos:
                feats[k] = pos[col]
            else:
                log.warning("%s: optional column %r not found; %s will be absent", path, col, k)
        i_ts = pos[mapping.timestamp]
        i_tb = pos[mapping.turbine_id] if mapping.turbine_id else None

        for row in reader:
            report.rows_read += 1
            if not row or all(not c.strip() for c in row):
                report.rejected["empty row"] += 1
                continue
            if len(row) != len(header):
                report.rejected["wrong field count"] += 1
                continue
            try:
                ts = parse_timestamp(row[i_ts], mapping.timestamp_format)
            except ValueError:
                report.rejected["bad timestamp"] += 1
                continue
            turbine = row[i_tb].strip() if i_tb is not None else SINGLE_TURBINE
            if not turbine:
                report.rejected["missing turbine id"] += 1
                continue
            try:
                values = {k: _number(row[i], mapping.decimal_separator) for k, i in feats.items()}
            except ValueError:
                report.rejected["bad number"] += 1
                continue
            key = (turbine, ts)
            if key in seen:
                report.rejected["duplicate"] += 1
                continue
            seen.add(key)
            out[turbine].append(Record(turbine, ts, values))
            report.rows_accepted += 1
    if report.rows_read == 0:
        raise IngestError(f"{path}: no data rows")
    return dict(out), report


@dataclass
class FillStats:
    filled: int = 0
    missing: int = 0
    conflicts: int = 0


def forward_fill(values: np.ndarray, limit: int) -> tuple[np.ndarray, int]:
    """Fill runs of at most ``limit`` absent points that follow a present one."""
    v = values.copy()
    filled = 0
    n = v.shape[0]
    i = 0
    while i < n:
        if not np.isnan(v[i]):
            i += 1
            continue
        j = i
        while j < n and np.isnan(v[j]):
            j += 1
        if i > 0 and j - i <= limit:
            v[i:j] = v[i - 1]
            filled += j - i
        i = j
    return v, filled


def _grid_bounds(records: dict[str, list[Record]], cadence: int) -> tuple[int, int]:
    stamps = [r.timestamp.timestamp() for rs in records.values() for r in rs]
    if not stamps:
        raise IngestError("no accepted records to regularise")
    lo = int(math.floor(min(stamps) / cadence + 0.5)) * cadence
    hi = int(math.floor(max(stamps) / cadence + 0.5)) * cadence
    return lo, hi


def regularize(
    records: dict[str, list[Record]], config: FarmConfig = FarmConfig()
) -> tuple[dict[str, dict[str, UniformSeries]], dict[str, FillStats]]:
    """Snap records onto a shared epoch-aligned grid and forward-fill short gaps.

    Returns per-turbine feature columns and per-turbine fill statistics.
    Two records landing in one slot with differing values keep the first.
    """
    lo, hi = _grid_bounds(records, config.cadence)
    n = (hi - lo) // config.cadence + 1
    start = datetime.fromtimestamp(lo, tz=timezone.utc)
    columns: dict[str, dict[str, UniformSeries]] = {}
    stats: dict[str, FillStats] = {}
    for turbine in sorted(records):
        st = FillStats()
        grid = {k: np.full(n, np.nan) for k in FEATURES}
        taken: dict[int, dict] = {}
        for rec in sorted(records[turbine], key=lambda r: r.timestamp):
            slot = int(math.floor((rec.timestamp.timestamp() - lo) / config.cadence + 0.5))
            if slot in taken:
                if taken[slot] != rec.values:
                    st.conflicts += 1
                    log.info("turbine %s: conflicting records in slot %d; kept first", turbine, slot)
                continue
            taken[slot] = rec.values
            for k, v in rec.values.items():
                if v is not None:
                    grid[k][slot] = v
        cols = {}
        for k in FEATURES:
            vals, filled = forward_fill(grid[k], config.gap_fill_limit)
            if k == "P_avg":
                st.filled = filled
                st.missing = int(np.isnan(vals).sum())
            cols[k] = UniformSeries(start, config.cadence, vals, name=f"{turbine}:{k}")
        columns[turbine] = cols
        stats[turbine] = st
    return columns, stats


def circular_mean_deg(angles: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise circular mean of degree angles (axis 1), as (sin, cos); NaN ignored."""
    rad = np.deg2rad(angles)
    s = np.nansum(np.sin(rad), axis=1)
    c = np.nansum(np.cos(rad), axis=1)
    norm = np.hypot(s, c)
    with np.errstate(invalid="ignore", divide="ignore"):
        out_s = np.where(norm > 0, s / norm, np.nan)
        out_c = np.where(norm > 0, c / norm, np.nan)
    return out_s, out_c


def _row_mean(m: np.ndarray) -> np.ndarray:
    cnt = (~np.isnan(m)).sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(cnt > 0, np.nansum(m, axis=1) / np.maximum(cnt, 1), np.nan)


def aggregate_farm(
    turbines: dict[str, dict[str, UniformSeries]], config: FarmConfig = FarmConfig()
) -> tuple[Frame, int]:
    """Sum power and average the weather variables across turbines.

    Under the ``strict`` policy a slot is absent when any expected turbine
    lacks power there; ``available`` sums whatever is present. Returns the
    feature frame and the number of slots above rated power (warned, not
    clipped).
    """
    if not turbines:
        raise IngestError("no turbines to aggregate")
    expected = list(config.expected_turbines) or sorted(turbines)
    absent = [t for t in expected if t not in turbines]
    any_col = next(iter(next(iter(turbines.values())).values()))
    start, interval, n = any_col.start, any_col.interval, len(any_col)

    def stack(feat: str) -> np.ndarray:
        cols = [turbines[t][feat].values if t in turbines else np.full(n, np.nan) for t in expected]
        return np.column_stack(cols)

    power = stack("P_avg")
    present = ~np.isnan(power)
    if config.policy == "strict":
        p_tot = np.where(present.all(axis=1), np.nansum(power, axis=1), np.nan)
    else:
        p_tot = np.where(present.any(axis=1), np.nansum(power, axis=1), np.nan)
    if absent:
        log.warning("expected turbines with no data: %s", absent)
    pct = 100.0 * p_tot / config.rated_power
    over = int(np.nansum(pct > 100.0 + 1e-9))
    if over:
        log.warning("%d slots exceed rated power; values kept", over)
    wa_sin, wa_cos = circular_mean_deg(stack("Wa_avg"))

    def col(v, unit, name):
        return UniformSeries(start, interval, v, unit=unit, name=name)

    frame = Frame(
        {
            "P_tot": col(p_tot, "kW", "P_tot"),
            "pct_rated": col(pct, "%", "pct_rated"),
            "Ws": col(_row_mean(stack("Ws_avg")), "m/s", "Ws"),
            "Wa_sin": col(wa_sin, "", "Wa_sin"),
            "Wa_cos": col(wa_cos, "", "Wa_cos"),
            "Ot": col(_row_mean(stack("Ot_avg")), "degC", "Ot"),
        }
    )
    return frame, over


def ingest(paths, mapping: ColumnMapping = ColumnMapping(), config: FarmConfig = FarmConfig()) -> tuple[Frame, IngestReport]:
    """Parse every file, regularise and aggregate into one farm-level frame."""
    if isinstance(paths, (str, Path)):
        paths = [paths]
    report = IngestReport()
    merged: dict[str, list[Record]] = defaultdict(list)
    for p in paths:
        recs, rep = parse_scada(p, mapping)
        report.merge(rep)
        for t, rs in recs.items():
            merged[t].extend(rs)
    # cross-file duplicates keep the first file's row
    for t in list(merged):
        seen: set[datetime] = set()
        keep = []
        for r in merged[t]:
            if r.timestamp in seen:
                report.rejected["duplicate"] += 1
                report.rows_accepted -= 1
                continue
            seen.add(r.timestamp)
            keep.append(r)
        merged[t] = keep
    cols, stats = regularize(dict(merged), config)
    frame, over = aggregate_farm(cols, config)
    n = len(frame)
    for t, st in stats.items():
        report.coverage[t] = round(100.0 * (n - st.missing) / n, 4) if n else 0.0
        report.gaps_filled += st.filled
        report.gaps_missing += st.missing
        report.grid_conflicts += st.conflicts
    report.over_rated_slots = over
    report.span = (frame.start.isoformat(), frame["P_tot"].timestamp(n - 1).isoformat())
    return frame, report
