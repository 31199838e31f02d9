"""CSV/JSON persistence for series and frames.

Timestamps are written as ISO-8601 UTC (``2013-01-07T00:20:00Z``); absent
values are empty cells. Floats use ``repr`` so a write/read cycle is lossless.
"""

from __future__ import annotations

import csv
import json
import os
import tempfile
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from rampcast.core import Frame, SeriesError, UniformSeries


def iso(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_iso(text: str) -> datetime:
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    return ts.replace(tzinfo=timezone.utc) if ts.tzinfo is None else ts.astimezone(timezone.utc)


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return "" if np.isnan(v) else repr(float(v))
    return str(v)


def write_rows(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_frame(frame: Frame, path, columns: Sequence[str] | None = None) -> None:
    names = list(columns) if columns is not None else frame.names
    first = frame[names[0]]
    mats = [frame[n].values for n in names]
    rows = ([iso(first.timestamp(i))] + [m[i] for m in mats] for i in range(len(first)))
    write_rows(path, ["timestamp"] + names, rows)


def write_series(series: UniformSeries, path, name: str | None = None) -> None:
    write_frame(Frame({name or series.name or "value": series}), path)


def read_frame(path, units: dict[str, str] | None = None) -> Frame:
    """Read a ``timestamp,<col>...`` CSV on a regular grid."""
    units = units or {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SeriesError(f"{path}: empty file") from None
        if not header or header[0] != "timestamp":
            raise SeriesError(f"{path}: first column must be 'timestamp'")
        stamps, cols = [], [[] for _ in header[1:]]
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise SeriesError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            stamps.append(parse_iso(row[0]))
            for c, cell in zip(cols, row[1:]):
                c.append(float(cell) if cell.strip() else np.nan)
    if not stamps:
        raise SeriesError(f"{path}: no data rows")
    if len(stamps) > 1:
        interval = (stamps[1] - stamps[0]).total_seconds()
        for a, b in zip(stamps, stamps[1:]):
            if (b - a).total_seconds() != interval:
                raise SeriesError(f"{path}: irregular timestamps at {iso(b)}; regularise first")
    else:
        interval = 600
    if interval <= 0 or interval != int(interval):
        raise SeriesError(f"{path}: timestamps must increase by whole seconds")
    return Frame(
        {
            name: UniformSeries(stamps[0], int(interval), np.array(vals), unit=units.get(name, ""), name=name)
            for name, vals in zip(header[1:], cols)
        }
    )


def dump_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=False)
        fh.write("\n")


def load_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


class Staging:
    """Write artifacts to a scratch directory and move them into place only on success.

    Used as a context manager; on an exception nothing reaches ``out_dir``.
    """

    def __init__(self, out_dir) -> None:
        self.out_dir = Path(out_dir)
        self._tmp: Path | None = None
        self.committed: list[Path] = []

    def __enter__(self) -> "Staging":
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self._tmp = Path(tempfile.mkdtemp(prefix=".staging-", dir=self.out_dir))
        return self

    def path(self, name: str) -> Path:
        assert self._tmp is not None
        p = self._tmp / name
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def __exit__(self, exc_type, exc, tb) -> None:
        assert self._tmp is not None
        try:
            if exc_type is None:
                for src in sorted(self._tmp.rglob("*")):
                    if src.is_file():
                        dst = self.out_dir / src.relative_to(self._tmp)
                        dst.parent.mkdir(parents=True, exist_ok=True)
                        os.replace(src, dst)
                        self.committed.append(dst)
        finally:
            for p in sorted(self._tmp.rglob("*"), reverse=True):
                p.unlink() if p.is_file() else p.rmdir()
            self._tmp.rmdir()
