"""File ingestion and persistence.

Matrices travel as CSV (floats printed with 17 significant digits so a
write/read round trip is bit-exact); manifests, configs, and reports are
JSON. Writers are deterministic and atomic (temp file + rename); loaders
reject malformed input instead of repairing it.
"""

from __future__ import annotations

import csv
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ManifestError, ParseError, ValidationError
from .network import BrainGraph
from .timeseries import TimeSeries

__all__ = [
    "SubjectRecord",
    "load_timeseries_csv",
    "save_timeseries_csv",
    "load_manifest",
    "save_graph_csv",
    "load_graph_csv",
    "atomic_write_text",
    "write_json",
]


@dataclass
class SubjectRecord:
    subject_id: str
    series_path: Path
    label: int | None = None
    site_id: str | None = None


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def atomic_write_text(path: str | Path, text: str):
    """Write via a temp file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _matrix_csv(values: np.ndarray) -> str:
    return "\n".join(",".join(_fmt(v) for v in row) for row in values) + "\n"


def _parse_matrix_csv(path: str | Path, allow_header: bool) -> np.ndarray:
    rows: list[list[float]] = []
    width: int | None = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for r, raw in enumerate(reader, start=1):
            if not raw or (len(raw) == 1 and raw[0].strip() == ""):
                continue
            if r == 1 and allow_header and not _is_numeric_row(raw):
                continue
            if width is None:
                width = len(raw)
            elif len(raw) != width:
                raise ParseError(f"ragged row: expected {width} columns, got {len(raw)}", row=r)
            parsed = []
            for c, cell in enumerate(raw, start=1):
                try:
                    value = float(cell)
                except ValueError:
                    raise ParseError(f"non-numeric cell {cell!r}", row=r, col=c) from None
                if not np.isfinite(value):
                    raise ParseError(f"non-finite cell {cell!r}", row=r, col=c)
                parsed.append(value)
            rows.append(parsed)
    if not rows:
        raise ParseError("file contains no data rows", row=1)
    return np.array(rows)


def _is_numeric_row(cells: list[str]) -> bool:
    for cell in cells:
        try:
            value = float(cell)
        except ValueError:
            return False
        if not np.isfinite(value):
            return False
    return True


def load_timeseries_csv(path: str | Path) -> TimeSeries:
    """Read a T x N series; optional single header row is skipped."""
    values = _parse_matrix_csv(path, allow_header=True)
    if values.shape[0] < 2:
        raise ParseError(f"time series needs at least 2 rows, got {values.shape[0]}", row=1)
    return TimeSeries(values)


def save_timeseries_csv(ts: TimeSeries, path: str | Path):
    atomic_write_text(path, _matrix_csv(ts.values))


def save_graph_csv(g: BrainGraph, path: str | Path):
    """Headerless N x N adjacency CSV."""
    atomic_write_text(path, _matrix_csv(g.adjacency))


def load_graph_csv(path: str | Path) -> BrainGraph:
    """Read and re-validate an adjacency matrix (symmetry within 1e-12)."""
    a = _parse_matrix_csv(path, allow_header=False)
    if a.shape[0] != a.shape[1]:
        raise ValidationError(f"adjacency must be square, got {a.shape}")
    if np.abs(a - a.T).max() > 1e-12:
        raise ValidationError("adjacency is not symmetric within 1e-12")
    if np.abs(np.diag(a)).max() != 0.0:
        raise ValidationError("adjacency diagonal must be zero")
    try:
        return BrainGraph(a)
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc


def load_manifest(path: str | Path) -> list[SubjectRecord]:
    """JSON array of subject records; ids unique, series files present."""
    path = Path(path)
    try:
        entries = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest is not valid JSON: {exc}") from exc
    if not isinstance(entries, list):
        raise ManifestError("manifest must be a JSON array of records")
    records = []
    seen: set[str] = set()
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict) or "subject_id" not in entry or "series_path" not in entry:
            raise ManifestError(f"record {i} must carry subject_id and series_path")
        sid = str(entry["subject_id"])
        if sid in seen:
            raise ManifestError(f"duplicate subject_id {sid!r}")
        seen.add(sid)
        series = Path(entry["series_path"])
        if not series.is_absolute():
            series = path.parent / series
        if not series.exists():
            raise ManifestError(f"subject {sid!r}: series file {series} does not exist")
        label = entry.get("label")
        records.append(
            SubjectRecord(sid, series,
                          None if label is None else int(label),
                          entry.get("site_id"))
        )
    return records


def write_json(obj, path: str | Path):
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")
