"""Result tables: deterministic CSV output and aggregate recomputation.

Floats are written with %.17g so a re-run with the same seed produces a
byte-identical file, and so the CSV round-trips to the exact binary double.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass
class ExperimentResult:
    """Per-state rows plus their aggregates, with a provenance manifest."""

    name: str
    columns: tuple
    rows: list = field(repr=False)
    aggregate_columns: tuple = ()
    aggregates: list = field(default_factory=list, repr=False)
    manifest: dict = field(default_factory=dict)


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        x = float(v)
        if math.isnan(x):
            return "nan"
        return "%.17g" % x
    return str(v)


def rows_to_csv_text(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(row[c]) for c in columns])
    return buf.getvalue()


def write_csv(path, columns, rows) -> Path:
    path = Path(path)
    path.write_text(rows_to_csv_text(columns, rows))
    return path


def aggregate(rows, group_by, value_columns) -> list:
    """Group rows and append mean/std (sample std, ddof=1) per value column.

    Groups appear in first-encounter order so the output is deterministic.
    """
    groups: dict = {}
    for row in rows:
        key = tuple(row[c] for c in group_by)
        groups.setdefault(key, []).append(row)
    out = []
    for key, members in groups.items():
        agg = dict(zip(group_by, key))
        agg["n"] = len(members)
        for col in value_columns:
            vals = np.array([float(r[col]) for r in members])
            agg[f"{col}_mean"] = vals.mean()
            agg[f"{col}_std"] = vals.std(ddof=1) if len(vals) > 1 else 0.0
        out.append(agg)
    return out


def aggregate_columns(group_by, value_columns) -> tuple:
    cols = list(group_by) + ["n"]
    for col in value_columns:
        cols += [f"{col}_mean", f"{col}_std"]
    return tuple(cols)


def save_result(result: ExperimentResult, out_dir) -> list[Path]:
    """One CSV per experiment plus an aggregates CSV when present."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = [write_csv(out_dir / f"{result.name}.csv", result.columns, result.rows)]
    if result.aggregates:
        written.append(
            write_csv(
                out_dir / f"{result.name}_aggregates.csv",
                result.aggregate_columns,
                result.aggregates,
            )
        )
    return written
