"""Delimited output: tidy CSV tables and a flat ``key = value`` report.

Floats are written with 17 significant digits so that files round-trip and
compare byte for byte between runs.
"""

from __future__ import annotations

import csv
import io
import math
import os
from typing import Iterable, Sequence

import numpy as np

from ..errors import DataIOError


def fmt(v) -> str:
    """Canonical text form of a scalar; None becomes the empty string."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return format(v, ".17g")
    try:
        return format(float(v), ".17g")
    except (TypeError, ValueError):
        return str(v)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def kv_text(pairs: Iterable) -> str:
    """One ``key = value`` line per pair, in the given order."""
    return "".join(f"{k} = {fmt(v)}\n" for k, v in pairs)


def ensure_dir(path: str) -> str:
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise DataIOError(f"cannot create output directory {path}: {exc}") from exc
    return path


def write_text(path: str, text: str) -> str:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise DataIOError(f"cannot write {path}: {exc}") from exc
    return path


def verdict_tables(verdicts) -> tuple:
    """``(summary_csv, evidence_csv)`` for a list of ConditionVerdict."""
    summary = csv_text(
        ["condition", "outcome", "clause", "tolerance"],
        [(v.condition_id, v.outcome, v.clause, v.tolerance) for v in verdicts],
    )
    rows = [r for v in verdicts for r in v.rows()]
    return summary, csv_text(["condition", "key", "value"], rows)


def mgf_table_csv(t_grid, columns: dict, skipped=()) -> str:
    names = list(columns)
    skipped = set(float(s) for s in skipped)
    rows = []
    for i, t in enumerate(np.asarray(t_grid, dtype=float)):
        rows.append([t, *[columns[n][i] for n in names], float(t) in skipped])
    return csv_text(["t", *names, "interpolated"], rows)
