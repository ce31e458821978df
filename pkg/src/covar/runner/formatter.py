"""Run summaries and the CSV/JSON files an experiment writes."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from covar.solver.trace import TRACE_COLUMNS, IterationTrace


def format_result(
    success: bool,
    message: str,
    suggestion: str | None = None,
) -> str:
    """Format a CLI status line.

    Success: ``+ message``
    Error:   ``! message`` with optional ``  try: suggestion``
    """
    if success:
        return f"+ {message}"
    line = f"! {message}"
    if suggestion:
        line += f"\n  try: {suggestion}"
    return line


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------

def quartiles(values: Sequence[float]) -> dict[str, float | None]:
    """Median and quartiles over the finite entries; ``None`` when there are none."""
    arr = np.asarray([v for v in values if v is not None], dtype=float)
    arr = arr[np.isfinite(arr)]
    if arr.size == 0:
        return {"median": None, "q1": None, "q3": None}
    q1, median, q3 = np.percentile(arr, [25, 50, 75])
    return {"median": float(median), "q1": float(q1), "q3": float(q3)}


def aggregate(rows: Sequence[Mapping[str, Any]], keys: Sequence[str]) -> dict[str, dict[str, float | None]]:
    """Quartile summary per numeric column; booleans count as 0/1."""
    out: dict[str, dict[str, float | None]] = {}
    for key in keys:
        values = [float(r[key]) for r in rows if isinstance(r.get(key), (int, float))]
        out[key] = quartiles(values)
    return out


@dataclass
class RunSummary:
    """Per-seed rows plus aggregates recomputable from them."""

    task: str
    optimizer: str
    rows: list[dict[str, Any]] = field(default_factory=list)
    metrics: tuple[str, ...] = ()
    extras: dict[str, Any] = field(default_factory=dict)

    @property
    def aggregates(self) -> dict[str, dict[str, float | None]]:
        return aggregate(self.rows, self.metrics)

    def median(self, key: str) -> float | None:
        return self.aggregates[key]["median"]

    def to_dict(self) -> dict[str, Any]:
        return {
            "task": self.task,
            "optimizer": self.optimizer,
            "seeds": self.rows,
            "aggregates": self.aggregates,
            **self.extras,
        }


# ---------------------------------------------------------------------------
# Writers
# ---------------------------------------------------------------------------

def json_safe(obj: Any) -> Any:
    """Replace NaN/inf with ``None`` and numpy scalars with Python ones."""
    if isinstance(obj, Mapping):
        return {str(k): json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [json_safe(v) for v in obj.tolist()]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def write_json(path: Path, obj: Any) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(json_safe(obj), ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
    return path


def write_csv(path: Path, fieldnames: Sequence[str], rows: Sequence[Mapping[str, Any]]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(fieldnames), extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in fieldnames})
    return path


def write_trace(trace: IterationTrace, path: Path) -> Path:
    """One CSV row per completed iteration, columns in :data:`TRACE_COLUMNS` order."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for record in trace.records:
            writer.writerow(record.row())
    return path


def write_summary(summary: RunSummary, path: Path) -> Path:
    return write_json(path, summary.to_dict())
