"""Residual reports and deterministic JSON/CSV writers."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

SCHEMA_VERSION = 1


@dataclass(eq=False)
class ResidualReport:
    """Per-point normalized residuals of one criterion equation over a grid.

    ``equation`` is one of ``LC2``, ``SIN3``, ``SIN6`` (or ``PREGEO`` for the
    pre-geodesic test).  ``parts`` holds sub-reports when one report
    summarizes several equations.
    """

    equation: str
    points: np.ndarray
    per_point: np.ndarray
    normalization: str
    grid: dict = field(default_factory=dict)
    parts: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.per_point = np.asarray(self.per_point, dtype=float)
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))

    @property
    def max(self):
        return float(np.max(self.per_point)) if self.per_point.size else 0.0

    @property
    def mean(self):
        # numpy reduces 1-D float arrays by pairwise summation
        return float(np.mean(self.per_point)) if self.per_point.size else 0.0

    @property
    def worst_point(self):
        if not self.per_point.size:
            return []
        return [float(v) for v in self.points[int(np.argmax(self.per_point))]]

    def to_json(self, per_point=False):
        out = {
            "equation": self.equation,
            "grid": self.grid,
            "max": self.max,
            "mean": self.mean,
            "worst_point": self.worst_point,
            "normalization": self.normalization,
        }
        if per_point:
            out["per_point"] = [float(v) for v in self.per_point]
        if self.parts:
            out["parts"] = {k: v.to_json(per_point) for k, v in sorted(self.parts.items())}
        out.update(to_jsonable(self.extra))
        return out


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if np.isnan(v):
            return "nan"
        if np.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if hasattr(obj, "to_json"):
        return obj.to_json()
    return obj


def dumps(obj):
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2) + "\n"


def write_atomic(path, text):
    """Write via a temporary file in the target directory, then rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def residual_csv(report: ResidualReport, dimension=None):
    """``x1,...,xn,residual`` rows in grid order."""
    n = report.points.shape[1] if report.points.ndim == 2 else (dimension or 0)
    header = [f"x{k + 1}" for k in range(n)] + ["residual"]
    rows = [list(p) + [r] for p, r in zip(report.points, report.per_point)] if report.per_point.size else []
    return csv_text(header, rows)
