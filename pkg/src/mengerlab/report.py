"""Per-scale reports and log-linear exponent fits."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import InputError, PreconditionError

SCHEMA_VERSION = "1.0"

# A fitted exponent above -VERDICT_TOL counts as non-decaying.
VERDICT_TOL = 0.05


@dataclass
class LevelRecord:
    level: int
    value: float
    cells: int
    cumulative: float = 0.0
    std_error: Optional[float] = None
    extra: Dict[str, float] = field(default_factory=dict)


@dataclass
class ScaleReport:
    """Contributions per scale (level ``k`` or dyadic shell) and their growth rate.

    ``fitted_exponent`` is the slope of ``log(value)`` against
    ``level * log(base)``: values behave like ``base**(level * exponent)``.
    """

    kind: str
    base: float
    levels: List[LevelRecord]
    predicted_exponent: Optional[float] = None
    fitted_exponent: Optional[float] = None
    gap_check: Optional[float] = None
    verdict: Optional[str] = None
    meta: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        run = 0.0
        for rec in self.levels:
            run += rec.value
            rec.cumulative = run

    @property
    def values(self) -> np.ndarray:
        return np.array([r.value for r in self.levels])

    @property
    def level_indices(self) -> np.ndarray:
        return np.array([r.level for r in self.levels])

    @property
    def total(self) -> float:
        return math.fsum(r.value for r in self.levels)

    def refit(self, predicted: Optional[float] = None) -> "ScaleReport":
        if predicted is not None:
            self.predicted_exponent = predicted
        fitted, _, _ = blowup_fit(self)
        self.fitted_exponent = fitted
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schema_version"] = SCHEMA_VERSION
        d["total"] = self.total
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_json_default)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["level", "cells", "sum", "cumulative", "fitted", "predicted"])
        for r in self.levels:
            w.writerow(
                [r.level, r.cells, fmt(r.value), fmt(r.cumulative), fmt(self.fitted_exponent), fmt(self.predicted_exponent)]
            )
        return buf.getvalue()


def fmt(v) -> str:
    """Round-trip float formatting; empty for missing values."""
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def log_linear_slope(levels: Sequence[float], values: Sequence[float], base: float) -> Tuple[float, int]:
    """Least-squares slope of ``log(values)`` vs ``levels * log(base)``, positives only."""
    lv = np.asarray(levels, dtype=float)
    v = np.asarray(values, dtype=float)
    keep = np.isfinite(v) & (v > 0)
    if keep.sum() < 3:
        raise PreconditionError(f"need at least 3 levels with positive sums, have {int(keep.sum())}")
    x = lv[keep] * math.log(base)
    y = np.log(v[keep])
    slope = np.polyfit(x, y, 1)[0]
    return float(slope), int(keep.sum())


def blowup_fit(report: ScaleReport) -> Tuple[float, Optional[float], Optional[float]]:
    """``(fitted, predicted, relative_gap)`` for a report.

    The relative gap is ``|fitted - predicted| / |predicted|``, or the
    absolute gap when the prediction is zero.
    """
    if not report.base > 1:
        raise InputError("report base must exceed 1")
    fitted, _ = log_linear_slope(report.level_indices, report.values, report.base)
    pred = report.predicted_exponent
    if pred is None:
        return fitted, None, None
    gap = abs(fitted - pred)
    return fitted, pred, (gap / abs(pred) if pred != 0 else gap)


def verdict_for(fitted: float) -> str:
    return "DIVERGENT" if fitted > -VERDICT_TOL else "CONVERGENT"


def load_schema() -> dict:
    """The JSON schema for command-line outputs."""
    from importlib import resources

    return json.loads(resources.files("mengerlab").joinpath("schemas/report.schema.json").read_text())
