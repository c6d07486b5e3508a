"""Plot-ready CSV and JSON artifacts.

Floats are written with ``%.17g`` so values round-trip exactly; missing
values are empty cells. JSON output uses sorted keys and maps NaN to null.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable

import numpy as np

from .replay import ClassResult
from .scheduler import SimReport

HIST_BINS = 21
HIST_RANGE = (-1.0, 1.0)

CLASS_COLUMNS = ("step", "actual", "forecast", "pct_error", "smoothed", "flags", "event",
                 "active_model", "reference", "horizon", "ewma_active", "switched")
DECISION_COLUMNS = ("job_number", "class", "verdict", "budget", "planned_start",
                    "actual_start", "completion", "deadline", "hit")


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % value
    return str(value)


def write_csv(path, header: Iterable[str], rows: Iterable[Iterable]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(header))
        for row in rows:
            w.writerow([fmt(v) for v in row])


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return None if not math.isfinite(obj) else float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_json(path, obj) -> None:
    text = json.dumps(_json_safe(obj), sort_keys=True, indent=2, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def error_histogram(pct_errors) -> list[tuple[float, float, int]]:
    """21 equal bins on [-1, 1] (last bin closed) plus an overflow bin each side."""
    e = np.asarray(list(pct_errors), dtype=float)
    lo, hi = HIST_RANGE
    edges = np.linspace(lo, hi, HIST_BINS + 1)
    inside = e[(e >= lo) & (e <= hi)]
    counts, _ = np.histogram(inside, bins=edges)
    rows = [(-math.inf, lo, int((e < lo).sum()))]
    rows += [(float(edges[i]), float(edges[i + 1]), int(counts[i])) for i in range(HIST_BINS)]
    rows.append((hi, math.inf, int((e > hi).sum())))
    return rows


def class_rows(result: ClassResult):
    for s in result.steps:
        yield (s.step, s.actual, s.forecast, s.pct_error, s.smoothed, s.kinds, s.event,
               s.active_model, s.reference, s.horizon, s.ewma_active, s.switched)


def emit_class_summary(result: ClassResult, csv_path, hist_path) -> None:
    write_csv(csv_path, CLASS_COLUMNS, class_rows(result))
    write_csv(hist_path, ("bin_lo", "bin_hi", "count"), error_histogram(result.pct_errors))


def nearest_rank(sorted_values, q: float) -> float:
    n = len(sorted_values)
    rank = min(max(math.ceil(round(q * n, 9)), 1), n)
    return float(sorted_values[rank - 1])


def duration_cdf(durations) -> tuple[np.ndarray, np.ndarray]:
    """Distinct durations and the empirical CDF evaluated at each."""
    d = np.sort(np.asarray(list(durations), dtype=float))
    if d.size == 0:
        raise ValueError("need at least one duration")
    values, counts = np.unique(d, return_counts=True)
    return values, np.cumsum(counts) / d.size


def cdf_stats(durations) -> dict:
    """10%/90% nearest-rank quantiles and the R^2 of ECDF against log10(duration)
    over the distinct points between them."""
    d = np.sort(np.asarray(list(durations), dtype=float))
    values, cdf = duration_cdf(d)
    q10, q90 = nearest_rank(d, 0.1), nearest_rank(d, 0.9)
    mask = (values >= q10) & (values <= q90)
    r2 = float("nan")
    if mask.sum() >= 3 and np.all(values[mask] > 0):
        x = np.log10(values[mask])
        y = cdf[mask]
        A = np.column_stack([np.ones_like(x), x])
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        ss_res = float(((y - A @ coef) ** 2).sum())
        ss_tot = float(((y - y.mean()) ** 2).sum())
        r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else float("nan")
    return {"n": int(d.size), "q10": q10, "q90": q90, "r2_log_linear": r2,
            "n_fit_points": int(mask.sum())}


def emit_duration_cdf(durations, csv_path, stats_path) -> dict:
    values, cdf = duration_cdf(durations)
    write_csv(csv_path, ("duration", "cdf"), zip(values.tolist(), cdf.tolist()))
    stats = cdf_stats(durations)
    write_json(stats_path, stats)
    return stats


def emit_decisions(report: SimReport, csv_path) -> None:
    write_csv(csv_path, DECISION_COLUMNS, (
        (j.job_number, j.class_key, j.verdict, j.budget, j.planned_start, j.actual_start,
         j.completion, j.deadline, j.hit) for j in report.jobs))
