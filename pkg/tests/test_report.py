import csv

import numpy as np
import pytest

from probsched.ensemble import ExpertEnsemble
from probsched.forecasters import PolyTrendForecaster
from probsched.replay import ClassResult, StepRecord, replay_series
from probsched.report import (
    CLASS_COLUMNS,
    cdf_stats,
    duration_cdf,
    emit_class_summary,
    emit_duration_cdf,
    error_histogram,
    fmt,
    write_json,
)
from probsched.synth import ClassGenSpec, gen_class_series, inject_mode_change


def read(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_histogram_layout():
    rows = error_histogram([])
    assert len(rows) == 23
    assert rows[0][:2] == (-np.inf, -1.0) and rows[-1][:2] == (1.0, np.inf)
    widths = {round(hi - lo, 12) for lo, hi, _ in rows[1:-1]}
    assert widths == {round(2 / 21, 12)}


def test_histogram_perfect_forecasts():
    rows = error_histogram([0.0] * 7)
    (hit,) = [r for r in rows if r[2]]
    assert hit[0] <= 0 <= hit[1] and hit[2] == 7


def test_histogram_symmetric_pair():
    rows = error_histogram([-0.5, 0.5])
    counts = [c for _, _, c in rows]
    assert sum(counts) == 2 and counts == counts[::-1]


def test_histogram_overflow_and_closed_top_edge():
    counts = [c for _, _, c in error_histogram([-3.0, -1.0, 1.0, 1.5])]
    assert (counts[0], counts[1], counts[-2], counts[-1]) == (1, 1, 1, 1)


def test_cdf_examples():
    v, f = duration_cdf([4, 1, 3, 2])
    assert v.tolist() == [1, 2, 3, 4] and f.tolist() == [0.25, 0.5, 0.75, 1.0]
    v, f = duration_cdf([9])
    assert v.tolist() == [9] and f.tolist() == [1.0]
    v, f = duration_cdf([5, 5, 7])
    assert v.tolist() == [5, 7] and f.tolist() == pytest.approx([2 / 3, 1.0])


def test_cdf_stats_on_exact_log_uniform_grid():
    d = np.logspace(np.log10(50), np.log10(5000), 2001)
    stats = cdf_stats(d)
    assert stats["r2_log_linear"] > 0.9999
    assert stats["q10"] == pytest.approx(d[200]) and stats["q90"] == pytest.approx(d[1800])


def test_full_precision_round_trip(tmp_path):
    x = 0.1 + 0.2
    assert float(fmt(x)) == x
    assert fmt(None) == "" and fmt(True) == "1" and fmt(np.int64(3)) == "3"
    v, stats = np.array([1.0 / 3, 2.0 / 3, 7.0]), None
    emit_duration_cdf(v, tmp_path / "c.csv", tmp_path / "s.json")
    rows = read(tmp_path / "c.csv")
    assert rows[0] == ["duration", "cdf"]
    assert [float(r[0]) for r in rows[1:]] == v.tolist()


def test_class_summary_columns(tmp_path):
    steps = [StepRecord(0, 10.0, None, None, None, None, "", "none", "median(10)", 0.0, 1),
             StepRecord(1, 10.0, 10.0, 0.0, 10.0, 10.0, "", "none", "median(10)", 0.0, 2)]
    emit_class_summary(ClassResult("k", steps), tmp_path / "a.csv", tmp_path / "h.csv")
    rows = read(tmp_path / "a.csv")
    assert tuple(rows[0][:8]) == ("step", "actual", "forecast", "pct_error", "smoothed",
                                  "flags", "event", "active_model")
    assert tuple(rows[0]) == CLASS_COLUMNS
    assert rows[1][2] == "" and float(rows[2][3]) == 0.0
    assert read(tmp_path / "h.csv")[0] == ["bin_lo", "bin_hi", "count"]


def test_json_is_sorted_and_nan_free(tmp_path):
    write_json(tmp_path / "x.json", {"b": float("nan"), "a": np.float64(1.5)})
    assert (tmp_path / "x.json").read_text() == '{\n  "a": 1.5,\n  "b": null\n}\n'


def test_poly_replay_flags_cluster_at_level_shift():
    windows, background = [], []
    for seed in range(10):
        spec = ClassGenSpec(base_level=500, sigma_log=0.15, n_jobs=1000, seed=seed)
        y = inject_mode_change([d for _, d in gen_class_series(spec)], 500, 3.0)
        res = replay_series(y, ExpertEnsemble([PolyTrendForecaster(3, 10)]))
        flagged = np.array([bool(s.kinds) for s in res.steps])
        assert flagged[500]
        windows.append(flagged[500:510].sum())
        background.append(np.r_[flagged[:490], flagged[520:]].mean() * 10)
    assert np.mean(windows) >= 2 * np.mean(background)
