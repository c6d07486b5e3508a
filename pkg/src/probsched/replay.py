"""One-step-ahead replay of a job class through ensemble and detector."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import clone

from .anomaly import MODE_CHANGE, NONE, AnomalyDetector, percentage_error
from .ensemble import ExpertEnsemble
from .scheduler import safety_margin


@dataclass
class StepRecord:
    step: int
    actual: float
    forecast: float | None
    pct_error: float | None
    reference: float | None
    smoothed: float | None
    kinds: str
    event: str
    active_model: str
    ewma_active: float
    horizon: int
    switched: bool = False


@dataclass
class ClassResult:
    key: str
    steps: list[StepRecord] = field(default_factory=list)

    @property
    def pct_errors(self) -> np.ndarray:
        return np.array([s.pct_error for s in self.steps if s.pct_error is not None])

    @property
    def mode_change_steps(self) -> list[int]:
        return [s.step for s in self.steps if s.event == MODE_CHANGE]

    @property
    def switch_steps(self) -> list[int]:
        return [s.step for s in self.steps if s.switched]

    def summary(self) -> dict:
        e = self.pct_errors
        return {
            "class": self.key,
            "n_obs": len(self.steps),
            "n_forecasts": int(e.size),
            "mean_pct_error": float(e.mean()) if e.size else float("nan"),
            "mean_abs_pct_error": float(np.abs(e).mean()) if e.size else float("nan"),
            "var_pct_error": float(e.var()) if e.size else float("nan"),
            "n_flagged": sum(1 for s in self.steps if s.kinds),
            "n_mode_change": len(self.mode_change_steps),
            "n_switches": len(self.switch_steps),
        }


class ClassReplayer:
    """Feedback loop for one class: forecast, observe, flag, advance.

    ``margin_errors`` keeps the recent ``|actual - forecast| / forecast``
    ratios of the active forecasts, the quantity a deadline budget has to
    cover.
    """

    def __init__(self, ensemble: ExpertEnsemble | None = None,
                 detector: AnomalyDetector | None = None, key: str = "",
                 margin_window: int = 100, min_forecast: float = 1.0,
                 min_margin_samples: int = 10):
        self.ensemble = clone(ensemble) if ensemble is not None else ExpertEnsemble()
        self.ensemble.reset()
        self.detector = clone(detector) if detector is not None else AnomalyDetector()
        self.detector.reset()
        self.result = ClassResult(key)
        self.margin_errors = deque(maxlen=margin_window)
        self.min_forecast = min_forecast
        self.min_margin_samples = min_margin_samples

    @property
    def next_forecast(self):
        return self.ensemble.forecast_

    def admission_budget(self, confidence: float):
        """``(forecast_point, margin)`` for a deadline request, or None while cold.

        The margin is the nearest-rank quantile of recent budget errors; while
        the horizon is shrunk after a mode change it is scaled up by the ratio
        of requested to effective confidence.
        """
        fc = self.ensemble.forecast_
        if fc is None or len(self.margin_errors) < self.min_margin_samples:
            return None
        margin = safety_margin(self.margin_errors, confidence)
        report = self.ensemble.effective_confidence(confidence)
        if report.degraded:
            margin *= confidence / report.level
        return fc.point, margin

    def observe(self, duration: float) -> None:
        self.step(duration)

    def step(self, actual: float) -> StepRecord:
        fc = self.ensemble.forecast_
        label = self.ensemble.active_label
        # adaptive models absorb a level shift within a step or two, so the
        # sustained-error test runs against the slow reference model
        ref = self.ensemble.reference_forecast_
        flag, smoothed = self.detector.step(actual, ref)
        pct = None
        if fc is not None:
            pct = percentage_error(fc.point, actual)
            budget_base = max(self.min_forecast, fc.point)
            self.margin_errors.append(abs(actual - budget_base) / budget_base)
        n_switches = len(self.ensemble.switches_)
        self.ensemble.advance(actual, flag)
        rec = StepRecord(
            step=len(self.result.steps),
            actual=float(actual),
            forecast=None if fc is None else fc.point,
            pct_error=pct,
            reference=None if ref is None else ref.point,
            smoothed=smoothed,
            kinds=flag.kinds_text,
            event=flag.event if flag.kinds else NONE,
            active_model=label,
            ewma_active=self.ensemble.active_score.ewma_abs_pct_error,
            horizon=self.ensemble.horizon_,
            switched=len(self.ensemble.switches_) > n_switches,
        )
        self.result.steps.append(rec)
        return rec


def replay_series(durations, ensemble: ExpertEnsemble | None = None,
                  detector: AnomalyDetector | None = None, key: str = "") -> ClassResult:
    r = ClassReplayer(ensemble, detector, key)
    for d in durations:
        r.step(float(d))
    return r.result
