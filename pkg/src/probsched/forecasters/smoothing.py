"""Simple and Holt (linear trend) exponential smoothing."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .._validation import check_open_unit
from .base import Forecast, OnlineForecaster


@dataclass(frozen=True)
class SmoothingModel:
    kind: str  # "ses" or "holt"
    alpha: float
    beta: float = 0.0
    level: float = 0.0
    trend: float = 0.0
    sse: float = 0.0
    n_errors: int = 0

    def __post_init__(self):
        if self.kind not in ("ses", "holt"):
            raise ValueError(f"kind must be 'ses' or 'holt', got {self.kind!r}")
        check_open_unit(self.alpha, "alpha")
        if self.kind == "holt":
            check_open_unit(self.beta, "beta")

    @property
    def residual_rms(self) -> float:
        return math.sqrt(self.sse / self.n_errors) if self.n_errors else 0.0

    def point(self, horizon: int = 1) -> float:
        if self.kind == "ses":
            return self.level
        return self.level + horizon * self.trend

    def std_error(self, horizon: int = 1) -> float:
        s2 = 1.0
        for j in range(1, horizon):
            c = self.alpha if self.kind == "ses" else self.alpha * (1.0 + j * self.beta)
            s2 += c * c
        return self.residual_rms * math.sqrt(s2)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "alpha": self.alpha, "beta": self.beta,
                "level": self.level, "trend": self.trend,
                "residual_rms": self.residual_rms}


def smoothing_update(m: SmoothingModel, obs: float) -> SmoothingModel:
    err = obs - m.point(1)
    a = m.alpha
    if m.kind == "ses":
        level = a * obs + (1.0 - a) * m.level
        trend = m.trend
    else:
        level = a * obs + (1.0 - a) * (m.level + m.trend)
        trend = m.beta * (level - m.level) + (1.0 - m.beta) * m.trend
    return replace(m, level=level, trend=trend, sse=m.sse + err * err,
                   n_errors=m.n_errors + 1)


class ExpSmoothingForecaster(OnlineForecaster):
    """Exponential smoothing, optionally with Holt's additive trend.

    The first observation initialises the level; the trend starts at zero.
    """

    def __init__(self, kind="holt", alpha=0.3, beta=0.1):
        self.kind = kind
        self.alpha = alpha
        self.beta = beta

    def _reset(self):
        super()._reset()
        self.model_ = None

    def _update(self, obs):
        if self.model_ is None:
            self.model_ = SmoothingModel(self.kind, self.alpha,
                                         self.beta if self.kind == "holt" else 0.0,
                                         level=obs)
        else:
            self.model_ = smoothing_update(self.model_, obs)

    def _forecast(self, horizon, confidence):
        m = self.model_
        return Forecast.gaussian(m.point(horizon), m.std_error(horizon), horizon, confidence)

    def to_dict(self):
        if self.model_ is None:
            return {"kind": self.kind, "alpha": self.alpha, "beta": self.beta}
        return self.model_.to_dict()

    @property
    def label(self):
        return "holt" if self.kind == "holt" else "ses"
