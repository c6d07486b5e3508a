from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm
from sklearn.base import BaseEstimator

from .._validation import check_confidence, check_int, check_series


@dataclass(frozen=True)
class Forecast:
    """Point forecast with a symmetric Gaussian interval."""

    point: float
    std_error: float
    lo: float
    hi: float
    horizon: int = 1
    confidence: float = 0.9
    clamped: bool = False

    @property
    def interval(self) -> tuple[float, float]:
        return (self.lo, self.hi)

    @classmethod
    def gaussian(cls, point, std_error, horizon=1, confidence=0.9, clamped=False):
        std_error = max(float(std_error), 0.0)
        half = z_value(confidence) * std_error
        return cls(float(point), std_error, float(point) - half, float(point) + half,
                   int(horizon), float(confidence), clamped)

    def map(self, func) -> "Forecast":
        """Apply a monotone increasing transform to point and bounds."""
        lo, point, hi = func(self.lo), func(self.point), func(self.hi)
        # delta-method spread on the transformed scale
        spread = (hi - lo) / (2.0 * z_value(self.confidence)) if self.std_error > 0 else 0.0
        return Forecast(float(point), float(spread), float(lo), float(hi),
                        self.horizon, self.confidence, self.clamped)


def z_value(confidence: float) -> float:
    """Two-sided standard normal quantile for ``confidence``."""
    return float(norm.ppf(0.5 + 0.5 * check_confidence(confidence)))


class OnlineForecaster(BaseEstimator):
    """Base class for one-step-ahead forecasters fed one observation at a time.

    Subclasses implement ``_reset``, ``_update`` and ``_forecast``. ``fit``
    replays a whole series through ``update`` so that batch and streaming use
    share one code path.
    """

    #: smallest number of observations before ``forecast`` returns a value
    min_observations = 1

    def fit(self, y, X=None):
        y = check_series(y, name="y")
        self._reset()
        for value in y:
            self.update(value)
        return self

    def update(self, obs: float):
        if not hasattr(self, "n_obs_"):
            self._reset()
        self._update(float(obs))
        self.n_obs_ += 1
        return self

    def _reset(self):
        self.n_obs_ = 0

    @property
    def is_ready(self) -> bool:
        return getattr(self, "n_obs_", 0) >= self.min_observations

    def forecast(self, horizon: int = 1, confidence: float = 0.9) -> Forecast | None:
        """Forecast ``horizon`` steps ahead; ``None`` while warming up."""
        horizon = check_int(horizon, "horizon", low=1)
        if not self.is_ready:
            return None
        return self._forecast(horizon, confidence)

    def predict(self, horizon: int = 1) -> np.ndarray:
        """Point forecasts for steps ``1..horizon``."""
        out = []
        for h in range(1, horizon + 1):
            fc = self.forecast(h)
            out.append(np.nan if fc is None else fc.point)
        return np.asarray(out)

    def _forecast(self, horizon: int, confidence: float) -> Forecast | None:
        raise NotImplementedError

    def _update(self, obs: float) -> None:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    @property
    def label(self) -> str:
        return type(self).__name__
