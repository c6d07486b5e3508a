from __future__ import annotations

from collections import deque

import numpy as np

from .._validation import check_series
from .base import Forecast, OnlineForecaster


def baseline_estimate(window, kind: str = "median", confidence: float = 0.9) -> Forecast:
    """Mean or median of ``window`` with the sample standard deviation as spread."""
    w = check_series(window, name="window")
    if kind == "mean":
        point = float(np.mean(w))
    elif kind == "median":
        point = float(np.median(w))
    else:
        raise ValueError(f"kind must be 'mean' or 'median', got {kind!r}")
    std = float(np.std(w, ddof=1)) if len(w) > 1 else 0.0
    return Forecast.gaussian(point, std, 1, confidence)


class BaselineForecaster(OnlineForecaster):
    """Rolling mean or median over the last ``window`` observations."""

    def __init__(self, kind="median", window=10):
        self.kind = kind
        self.window = window

    def _reset(self):
        super()._reset()
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.kind not in ("mean", "median"):
            raise ValueError(f"kind must be 'mean' or 'median', got {self.kind!r}")
        self.buffer_ = deque(maxlen=self.window)

    def _update(self, obs):
        self.buffer_.append(obs)

    def _forecast(self, horizon, confidence):
        fc = baseline_estimate(self.buffer_, self.kind, confidence)
        return Forecast(fc.point, fc.std_error, fc.lo, fc.hi, horizon, fc.confidence)

    def to_dict(self):
        return {"kind": self.kind, "window": self.window}

    @property
    def label(self):
        return f"{self.kind}({self.window})"
