"""Anomaly flagging against forecasts and a Lowess reference curve."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_series
from .forecasters.base import Forecast

PRED_ERROR = "pred_error"
LOWESS_DEV = "lowess_dev"

NONE = "none"
TRANSIENT = "transient"
MODE_CHANGE = "mode_change_candidate"


@dataclass(frozen=True)
class Thresholds:
    err_threshold: float = 0.50
    lowess_dev_threshold: float = 0.25
    sustain_m: int = 4
    sustain_n: int = 6

    def __post_init__(self):
        if self.err_threshold <= 0 or self.lowess_dev_threshold <= 0:
            raise ValueError("thresholds must be positive")
        if not 1 <= self.sustain_m <= self.sustain_n:
            raise ValueError("need 1 <= sustain_m <= sustain_n")


@dataclass(frozen=True)
class LowessConfig:
    fraction: float = 0.3
    robustness_iters: int = 2
    degree: int = 1

    def __post_init__(self):
        if not 0.0 < self.fraction <= 1.0:
            raise ValueError("fraction must lie in (0, 1]")
        if self.robustness_iters < 0:
            raise ValueError("robustness_iters must be >= 0")
        if self.degree not in (0, 1):
            raise ValueError("degree must be 0 or 1")


@dataclass
class AnomalyFlag:
    index: int
    kinds: frozenset = field(default_factory=frozenset)
    event: str = NONE

    def __post_init__(self):
        self.kinds = frozenset(self.kinds)
        if self.event != NONE and not self.kinds:
            raise ValueError("an event needs at least one flag kind")

    @property
    def kinds_text(self) -> str:
        return ";".join(sorted(self.kinds))


def _tricube(u):
    u = np.clip(np.abs(u), 0.0, 1.0)
    return (1.0 - u ** 3) ** 3


def _local_fit(x, y, weights, degree):
    """Weighted local fits evaluated at every x; ``weights[i]`` is row i's kernel.

    Degenerate neighbourhoods fall back to the weighted mean.
    """
    s0 = weights.sum(axis=1)
    sy = weights @ y
    mean = np.divide(sy, s0, out=np.array(y, dtype=float), where=s0 > 0)
    if degree == 0:
        return mean
    sx = weights @ x
    xbar = np.divide(sx, s0, out=np.zeros_like(sx), where=s0 > 0)
    dx = x[None, :] - xbar[:, None]
    sxx = np.einsum("ij,ij->i", weights, dx * dx)
    sxy = np.einsum("ij,ij->i", weights, dx * y[None, :])
    # slope defined only when the weighted x spread is non-negligible
    ok = sxx > 1e-12 * np.maximum(s0, 1e-300)
    slope = np.divide(sxy, sxx, out=np.zeros_like(sxy), where=ok)
    return mean + slope * (x - xbar)


def lowess_smooth(series, cfg: LowessConfig | None = None) -> np.ndarray:
    """Cleveland's robust locally weighted regression on an equally spaced series.

    Each point is fitted from its ``ceil(fraction * n)`` nearest neighbours
    with tricube weights scaled by the distance to the farthest of them.
    ``robustness_iters`` passes re-weight points by the bisquare of their
    residual over six median absolute residuals.
    """
    cfg = cfg or LowessConfig()
    y = check_series(series, name="series", min_length=2)
    n = len(y)
    x = np.arange(n, dtype=float)
    k = min(n, max(int(math.ceil(cfg.fraction * n)), cfg.degree + 2))
    dist = np.abs(x[:, None] - x[None, :])
    # bandwidth: distance to the k-th nearest neighbour (self included)
    h = np.sort(dist, axis=1)[:, k - 1]
    kernel = _tricube(dist / h[:, None])
    robust = np.ones(n)
    fitted = _local_fit(x, y, kernel, cfg.degree)
    # residuals at round-off level would turn the bisquare weights into noise
    floor = 1e-7 * np.mean(np.abs(y))
    for _ in range(cfg.robustness_iters):
        resid = y - fitted
        s = np.median(np.abs(resid))
        if s <= floor:
            break
        robust = _bisquare(resid / (6.0 * s))
        fitted = _local_fit(x, y, kernel * robust[None, :], cfg.degree)
    return fitted


def _bisquare(u):
    u = np.clip(np.abs(u), 0.0, 1.0)
    return (1.0 - u * u) ** 2


class LowessSmoother(TransformerMixin, BaseEstimator):
    """Transformer wrapper: ``transform`` smooths each 1-D input independently."""

    def __init__(self, fraction=0.3, robustness_iters=2, degree=1):
        self.fraction = fraction
        self.robustness_iters = robustness_iters
        self.degree = degree

    def fit(self, X=None, y=None):
        self.config_ = LowessConfig(self.fraction, self.robustness_iters, self.degree)
        return self

    def transform(self, X):
        cfg = getattr(self, "config_", None) or LowessConfig(
            self.fraction, self.robustness_iters, self.degree)
        return lowess_smooth(X, cfg)


def percentage_error(forecast_point: float, actual: float) -> float:
    """Signed ``(forecast - actual) / actual``; raises for non-positive actuals."""
    if not actual > 0:
        raise ValueError(f"percentage error undefined for actual={actual!r}")
    return (forecast_point - actual) / actual


def detect_point(actual: float, forecast: Forecast | float | None, smoothed: float | None,
                 th: Thresholds, index: int = 0) -> AnomalyFlag:
    """Flag one observation; the event is left for :func:`classify_event`."""
    kinds = set()
    if forecast is not None:
        point = forecast.point if isinstance(forecast, Forecast) else float(forecast)
        if abs(percentage_error(point, actual)) > th.err_threshold:
            kinds.add(PRED_ERROR)
    if smoothed is not None and smoothed > 0:
        if abs(actual - smoothed) / smoothed > th.lowess_dev_threshold:
            kinds.add(LOWESS_DEV)
    return AnomalyFlag(index, frozenset(kinds))


def classify_event(recent_flags, th: Thresholds) -> str:
    """Mode change when at least ``sustain_m`` of the last ``sustain_n`` flags
    carry a prediction-error kind, otherwise transient."""
    window = list(recent_flags)[-th.sustain_n:]
    hits = sum(1 for f in window if PRED_ERROR in f.kinds)
    return MODE_CHANGE if hits >= th.sustain_m else TRANSIENT


class AnomalyDetector(BaseEstimator):
    """Streaming detector over one job class.

    Each call to :meth:`step` smooths a trailing window (``lowess_window``
    observations, current one included), flags the observation against the
    forecast made before it and the smoothed value, and classifies the event.
    """

    def __init__(self, err_threshold=0.5, lowess_dev_threshold=0.25, sustain_m=4,
                 sustain_n=6, lowess_fraction=0.3, lowess_robustness_iters=2,
                 lowess_degree=1, lowess_window=50):
        self.err_threshold = err_threshold
        self.lowess_dev_threshold = lowess_dev_threshold
        self.sustain_m = sustain_m
        self.sustain_n = sustain_n
        self.lowess_fraction = lowess_fraction
        self.lowess_robustness_iters = lowess_robustness_iters
        self.lowess_degree = lowess_degree
        self.lowess_window = lowess_window

    @property
    def thresholds(self) -> Thresholds:
        return Thresholds(self.err_threshold, self.lowess_dev_threshold,
                          self.sustain_m, self.sustain_n)

    @property
    def lowess_config(self) -> LowessConfig:
        return LowessConfig(self.lowess_fraction, self.lowess_robustness_iters,
                            self.lowess_degree)

    def reset(self):
        self.window_ = deque(maxlen=self.lowess_window)
        self.recent_ = deque(maxlen=self.sustain_n)
        self.n_seen_ = 0
        self._th = self.thresholds
        self._cfg = self.lowess_config
        return self

    def fit(self, y, forecasts=None):
        """Run the detector over a whole series; returns self with ``flags_``."""
        y = check_series(y, positive=True)
        self.reset()
        self.flags_ = []
        for i, value in enumerate(y):
            fc = None if forecasts is None else forecasts[i]
            flag, _ = self.step(value, fc)
            self.flags_.append(flag)
        return self

    def smoothed_value(self) -> float | None:
        if len(self.window_) < 2:
            return None
        return float(lowess_smooth(np.asarray(self.window_), self._cfg)[-1])

    def step(self, actual: float, forecast) -> tuple[AnomalyFlag, float | None]:
        if not hasattr(self, "window_"):
            self.reset()
        self.window_.append(float(actual))
        smoothed = self.smoothed_value()
        flag = detect_point(actual, forecast, smoothed, self._th, self.n_seen_)
        self.recent_.append(flag)
        if flag.kinds:
            flag.event = classify_event(self.recent_, self._th)
        self.n_seen_ += 1
        return flag, smoothed
