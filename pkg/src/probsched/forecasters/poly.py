"""Sliding-window polynomial trend extrapolation."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .._validation import check_int
from ..exceptions import FitFailedError
from .base import Forecast, OnlineForecaster


@dataclass
class PolyTrendModel:
    order: int
    window: int
    coefficients: np.ndarray  # ascending powers
    residual_rms: float
    x: np.ndarray
    dof_sigma: float  # sqrt(SSR / (n - k)), 0 when the fit interpolates
    _r_inv: np.ndarray

    def predict(self, x0: float) -> float:
        return float(np.polynomial.polynomial.polyval(x0, self.coefficients))

    def std_error(self, x0: float) -> float:
        """Standard error of a new observation at ``x0``."""
        v = np.vander(np.atleast_1d(float(x0)), self.order + 1, increasing=True)[0]
        # (X'X)^-1 = R^-1 R^-T
        t = v @ self._r_inv
        return float(self.dof_sigma * np.sqrt(1.0 + t @ t))

    def to_dict(self) -> dict:
        return {"kind": "poly", "order": self.order, "window": self.window,
                "coefficients": [float(c) for c in self.coefficients],
                "residual_rms": self.residual_rms}


def fit_poly_trend(window_points, order: int) -> PolyTrendModel:
    """Least-squares polynomial of degree ``order`` through ``(index, value)`` pairs.

    Raises
    ------
    FitFailedError
        When the design matrix is rank deficient (too few or repeated indices).
    """
    order = check_int(order, "order", low=0)
    pts = np.asarray(window_points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("window_points must be a sequence of (index, value) pairs")
    x, y = pts[:, 0], pts[:, 1]
    k = order + 1
    if len(x) < k:
        raise FitFailedError(f"order {order} needs {k} points, got {len(x)}")
    if np.any(np.diff(x) <= 0):
        raise FitFailedError("indices must be strictly increasing")
    X = np.vander(x, k, increasing=True)
    q, r = np.linalg.qr(X)
    diag = np.abs(np.diag(r))
    if diag.min() <= 1e-12 * max(diag.max(), 1.0):
        raise FitFailedError("singular normal equations")
    coef = np.linalg.solve(r, q.T @ y)
    resid = y - X @ coef
    ssr = float(resid @ resid)
    n = len(x)
    dof_sigma = float(np.sqrt(ssr / (n - k))) if n > k else 0.0
    return PolyTrendModel(order, n, coef, float(np.sqrt(ssr / n)), x, dof_sigma,
                          np.linalg.inv(r))


class PolyTrendForecaster(OnlineForecaster):
    """Refit a degree-``order`` polynomial to the last ``window`` points each step.

    Indices are local to the window (0..window-1) which keeps the Vandermonde
    design well conditioned regardless of how long the stream runs.
    """

    def __init__(self, order=3, window=10):
        self.order = order
        self.window = window

    @property
    def min_observations(self):
        return self.window

    def _reset(self):
        super()._reset()
        if self.window < self.order + 1:
            raise ValueError("window must be at least order + 1")
        self.buffer_ = deque(maxlen=self.window)
        self.model_ = None

    def _update(self, obs):
        self.buffer_.append(obs)
        self.model_ = None

    def _fit_window(self) -> PolyTrendModel:
        if self.model_ is None:
            pts = np.column_stack([np.arange(len(self.buffer_)), np.asarray(self.buffer_)])
            self.model_ = fit_poly_trend(pts, self.order)
        return self.model_

    def _forecast(self, horizon, confidence):
        m = self._fit_window()
        x0 = len(self.buffer_) - 1 + horizon
        return Forecast.gaussian(m.predict(x0), m.std_error(x0), horizon, confidence)

    def to_dict(self):
        d = {"kind": "poly", "order": self.order, "window": self.window}
        if self.is_ready:
            m = self._fit_window()
            d.update(coefficients=[float(c) for c in m.coefficients],
                     residual_rms=m.residual_rms)
        return d

    @property
    def label(self):
        return f"poly({self.order},{self.window})"
