"""Box-Jenkins AR / MA / ARMA / ARIMA(p, d<=1, q) models.

Estimation is closed form: Yule-Walker for pure AR and the Hannan-Rissanen
two-stage regression for mixed models. MA terms use the ``+theta``
convention::

    w_t = c + sum_i phi_i w_{t-i} + e_t + sum_j theta_j e_{t-j}

where ``w`` is the series differenced ``d`` times.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .._validation import check_confidence, check_int, check_series
from ..exceptions import (
    FitFailedError,
    FitRejectedError,
    NeedMoreDataError,
    SelectionFailedError,
)
from .base import Forecast, OnlineForecaster, z_value

MAX_P = 5
MAX_D = 1
MAX_Q = 5
# Roots must clear the unit circle by this much; near-unit MA roots turn the
# residual recursion into an integrator that amplifies intercept error.
_ROOT_MARGIN = 0.02


def autocovariance(x, nlags: int) -> np.ndarray:
    """Biased sample autocovariances ``c_0..c_nlags`` of the demeaned series."""
    x = np.asarray(x, dtype=float)
    x = x - x.mean()
    n = len(x)
    return np.array([x[: n - k] @ x[k:] / n for k in range(nlags + 1)])


def levinson_durbin(acov, order: int) -> tuple[np.ndarray, float]:
    """Solve the Toeplitz Yule-Walker system by the Levinson-Durbin recursion.

    Returns the AR coefficients and the final prediction error variance.
    """
    c = np.asarray(acov, dtype=float)
    phi = np.zeros(0)
    err = c[0]
    for k in range(1, order + 1):
        if err <= 0:
            raise FitFailedError("autocovariance matrix is singular")
        refl = (c[k] - phi @ c[1:k][::-1]) / err if k > 1 else c[1] / err
        phi = np.concatenate([phi - refl * phi[::-1], [refl]])
        err *= 1.0 - refl * refl
    return phi, err


def _yule_walker(x: np.ndarray, p: int) -> tuple[np.ndarray, float]:
    c = autocovariance(x, p)
    scale = float(np.mean(np.asarray(x, dtype=float) ** 2))
    if c[0] <= 1e-24 * max(scale, np.finfo(float).tiny):
        raise FitFailedError("series is constant; autocovariance matrix is singular")
    phi, _ = levinson_durbin(c, p)
    r = c[1:] / c[0]
    sigma2 = float(c[0] * (1.0 - phi @ r))
    if not np.all(np.isfinite(phi)) or sigma2 <= 0:
        raise FitFailedError("autocovariance matrix is singular")
    return phi, sigma2


def fit_ar_yule_walker(series, p: int) -> tuple[np.ndarray, float]:
    """AR(p) coefficients and innovation variance from sample autocovariances.

    The series is demeaned internally. At least ``10 * p`` observations are
    required.
    """
    p = check_int(p, "p", low=1)
    x = check_series(series, name="series")
    if len(x) < 10 * p:
        raise NeedMoreDataError(f"AR({p}) needs {10 * p} observations, got {len(x)}")
    return _yule_walker(x, p)


def ar_is_stationary(phi) -> bool:
    return _roots_outside(np.concatenate([[1.0], -np.asarray(phi, dtype=float)]))


def ma_is_invertible(theta) -> bool:
    return _roots_outside(np.concatenate([[1.0], np.asarray(theta, dtype=float)]))


def _roots_outside(poly_ascending: np.ndarray) -> bool:
    coeffs = np.trim_zeros(poly_ascending, "b")
    if len(coeffs) <= 1:
        return True
    roots = np.roots(coeffs[::-1])
    return bool(np.all(np.abs(roots) > 1.0 + _ROOT_MARGIN))


@dataclass
class ARMAModel:
    """Fitted ARIMA state with primed history and residual buffers."""

    p: int
    d: int
    q: int
    phi: np.ndarray
    theta: np.ndarray
    intercept: float
    sigma2: float
    history: deque = field(default_factory=deque)  # last p+d raw values
    residuals: deque = field(default_factory=deque)  # last q innovations
    nobs: int = 0
    aic: float = math.nan

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=float).reshape(-1)
        self.theta = np.asarray(self.theta, dtype=float).reshape(-1)
        if len(self.phi) != self.p or len(self.theta) != self.q:
            raise ValueError("phi/theta lengths must equal p/q")
        if self.p + self.q < 1 and self.d < 1:
            raise ValueError("model needs p + q >= 1 or d >= 1")
        if self.sigma2 < 0:
            raise ValueError("sigma2 must be >= 0")
        self.history = deque(self.history, maxlen=max(self.p + self.d, 1))
        self.residuals = deque(self.residuals, maxlen=max(self.q, 1))

    @property
    def order(self) -> tuple[int, int, int]:
        return (self.p, self.d, self.q)

    def _diff_history(self) -> list[float]:
        h = list(self.history)
        if self.d:
            return [b - a for a, b in zip(h[:-1], h[1:])]
        return h

    def _next_w(self, w_hist, e_hist) -> float:
        val = self.intercept
        for i in range(1, self.p + 1):
            val += self.phi[i - 1] * w_hist[-i]
        for j in range(1, self.q + 1):
            val += self.theta[j - 1] * e_hist[-j]
        return val

    def update(self, obs: float) -> float:
        """Absorb a new raw observation; returns its one-step innovation."""
        w_hist = self._diff_history()
        e_hist = list(self.residuals) if self.q else []
        if len(w_hist) < self.p or len(e_hist) < self.q or (self.d and not self.history):
            innovation = 0.0
        else:
            w_hat = self._next_w(w_hist, e_hist)
            w = obs - self.history[-1] if self.d else obs
            innovation = w - w_hat
        self.history.append(float(obs))
        if self.q:
            self.residuals.append(innovation)
        return innovation

    def psi_weights(self, n: int) -> np.ndarray:
        """MA(infinity) weights of the (integrated) process, ``psi_0 = 1``."""
        psi = np.zeros(n)
        psi[0] = 1.0
        for j in range(1, n):
            v = self.theta[j - 1] if j <= self.q else 0.0
            for i in range(1, min(j, self.p) + 1):
                v += self.phi[i - 1] * psi[j - i]
            psi[j] = v
        if self.d:
            psi = np.cumsum(psi)
        return psi

    def to_dict(self) -> dict:
        return {"kind": "arma", "p": self.p, "d": self.d, "q": self.q,
                "phi": [float(v) for v in self.phi],
                "theta": [float(v) for v in self.theta],
                "intercept": float(self.intercept), "sigma2": float(self.sigma2),
                "history": list(self.history),
                "residuals": list(self.residuals) if self.q else []}

    @classmethod
    def from_dict(cls, d: dict) -> "ARMAModel":
        return cls(d["p"], d["d"], d["q"], d["phi"], d["theta"], d["intercept"],
                   d["sigma2"], deque(d.get("history", [])), deque(d.get("residuals", [])))


def _residual_proxies(x: np.ndarray) -> np.ndarray:
    """Long-AR innovations used as stand-ins for the unobserved MA errors.

    Entries before the long AR order are NaN.
    """
    n = len(x)
    m = max(1, math.ceil(min(n / 10.0, 20)))
    a, _ = _yule_walker(x, m)
    xc = x - x.mean()
    e = np.full(n, np.nan)
    # e_t = xc_t - sum_k a_k xc_{t-k}
    pred = np.zeros(n - m)
    for k in range(1, m + 1):
        pred += a[k - 1] * xc[m - k: n - k]
    e[m:] = xc[m:] - pred
    return e


def _prime_residuals(x: np.ndarray, phi, theta, intercept) -> np.ndarray:
    """Innovations of the fitted model over ``x`` with zero pre-sample errors."""
    p, q = len(phi), len(theta)
    n = len(x)
    u = x[p:] - intercept
    for i in range(1, p + 1):
        u = u - phi[i - 1] * x[p - i: n - i]
    if q == 0:
        return u
    return lfilter([1.0], np.concatenate([[1.0], theta]), u)


def fit_arma(series, p: int, d: int, q: int, *, _proxies=None, _prime=True) -> ARMAModel:
    """Fit ARIMA(p, d, q) by Hannan-Rissanen two-stage least squares.

    Raises
    ------
    NeedMoreDataError
        Fewer than ``max(30, 10 * (p + q))`` points after differencing.
    FitFailedError
        Singular regression or degenerate (constant) series.
    FitRejectedError
        Non-stationary AR part or non-invertible MA part.
    """
    p = check_int(p, "p", low=0, high=MAX_P)
    d = check_int(d, "d", low=0, high=MAX_D)
    q = check_int(q, "q", low=0, high=MAX_Q)
    if p + q < 1 and d < 1:
        raise ValueError("need p + q >= 1 or d >= 1")
    y = check_series(series, name="series")
    x = np.diff(y, n=d) if d else y
    n = len(x)
    need = max(30, 10 * (p + q))
    if n < need:
        raise NeedMoreDataError(f"ARIMA({p},{d},{q}) needs {need} points after differencing, got {n}")
    scale = float(np.mean(x * x)) or 1.0

    if p + q == 0:
        # pure random walk: no drift, forecast equals the last value
        sigma2 = float(np.mean(x * x))
        if sigma2 <= 0:
            raise FitFailedError("differenced series is identically zero")
        model = ARMAModel(0, d, 0, [], [], 0.0, sigma2,
                          deque(y[-(p + d):].tolist() if p + d else []), deque(), nobs=n)
        model.aic = n * math.log(sigma2) + 2 * (p + q + 1)
        return model

    if q:
        e = _residual_proxies(x) if _proxies is None else _proxies
        first = int(np.argmax(~np.isnan(e)))
        start = max(p, first + q)
    else:
        e = None
        start = p
    rows = n - start
    if rows <= 1 + p + q:
        raise NeedMoreDataError("too few regression rows")
    cols = [np.ones(rows)]
    cols += [x[start - i: n - i] for i in range(1, p + 1)]
    cols += [e[start - j: n - j] for j in range(1, q + 1)]
    X = np.column_stack(cols)
    target = x[start:]
    beta, _, rank, sv = np.linalg.lstsq(X, target, rcond=None)
    if rank < X.shape[1] or sv[-1] <= 1e-10 * sv[0]:
        raise FitFailedError("regression design is singular")
    resid = target - X @ beta
    sigma2 = float(resid @ resid / rows)
    if sigma2 <= 1e-24 * scale:
        raise FitFailedError("zero residual variance")
    intercept = float(beta[0])
    phi = beta[1: 1 + p]
    theta = beta[1 + p:]
    if not ar_is_stationary(phi):
        raise FitRejectedError(f"ARIMA({p},{d},{q}) estimate is not stationary: phi={phi}")
    if not ma_is_invertible(theta):
        raise FitRejectedError(f"ARIMA({p},{d},{q}) estimate is not invertible: theta={theta}")

    model = ARMAModel(p, d, q, phi, theta, intercept, sigma2, nobs=n)
    model.aic = n * math.log(sigma2) + 2 * (p + q + 1)
    if _prime:
        _prime_model(model, y, x)
    return model


def _prime_model(model: ARMAModel, y: np.ndarray, x: np.ndarray) -> None:
    k = model.p + model.d
    model.history.clear()
    model.history.extend(y[-k:].tolist() if k else [])
    model.residuals.clear()
    if model.q:
        e = _prime_residuals(x, model.phi, model.theta, model.intercept)
        tail = e[-model.q:].tolist()
        model.residuals.extend([0.0] * (model.q - len(tail)) + tail)


def _order_sort_key(order, aic):
    p, d, q = order
    return (aic, p + q, d, p)


def select_order_with_model(series, max_p=MAX_P, max_d=MAX_D, max_q=MAX_Q,
                            ) -> tuple[tuple[int, int, int], ARMAModel]:
    """Exhaustive AIC search over the (p, d, q) grid.

    Members that fail to fit are skipped. Ties go to fewer parameters, then
    smaller ``d``, then smaller ``p``.
    """
    y = check_series(series, name="series")
    best = None
    for d in range(max_d + 1):
        x = np.diff(y, n=d) if d else y
        proxies = None
        if max_q and len(x) >= 30:
            try:
                proxies = _residual_proxies(x)
            except FitFailedError:
                proxies = None
        for p in range(max_p + 1):
            for q in range(max_q + 1):
                if p + q == 0 and d == 0:
                    continue
                if q and proxies is None:
                    continue
                try:
                    m = fit_arma(y, p, d, q, _proxies=proxies, _prime=False)
                except (NeedMoreDataError, FitFailedError, FitRejectedError):
                    continue
                key = _order_sort_key((p, d, q), m.aic)
                if best is None or key < best[0]:
                    best = (key, m, x)
    if best is None:
        raise SelectionFailedError("no (p, d, q) grid member could be fitted")
    _, model, x = best
    _prime_model(model, y, x)
    return model.order, model


def select_order(series, max_p=MAX_P, max_d=MAX_D, max_q=MAX_Q) -> tuple[int, int, int]:
    """Return the AIC-minimising ``(p, d, q)``."""
    return select_order_with_model(series, max_p, max_d, max_q)[0]


def forecast_arma(m: ARMAModel, h: int = 1, confidence: float = 0.9,
                  max_horizon: int | None = None) -> Forecast:
    """h-step forecast with future innovations set to zero.

    The interval half-width is ``z * sqrt(sigma2 * sum(psi_j^2, j < h))``.
    When ``max_horizon`` is given and exceeded the horizon is clamped and the
    returned forecast carries ``clamped=True``.
    """
    h = check_int(h, "h", low=1)
    check_confidence(confidence)
    clamped = False
    if max_horizon is not None and h > max_horizon:
        h, clamped = max_horizon, True
    w_hist = m._diff_history()
    e_hist = list(m.residuals) if m.q else []
    if len(w_hist) < m.p or len(e_hist) < m.q or (m.d and not m.history):
        raise ValueError("model buffers are not primed")
    w_ext, e_ext = list(w_hist), list(e_hist)
    total = 0.0
    w_hat = 0.0
    for _ in range(h):
        w_hat = m._next_w(w_ext, e_ext)
        w_ext.append(w_hat)
        e_ext.append(0.0)
        total += w_hat
    point = m.history[-1] + total if m.d else w_hat
    psi = m.psi_weights(h)
    se = math.sqrt(m.sigma2 * float(psi @ psi))
    return Forecast.gaussian(point, se, h, confidence, clamped)


class ARMAForecaster(OnlineForecaster):
    """Online ARIMA forecaster with periodic refits.

    Parameters
    ----------
    order : tuple of int or "auto"
        Fixed ``(p, d, q)`` or ``"auto"`` to pick it by AIC at every refit.
    refit_every : int
        Observations between refits. Between refits only the history and
        residual buffers move.
    max_history : int
        Number of most recent observations used at each refit.
    """

    def __init__(self, order="auto", refit_every=50, max_history=500,
                 max_p=MAX_P, max_d=MAX_D, max_q=MAX_Q, max_horizon=None):
        self.order = order
        self.refit_every = refit_every
        self.max_history = max_history
        self.max_p = max_p
        self.max_d = max_d
        self.max_q = max_q
        self.max_horizon = max_horizon

    def _reset(self):
        super()._reset()
        self.history_ = deque(maxlen=self.max_history)
        self.model_ = None
        self.since_fit_ = 0
        self.fit_attempts_ = 0
        self.last_fit_ok_ = True

    @property
    def min_observations(self):
        return 1

    @property
    def is_ready(self):
        return getattr(self, "model_", None) is not None

    def _min_needed(self) -> int:
        if self.order == "auto":
            return 30 + 1
        p, d, q = self.order
        return max(30, 10 * (p + q)) + d

    def _fit(self, y):
        if self.order == "auto":
            return select_order_with_model(y, self.max_p, self.max_d, self.max_q)[1]
        return fit_arma(y, *self.order)

    def _refit(self):
        """Fit the full history, then ever shorter recent suffixes.

        A level shift inside the history often makes the full-window fit
        non-stationary; the post-shift tail alone usually fits.
        """
        self.fit_attempts_ += 1
        y = np.asarray(self.history_)
        n = len(y)
        while n >= self._min_needed():
            try:
                self.model_ = self._fit(y[-n:])
                self.last_fit_ok_ = True
                return True
            except (NeedMoreDataError, FitFailedError, FitRejectedError, SelectionFailedError):
                n //= 2
        self.last_fit_ok_ = False
        return False

    def _update(self, obs):
        self.history_.append(obs)
        if self.model_ is not None:
            self.model_.update(obs)
        self.since_fit_ += 1
        due = self.since_fit_ >= self.refit_every
        if self.model_ is None or not self.last_fit_ok_:
            # retry quickly after a failed fit, but not every step
            due = len(self.history_) >= self._min_needed() and (
                self.fit_attempts_ == 0 or self.since_fit_ >= max(1, self.refit_every // 5))
        if due:
            self._refit()
            self.since_fit_ = 0

    def _forecast(self, horizon, confidence):
        return forecast_arma(self.model_, horizon, confidence, self.max_horizon)

    def to_dict(self):
        if self.model_ is None:
            return {"kind": "arma", "order": self.order}
        return self.model_.to_dict()

    @property
    def label(self):
        if self.order == "auto":
            return "arma(auto)"
        return "arma({},{},{})".format(*self.order)
