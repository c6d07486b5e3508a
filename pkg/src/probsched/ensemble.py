"""Expert selection over concurrently running forecasters.

Every registered model forecasts every step; realised durations score them
with an exponentially weighted absolute percentage error and the lowest
score is exposed as the active model. A mode-change event spawns a
challenger set trained only on post-change data, which replaces the
incumbents once it forecasts better.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from sklearn.base import BaseEstimator, clone

from ._validation import check_confidence, check_series
from .anomaly import MODE_CHANGE, AnomalyFlag, percentage_error
from .forecasters import (
    ARMAForecaster,
    BaselineForecaster,
    ExpSmoothingForecaster,
    Forecast,
    PolyTrendForecaster,
)


@dataclass(frozen=True)
class ModelScore:
    ewma_abs_pct_error: float = 0.0
    n_updates: int = 0
    lam: float = 0.8


def score_update(s: ModelScore, abs_pct_err: float) -> ModelScore:
    if abs_pct_err < 0:
        raise ValueError("abs_pct_err must be >= 0")
    if s.n_updates == 0:
        ewma = abs_pct_err
    else:
        ewma = s.lam * s.ewma_abs_pct_error + (1.0 - s.lam) * abs_pct_err
    return replace(s, ewma_abs_pct_error=ewma, n_updates=s.n_updates + 1)


@dataclass(frozen=True)
class ConfidenceReport:
    level: float
    horizon: int
    degraded: bool


def default_models():
    """Baseline median, cubic trend, Holt and auto-order ARMA, in that order."""
    return [
        BaselineForecaster("median", 10),
        PolyTrendForecaster(3, 10),
        ExpSmoothingForecaster("holt", 0.3, 0.1),
        ARMAForecaster("auto", refit_every=50),
    ]


class _Member:
    __slots__ = ("model", "score", "pending")

    def __init__(self, model, lam):
        self.model = model
        self.score = ModelScore(lam=lam)
        self.pending: Forecast | None = None


class _Challenger:
    def __init__(self, members, spawned_at):
        self.members = members
        self.warmup_count = 0
        self.spawned_at = spawned_at


class ExpertEnsemble(BaseEstimator):
    """Per-class expert system.

    Parameters
    ----------
    models : list of OnlineForecaster, optional
        Unfitted prototypes, cloned on reset and for each challenger set.
        Registration order breaks score ties. Defaults to
        :func:`default_models`.
    lam : float
        EWMA decay for the absolute percentage error score.
    max_horizon : int
        Prediction horizon ceiling; the horizon drops to 1 on a mode change
        and recovers by one step per observation.
    min_warmup : int
        Scored updates before a model is eligible, and observations before a
        challenger may be promoted.
    challenger_timeout : int
        A challenger that has not won after this many observations is
        discarded (the deviation was transient).
    log_transform : bool
        Feed models log-durations and exponentiate their forecasts.
    """

    def __init__(self, models=None, lam=0.8, max_horizon=10, min_warmup=8,
                 challenger_timeout=50, log_transform=False, confidence=0.9):
        self.models = models
        self.lam = lam
        self.max_horizon = max_horizon
        self.min_warmup = min_warmup
        self.challenger_timeout = challenger_timeout
        self.log_transform = log_transform
        self.confidence = confidence

    # -- state -------------------------------------------------------------
    def _prototypes(self):
        return default_models() if self.models is None else list(self.models)

    def _new_members(self):
        return [_Member(clone(m), self.lam) for m in self._prototypes()]

    def _fallback_for(self, members) -> int:
        # the median baseline if registered, else the first model; it doubles
        # as the slow-moving reference that anomaly flags are measured against
        for i, mem in enumerate(members):
            if isinstance(mem.model, BaselineForecaster) and mem.model.kind == "median":
                return i
        return 0

    def reset(self):
        if not 0.0 < self.lam < 1.0:
            raise ValueError("lam must lie in (0, 1)")
        if self.max_horizon < 1:
            raise ValueError("max_horizon must be >= 1")
        self.members_ = self._new_members()
        if not self.members_:
            raise ValueError("at least one model is required")
        self.challenger_ = None
        self.horizon_ = 1
        self.fallback_index_ = self._fallback_for(self.members_)
        self.active_index_ = self.fallback_index_
        self.n_obs_ = 0
        self.switches_ = []
        self.forecast_ = None
        self.reference_forecast_ = None
        return self

    def fit(self, y):
        """Replay ``y`` without anomaly flags."""
        y = check_series(y, positive=True)
        self.reset()
        for v in y:
            self.advance(v)
        return self

    # -- helpers -----------------------------------------------------------
    def _to_model(self, obs):
        return math.log(obs) if self.log_transform else obs

    def _member_forecast(self, mem, horizon=1):
        fc = mem.model.forecast(horizon, self.confidence)
        if fc is None:
            return None
        if self.log_transform:
            fc = fc.map(math.exp)
        return fc

    @staticmethod
    def _score_and_update(mem, obs, z):
        if mem.pending is not None:
            mem.score = score_update(mem.score, abs(percentage_error(mem.pending.point, obs)))
        mem.model.update(z)

    # -- public API ----------------------------------------------------------
    @property
    def active_model(self):
        return self.members_[self.active_index_].model

    @property
    def active_label(self) -> str:
        return self.active_model.label

    @property
    def active_score(self) -> ModelScore:
        return self.members_[self.active_index_].score

    @property
    def scores(self) -> list[tuple[str, ModelScore]]:
        return [(m.model.label, m.score) for m in self.members_]

    def select_active(self) -> int:
        eligible = [i for i, m in enumerate(self.members_)
                    if m.score.n_updates >= self.min_warmup]
        if not eligible:
            return self.fallback_index_
        # min() keeps the first of equal scores, i.e. registration order
        return min(eligible, key=lambda i: self.members_[i].score.ewma_abs_pct_error)

    def advance(self, obs: float, flag: AnomalyFlag | None = None) -> Forecast | None:
        """Feed one realised duration; returns the active next-step forecast."""
        if not hasattr(self, "members_"):
            self.reset()
        obs = float(obs)
        if not obs > 0:
            raise ValueError(f"observations must be positive, got {obs}")
        z = self._to_model(obs)
        for mem in self.members_:
            self._score_and_update(mem, obs, z)
        ch = self.challenger_
        if ch is not None:
            for mem in ch.members:
                self._score_and_update(mem, obs, z)
            ch.warmup_count += 1

        mode_change = flag is not None and flag.event == MODE_CHANGE
        promoted = False
        if mode_change and ch is None:
            ch = self.challenger_ = _Challenger(self._new_members(), self.n_obs_)
            for mem in ch.members:
                mem.model.update(z)
            ch.warmup_count = 1

        if ch is not None and ch.warmup_count >= self.min_warmup:
            scored = [i for i, m in enumerate(ch.members) if m.score.n_updates > 0]
            incumbent = self.members_[self.active_index_].score.ewma_abs_pct_error
            if scored:
                best = min(scored, key=lambda i: ch.members[i].score.ewma_abs_pct_error)
                best_ewma = ch.members[best].score.ewma_abs_pct_error
                if best_ewma < incumbent:
                    assert best_ewma < incumbent
                    promoted = True
                    self.switches_.append((self.n_obs_, incumbent, best_ewma))
                    self.members_ = ch.members
                    self.fallback_index_ = best
                    self.active_index_ = best
                    self.challenger_ = ch = None
            if ch is not None and ch.warmup_count >= self.challenger_timeout:
                self.challenger_ = None

        if mode_change:
            self.horizon_ = 1
        else:
            self.horizon_ = min(self.horizon_ + 1, self.max_horizon)

        if not promoted:
            self.active_index_ = self.select_active()
        for mem in self.members_:
            mem.pending = self._member_forecast(mem)
        if self.challenger_ is not None:
            for mem in self.challenger_.members:
                mem.pending = self._member_forecast(mem)
        self.n_obs_ += 1
        self.forecast_ = self.members_[self.active_index_].pending
        self.reference_forecast_ = self.members_[self._fallback_for(self.members_)].pending
        if self.forecast_ is None:
            # active model still warming up: fall back to any ready model
            fb = self.members_[self._fallback_for(self.members_)].pending
            self.forecast_ = fb if fb is not None else next(
                (m.pending for m in self.members_ if m.pending is not None), None)
        return self.forecast_

    def forecast(self, horizon: int = 1, confidence: float | None = None) -> Forecast | None:
        """Forecast from the active model at an arbitrary horizon."""
        mem = self.members_[self.active_index_]
        if confidence is None:
            return self._member_forecast(mem, horizon)
        fc = mem.model.forecast(horizon, confidence)
        if fc is not None and self.log_transform:
            fc = fc.map(math.exp)
        return fc

    def effective_confidence(self, requested: float) -> ConfidenceReport:
        requested = check_confidence(requested, "requested")
        degraded = self.horizon_ < self.max_horizon
        level = requested * self.horizon_ / self.max_horizon if degraded else requested
        return ConfidenceReport(level, self.horizon_, degraded)

    @property
    def has_challenger(self) -> bool:
        return self.challenger_ is not None
