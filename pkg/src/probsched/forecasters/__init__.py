from .arma import (
    ARMAForecaster,
    ARMAModel,
    autocovariance,
    fit_ar_yule_walker,
    fit_arma,
    forecast_arma,
    levinson_durbin,
    select_order,
    select_order_with_model,
)
from .base import Forecast, OnlineForecaster, z_value
from .baseline import BaselineForecaster, baseline_estimate
from .poly import PolyTrendForecaster, PolyTrendModel, fit_poly_trend
from .smoothing import ExpSmoothingForecaster, SmoothingModel, smoothing_update

__all__ = [
    "ARMAForecaster", "ARMAModel", "BaselineForecaster", "ExpSmoothingForecaster",
    "Forecast", "OnlineForecaster", "PolyTrendForecaster", "PolyTrendModel",
    "SmoothingModel", "autocovariance", "baseline_estimate", "fit_ar_yule_walker",
    "fit_arma", "fit_poly_trend", "forecast_arma", "levinson_durbin",
    "select_order", "select_order_with_model", "smoothing_update", "z_value",
]
