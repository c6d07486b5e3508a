"""Execution-time forecasting and probabilistic deadline scheduling for batch cluster traces."""

from .anomaly import AnomalyDetector, AnomalyFlag, LowessConfig, LowessSmoother, Thresholds, lowess_smooth
from .classing import ClassKey, ClassKeySpec, JobClass, make_class_key, partition
from .ensemble import ConfidenceReport, ExpertEnsemble, ModelScore, score_update
from .forecasters import (
    ARMAForecaster,
    BaselineForecaster,
    ExpSmoothingForecaster,
    Forecast,
    PolyTrendForecaster,
    fit_ar_yule_walker,
    fit_arma,
    forecast_arma,
    select_order,
)
from .pipeline import PipelineConfig, run_pipeline
from .replay import ClassReplayer, ClassResult, replay_series
from .scheduler import ClusterSpec, Decision, JobRequest, SimReport, admit, dispatch, run_simulation, safety_margin
from .synth import ClassGenSpec, WorkloadMixSpec, gen_class_series, gen_workload, inject_mode_change
from .trace import JobRecord, TraceLoadOptions, load_trace, parse_accounting_line, read_trace

__version__ = "0.1.0"
