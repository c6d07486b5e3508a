"""End-to-end orchestration: ingest, classing, per-class replay, simulation, reports."""

from __future__ import annotations

import json
import logging
import re
import statistics
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .anomaly import AnomalyDetector
from .classing import ClassKeySpec, make_class_key, partition
from .ensemble import ExpertEnsemble
from .exceptions import ConfigError, TraceRejectedError
from .forecasters import (
    ARMAForecaster,
    BaselineForecaster,
    ExpSmoothingForecaster,
    PolyTrendForecaster,
)
from .replay import ClassReplayer, ClassResult
from .report import emit_class_summary, emit_decisions, emit_duration_cdf, write_csv, write_json
from .scheduler import ClusterSpec, JobRequest, SimReport, run_simulation
from .synth import WorkloadMixSpec, default_mix, gen_workload, write_workload
from .trace import TraceLoadOptions, read_trace, wallclock_or_none

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_TRACE_REJECTED = 3
EXIT_IO = 4

_MODEL_RE = re.compile(r"^\s*(\w+)\s*\(([^)]*)\)\s*$")


def model_from_spec(text: str):
    """Build a forecaster from its label, e.g. ``poly(3,10)`` or ``arma(auto)``."""
    m = _MODEL_RE.match(text)
    name, args = (m.group(1).lower(), [a.strip() for a in m.group(2).split(",") if a.strip()]) \
        if m else (text.strip().lower(), [])
    try:
        if name in ("median", "mean"):
            return BaselineForecaster(name, *(int(a) for a in args))
        if name == "poly":
            return PolyTrendForecaster(*(int(a) for a in args))
        if name == "holt":
            return ExpSmoothingForecaster("holt", *(float(a) for a in args))
        if name == "ses":
            return ExpSmoothingForecaster("ses", *(float(a) for a in args))
        if name == "arma":
            if not args or args == ["auto"]:
                return ARMAForecaster("auto")
            return ARMAForecaster(tuple(int(a) for a in args))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad model spec {text!r}: {exc}") from exc
    raise ConfigError(f"unknown model {text!r}")


@dataclass
class EnsembleConfig:
    models: list = field(default_factory=lambda: ["median(10)", "poly(3,10)", "holt(0.3,0.1)",
                                                  "arma(auto)"])
    lam: float = 0.8
    max_horizon: int = 10
    min_warmup: int = 8
    challenger_timeout: int = 50
    log_transform: bool = False
    refit_every: int = 50
    arma_max_p: int = 5
    arma_max_d: int = 1
    arma_max_q: int = 5

    def build(self, confidence: float) -> ExpertEnsemble:
        models = []
        for spec in self.models:
            model = model_from_spec(spec)
            if isinstance(model, ARMAForecaster):
                model.set_params(refit_every=self.refit_every, max_p=self.arma_max_p,
                                 max_d=self.arma_max_d, max_q=self.arma_max_q)
            try:
                model._reset()
            except ValueError as exc:
                raise ConfigError(f"bad model spec {spec!r}: {exc}") from exc
            models.append(model)
        if not models:
            raise ConfigError("ensemble.models must not be empty")
        ens = ExpertEnsemble(models, self.lam, self.max_horizon, self.min_warmup,
                             self.challenger_timeout, self.log_transform, confidence)
        try:
            ens.reset()
        except ValueError as exc:
            raise ConfigError(f"ensemble: {exc}") from exc
        return ens


@dataclass
class DetectorConfig:
    err_threshold: float = 0.5
    lowess_dev_threshold: float = 0.25
    sustain_m: int = 4
    sustain_n: int = 6
    lowess_fraction: float = 0.3
    lowess_robustness_iters: int = 2
    lowess_degree: int = 1
    lowess_window: int = 50

    def build(self) -> AnomalyDetector:
        det = AnomalyDetector(**asdict(self))
        try:
            det.reset()
        except ValueError as exc:
            raise ConfigError(f"detector: {exc}") from exc
        if self.lowess_window < 2:
            raise ConfigError("detector: lowess_window must be >= 2")
        return det


@dataclass
class ClusterConfig:
    nodes: int = 8
    slots_per_node: int = 4

    def build(self) -> ClusterSpec:
        try:
            return ClusterSpec.uniform(self.nodes, self.slots_per_node)
        except ValueError as exc:
            raise ConfigError(f"cluster: {exc}") from exc


@dataclass
class SynthConfig:
    n_jobs: int = 10_000
    n_classes: int = 8
    interarrival_mean: float = 600.0
    short_fail_fraction: float = 0.04
    long_fraction: float = 0.025

    def mix(self, seed: int) -> WorkloadMixSpec:
        try:
            return default_mix(self.n_jobs, self.n_classes, seed, self.interarrival_mean,
                               short_fail_fraction=self.short_fail_fraction,
                               long_fraction=self.long_fraction)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"synth: {exc}") from exc


_SECTIONS = {"ensemble": EnsembleConfig, "detector": DetectorConfig,
             "cluster": ClusterConfig, "synth": SynthConfig}


@dataclass
class PipelineConfig:
    """Every knob of a run; JSON round-trippable.

    ``slack`` bounds the uniform factor applied to a class's median duration
    to give each simulated job its deadline.
    """

    inputs: list = field(default_factory=list)
    out: str = "probsched-out"
    class_key: str = "group,owner"
    min_class_size: int = 20
    min_duration_filter: float = 10.0
    drop_failed: bool = True
    max_malformed_fraction: float = 0.05
    confidence: float = 0.9
    seed: int = 0
    simulate: bool = True
    slack: list = field(default_factory=lambda: [1.5, 4.0])
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    cluster: ClusterConfig = field(default_factory=ClusterConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        for name, value in d.items():
            if name in _SECTIONS:
                section = _SECTIONS[name]
                if not isinstance(value, dict):
                    raise ConfigError(f"{name} must be an object")
                bad = set(value) - {f.name for f in fields(section)}
                if bad:
                    raise ConfigError(f"unknown {name} keys: {sorted(bad)}")
                value = section(**value)
            kwargs[name] = value
        if isinstance(kwargs.get("inputs"), str):
            kwargs["inputs"] = [kwargs["inputs"]]
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        text = Path(path).read_text(encoding="utf-8")
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)

    def validate(self) -> None:
        if not 0.0 < self.confidence < 1.0:
            raise ConfigError("confidence must lie in (0, 1)")
        if self.min_class_size < 1:
            raise ConfigError("min_class_size must be >= 1")
        if len(self.slack) != 2 or not 1.0 <= self.slack[0] <= self.slack[1]:
            raise ConfigError("slack must be [lo, hi] with 1 <= lo <= hi")
        self.key_spec()
        self.load_options()
        self.ensemble.build(self.confidence)
        self.detector.build()
        self.cluster.build()

    def key_spec(self) -> ClassKeySpec:
        try:
            return ClassKeySpec.parse(self.class_key)
        except ValueError as exc:
            raise ConfigError(f"class_key: {exc}") from exc

    def load_options(self) -> TraceLoadOptions:
        try:
            return TraceLoadOptions(self.min_duration_filter, self.drop_failed,
                                    self.max_malformed_fraction)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def load_inputs(cfg: PipelineConfig):
    """Read and merge every input trace; returns ``(records, per-file stats)``."""
    if not cfg.inputs:
        raise ConfigError("no input trace given")
    records, stats = [], {}
    for path in cfg.inputs:
        recs, st = read_trace(path, cfg.load_options())
        records.extend(recs)
        stats[str(path)] = st.to_dict()
    records.sort(key=lambda r: (r.end_time, r.job_number))
    return records, stats


def replay_classes(records, cfg: PipelineConfig) -> tuple[dict, dict]:
    """Replay each modellable class; returns ``(results, classes)`` keyed by key text."""
    classes = partition(records, cfg.key_spec(), cfg.min_class_size)
    ensemble = cfg.ensemble.build(cfg.confidence)
    detector = cfg.detector.build()
    results = {}
    for key, jc in classes.items():
        if jc.unmodellable:
            continue
        r = ClassReplayer(ensemble, detector, str(key))
        for d in jc.durations:
            r.step(d)
        results[str(key)] = r.result
    return results, {str(k): v for k, v in classes.items()}


def make_requests(records, cfg: PipelineConfig) -> tuple[list[JobRequest], set[str]]:
    """Turn trace records into deadline requests ordered by submission.

    Each job asks for ``slack * median`` seconds, where ``median`` is its
    class's median duration over the trace and ``slack`` is drawn uniformly
    from ``cfg.slack``. Classes below ``min_class_size`` are returned as
    unmodellable.
    """
    spec = cfg.key_spec()
    usable = []
    for r in records:
        d = wallclock_or_none(r)
        if d is None or d <= 0:
            continue
        usable.append((r, float(d), str(make_class_key(r, spec))))
    by_class: dict[str, list[float]] = {}
    for _, d, key in usable:
        by_class.setdefault(key, []).append(d)
    medians = {k: statistics.median(v) for k, v in by_class.items()}
    unmodellable = {k for k, v in by_class.items() if len(v) < cfg.min_class_size}
    usable.sort(key=lambda u: (u[0].submit_time, u[0].job_number))
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([cfg.seed, 7])))
    slack = rng.uniform(cfg.slack[0], cfg.slack[1], len(usable))
    requests = [JobRequest(r.job_number, key, float(r.submit_time),
                           r.submit_time + float(s) * medians[key], d, cfg.confidence)
                for (r, d, key), s in zip(usable, slack)]
    return requests, unmodellable


def simulate(records, cfg: PipelineConfig) -> SimReport:
    requests, unmodellable = make_requests(records, cfg)
    ensemble = cfg.ensemble.build(cfg.confidence)
    detector = cfg.detector.build()
    return run_simulation(requests, cfg.cluster.build(),
                          lambda key: ClassReplayer(ensemble, detector, key),
                          unmodellable)


def class_table(results: dict[str, ClassResult], classes: dict) -> list[dict]:
    rows = []
    for key, jc in classes.items():
        row = {"class": key, "slug": jc.key.slug(), "n_jobs": len(jc),
               "unmodellable": jc.unmodellable}
        if key in results:
            row.update(results[key].summary())
        rows.append(row)
    return rows


_TABLE_COLUMNS = ("class", "slug", "n_jobs", "unmodellable", "n_forecasts", "mean_pct_error",
                  "mean_abs_pct_error", "var_pct_error", "n_flagged", "n_mode_change",
                  "n_switches")


def write_replay(out: Path, results, classes) -> None:
    (out / "classes").mkdir(parents=True, exist_ok=True)
    for key, res in results.items():
        slug = classes[key].key.slug()
        emit_class_summary(res, out / "classes" / f"{slug}.csv",
                           out / "classes" / f"{slug}_hist.csv")
    write_csv(out / "class_summary.csv", _TABLE_COLUMNS,
              ([row.get(c) for c in _TABLE_COLUMNS] for row in class_table(results, classes)))


def run_synth(cfg: PipelineConfig, path) -> int:
    mix = cfg.synth.mix(cfg.seed)
    records = gen_workload(mix)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        write_workload(records, mix, fh)
    return len(records)


def run_pipeline(cfg: PipelineConfig, stages=("ingest", "replay", "simulate", "report")) -> int:
    """Run the selected stages, writing artifacts under ``cfg.out``.

    Returns 0 on success, 2 for configuration errors, 3 when a trace is
    rejected and 4 for I/O failures.
    """
    try:
        cfg.validate()
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        records, stats = load_inputs(cfg)
        # the output directory is left out so artifact sets compare across locations
        write_json(out / "config.json", {k: v for k, v in cfg.to_dict().items() if k != "out"})
        write_json(out / "ingest_stats.json", stats)
        if "replay" in stages:
            results, classes = replay_classes(records, cfg)
            write_replay(out, results, classes)
        if "simulate" in stages and cfg.simulate:
            report = simulate(records, cfg)
            write_json(out / "sim_report.json", report.to_dict())
            emit_decisions(report, out / "decisions.csv")
        if "report" in stages:
            durations = [d for d in map(wallclock_or_none, records) if d]
            if durations:
                emit_duration_cdf(durations, out / "duration_cdf.csv", out / "cdf_stats.json")
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except TraceRejectedError as exc:
        log.error("trace rejected: %s", exc)
        return EXIT_TRACE_REJECTED
    except OSError as exc:
        log.error("i/o error: %s", exc)
        return EXIT_IO
    return EXIT_OK
