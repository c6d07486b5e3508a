import csv
import json
import statistics

import pytest

from probsched.exceptions import ConfigError
from probsched.forecasters import (
    ARMAForecaster,
    BaselineForecaster,
    ExpSmoothingForecaster,
    PolyTrendForecaster,
)
from probsched.pipeline import (
    EXIT_CONFIG,
    EXIT_IO,
    EXIT_OK,
    EXIT_TRACE_REJECTED,
    PipelineConfig,
    make_requests,
    model_from_spec,
    run_pipeline,
    run_synth,
)
from probsched.trace import read_trace

SMALL = {"synth": {"n_jobs": 600, "n_classes": 4}, "min_class_size": 20}


@pytest.fixture(scope="module")
def trace(tmp_path_factory):
    path = tmp_path_factory.mktemp("trace") / "small.acct"
    run_synth(PipelineConfig.from_dict(SMALL), path)
    return path


def artifacts(root):
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file()}


def test_model_specs():
    assert isinstance(model_from_spec("poly(3,10)"), PolyTrendForecaster)
    assert model_from_spec("median(10)").get_params()["window"] == 10
    assert isinstance(model_from_spec("holt(0.3,0.1)"), ExpSmoothingForecaster)
    assert isinstance(model_from_spec("mean"), BaselineForecaster)
    assert model_from_spec("arma(4,0,4)").order == (4, 0, 4)
    assert model_from_spec("arma(auto)").order == "auto"
    assert isinstance(model_from_spec("ARMA( auto )"), ARMAForecaster)
    for bad in ("nope(1)", "poly(x)"):
        with pytest.raises(ConfigError):
            model_from_spec(bad)
    with pytest.raises(ConfigError):
        PipelineConfig.from_dict({"ensemble": {"models": ["poly(3,2)"]}})


def test_config_round_trip():
    cfg = PipelineConfig.from_dict({"seed": 5, "confidence": 0.8,
                                    "ensemble": {"models": ["median(10)"]},
                                    "cluster": {"nodes": 2}})
    again = PipelineConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again == cfg and again.cluster.nodes == 2


@pytest.mark.parametrize("bad", [
    {"colour": 1},
    {"confidence": 1.0},
    {"slack": [0.5, 2.0]},
    {"class_key": "group,planet"},
    {"detector": {"err_threshold": -1}},
    {"detector": {"bogus": 1}},
    {"ensemble": {"models": []}},
    {"cluster": {"nodes": 0}},
    {"max_malformed_fraction": 2.0},
])
def test_invalid_config_is_rejected(bad):
    with pytest.raises(ConfigError):
        PipelineConfig.from_dict(bad)


def test_deadlines_scale_with_class_median(trace):
    cfg = PipelineConfig.from_dict({**SMALL, "inputs": [str(trace)]})
    records, _ = read_trace(trace, cfg.load_options())
    requests, unmodellable = make_requests(records, cfg)
    assert not unmodellable
    assert [r.submit_time for r in requests] == sorted(r.submit_time for r in requests)
    by_class = {}
    for r in records:
        by_class.setdefault(f"group={r.group}|owner={r.owner}", []).append(r.ru_wallclock)
    for req in requests:
        med = statistics.median(by_class[req.class_key])
        assert 1.5 * med - 1e-6 <= req.deadline - req.submit_time <= 4.0 * med + 1e-6


def test_defaults_write_summary_and_stats(trace, tmp_path):
    cfg = PipelineConfig.from_dict({**SMALL, "inputs": [str(trace)], "out": str(tmp_path)})
    assert run_pipeline(cfg) == EXIT_OK
    for name in ("config.json", "ingest_stats.json", "class_summary.csv", "sim_report.json",
                 "decisions.csv", "duration_cdf.csv", "cdf_stats.json"):
        assert (tmp_path / name).is_file(), name
    rows = list(csv.DictReader(open(tmp_path / "class_summary.csv")))
    assert len(rows) == 4 and sum(int(r["n_jobs"]) for r in rows) > 500
    for r in rows:
        assert (tmp_path / "classes" / f"{r['slug']}.csv").is_file()
        assert (tmp_path / "classes" / f"{r['slug']}_hist.csv").is_file()
    sim = json.loads((tmp_path / "sim_report.json").read_text())
    assert sim["admitted"] + sim["rejected"] + sim["unmodellable"] > 0
    assert json.loads((tmp_path / "config.json").read_text())["seed"] == 0


def test_missing_input_is_io_error(tmp_path):
    cfg = PipelineConfig.from_dict({"inputs": [str(tmp_path / "absent.acct")],
                                    "out": str(tmp_path / "o")})
    assert run_pipeline(cfg) == EXIT_IO


def test_mostly_malformed_trace_is_rejected(tmp_path):
    src = tmp_path / "bad.acct"
    src.write_text("garbage\n" * 5 + "all.q:n:g:u:j:1:a:0:100:110:150:0:0:40\n")
    cfg = PipelineConfig.from_dict({"inputs": [str(src)], "out": str(tmp_path / "o")})
    assert run_pipeline(cfg) == EXIT_TRACE_REJECTED


def test_no_inputs_is_config_error(tmp_path):
    assert run_pipeline(PipelineConfig(out=str(tmp_path))) == EXIT_CONFIG


def test_identical_runs_are_byte_identical(trace, tmp_path):
    outs = []
    for run in ("a", "b"):
        cfg = PipelineConfig.from_dict({**SMALL, "inputs": [str(trace)],
                                        "out": str(tmp_path / run), "seed": 3})
        assert run_pipeline(cfg) == EXIT_OK
        outs.append(artifacts(tmp_path / run))
    assert outs[0] == outs[1] and len(outs[0]) >= 7


def test_seed_changes_simulated_deadlines(trace, tmp_path):
    reports = []
    for seed in (1, 2):
        cfg = PipelineConfig.from_dict({**SMALL, "inputs": [str(trace)],
                                        "out": str(tmp_path / str(seed)), "seed": seed})
        assert run_pipeline(cfg, ("ingest", "simulate")) == EXIT_OK
        reports.append((tmp_path / str(seed) / "decisions.csv").read_bytes())
    assert reports[0] != reports[1]
