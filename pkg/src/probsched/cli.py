"""Command-line entry point.

Settings resolve in order: built-in defaults, then ``--config`` JSON, then
explicit flags.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .exceptions import ConfigError
from .pipeline import (
    EXIT_CONFIG,
    EXIT_IO,
    EXIT_OK,
    PipelineConfig,
    run_pipeline,
    run_synth,
)

log = logging.getLogger("probsched")

_STAGES = {
    "ingest": ("ingest",),
    "replay": ("ingest", "replay"),
    "simulate": ("ingest", "simulate"),
    "report": ("ingest", "replay", "report"),
    "run": ("ingest", "replay", "simulate", "report"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--class-key", dest="class_key",
                        help="comma list of group, owner, host, win")
    common.add_argument("--confidence", type=float)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="probsched",
        description="Execution-time forecasting and probabilistic deadline scheduling replay.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("synth", parents=[common], help="generate a synthetic accounting trace")
    p.add_argument("--jobs", type=int, help="number of jobs")
    for name, text in (("ingest", "validate traces and print counters"),
                       ("replay", "per-class forecasting and anomaly replay"),
                       ("simulate", "deadline scheduler replay"),
                       ("report", "duration CDF and per-class summaries"),
                       ("run", "every stage")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("inputs", nargs="*", help="accounting trace files")
    return parser


def resolve_config(args) -> PipelineConfig:
    data = {}
    if args.config:
        data = json.loads(Path(args.config).read_text(encoding="utf-8")) \
            if Path(args.config).exists() else None
        if data is None:
            raise FileNotFoundError(args.config)
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    for name in ("seed", "out", "class_key", "confidence"):
        value = getattr(args, name, None)
        if value is not None:
            data[name] = value
    if getattr(args, "inputs", None):
        data["inputs"] = list(args.inputs)
    if getattr(args, "jobs", None) is not None:
        data.setdefault("synth", {})["n_jobs"] = args.jobs
    return PipelineConfig.from_dict(data)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
    except (ConfigError, json.JSONDecodeError) as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("i/o error: %s", exc)
        return EXIT_IO

    if args.command == "synth":
        path = Path(cfg.out) / "synthetic.acct"
        try:
            n = run_synth(cfg, path)
        except ConfigError as exc:
            log.error("configuration error: %s", exc)
            return EXIT_CONFIG
        except OSError as exc:
            log.error("i/o error: %s", exc)
            return EXIT_IO
        log.info("wrote %d jobs to %s", n, path)
        return EXIT_OK

    status = run_pipeline(cfg, _STAGES[args.command])
    if status == EXIT_OK:
        stats = Path(cfg.out) / "ingest_stats.json"
        if args.command == "ingest" and stats.exists():
            sys.stdout.write(stats.read_text(encoding="utf-8"))
        log.info("artifacts in %s", cfg.out)
    return status


if __name__ == "__main__":
    sys.exit(main())
