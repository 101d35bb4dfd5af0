"""Command-line entry points.

    decamin pipeline -c run.toml         # full run, all artifacts
    decamin <stage> -c run.toml          # one stage (files mediate between stages)
    decamin validate -c run.toml         # config and input checks only

Exit codes: 0 ok, 2 invalid config / missing input, 3 missing upstream
stage artifact, 1 unexpected failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time

from .errors import ConfigError, DecaminError
from .pipeline import STAGES, MissingArtifactError, load_config, run_pipeline, run_stage

log = logging.getLogger("decamin")


class _JsonFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        return json.dumps(
            {
                "level": record.levelname.lower(),
                "logger": record.name,
                "message": record.getMessage(),
            },
            sort_keys=True,
        )


def _setup_logging(json_logs: bool) -> None:
    handler = logging.StreamHandler(sys.stderr)
    if json_logs:
        handler.setFormatter(_JsonFormatter())
    else:
        handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    logging.basicConfig(level=logging.INFO, handlers=[handler], force=True)


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="decamin",
        description="Building-level 10-minute accessibility, service communities, redundancy",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("pipeline", "validate", *STAGES):
        p = sub.add_parser(name)
        p.add_argument("-c", "--config", required=True, help="run configuration (TOML)")
        p.add_argument("--workers", type=int, default=None, help="worker processes")
        p.add_argument("--seed", type=int, default=None, help="community-detection seed")
        p.add_argument("--provider", choices=("internal", "remote"), default=None)
        p.add_argument("--assignment", choices=("literal", "pair"), default=None)
        p.add_argument("--log-json", action="store_true", help="machine-readable logs")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    _setup_logging(args.log_json)
    try:
        config = load_config(args.config)
    except ConfigError as exc:
        log.error("%s", exc)
        return 2
    if args.workers is not None:
        config.workers = args.workers
    if args.seed is not None:
        config.seed = args.seed
        config.raw_params["seed"] = args.seed
    if args.provider is not None:
        config.provider = args.provider
    if args.assignment is not None:
        config.assignment = args.assignment
        config.raw_params["assignment"] = args.assignment

    problems = config.validate()
    if problems:
        for p in problems:
            log.error("%s", p)
        return 2
    if args.command == "validate":
        log.info("config ok: %s", args.config)
        return 0

    started = time.perf_counter()
    try:
        if args.command == "pipeline":
            summary = run_pipeline(config)
            log.info(
                "pipeline done in %.1fs: %d scored, %d communities",
                time.perf_counter() - started,
                summary["accounting"]["scored"],
                summary["communities"]["count"],
            )
        else:
            run_stage(args.command, config)
    except MissingArtifactError as exc:
        log.error("%s (run the earlier stages first)", exc)
        return 3
    except ConfigError as exc:
        log.error("%s", exc)
        return 2
    except DecaminError as exc:
        log.error("%s failed: %s", args.command, exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
