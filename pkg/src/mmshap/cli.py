"""Command-line interface.

Subcommands:

* ``run``: evaluate a JSONL dataset against an oracle and write the report,
  per-sample table, and (optionally) rendered heatmaps.
* ``render``: re-render heatmaps from an existing report file.
* ``selftest``: run the built-in synthetic-oracle property suite.

Exit codes: 0 success, 2 configuration or input error, 3 oracle protocol
error, 4 completed with per-sample failures (see failures.json).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .engine import EXACT, PERMUTATION_MC, EstimatorConfig
from .errors import (
    ConfigError,
    MissingAttributions,
    OracleError,
    OracleTimeout,
    ParseError,
    ProtocolViolation,
)
from .harness import RunConfig, run
from .render import load_report, render_report
from .scoring import format_percent
from .selftest import selftest

__all__ = ["main"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ORACLE = 3
EXIT_PARTIAL = 4

_MODES = {"exact": EXACT, "mc": PERMUTATION_MC}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmshap",
        description=(
            "Shapley-value token attributions and multimodality scores "
            "for black-box image-text predictors."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="evaluate a dataset against an oracle")
    run_p.add_argument("--dataset", required=True, help="JSONL dataset file")
    run_p.add_argument(
        "--oracle",
        required=True,
        help="oracle spec: builtin:<name>, an http(s) URL, or a command line",
    )
    run_p.add_argument("--mode", choices=sorted(_MODES), default="mc")
    run_p.add_argument(
        "--coalitions",
        default="auto",
        help="evaluation budget per sample: auto (2p+1) or an integer",
    )
    run_p.add_argument("--seed", type=int, default=0)
    run_p.add_argument("--workers", type=int, default=1)
    run_p.add_argument("--out", required=True, help="output directory")
    run_p.add_argument(
        "--render", action="store_true", help="also write per-sample heatmaps"
    )
    run_p.add_argument(
        "--splits",
        default="caption,foil",
        help="comma-separated subset of: caption,foil",
    )
    run_p.add_argument("--exact-limit", type=int, default=20)
    run_p.add_argument(
        "--threshold",
        type=float,
        default=0.5,
        help="decision threshold for probability-scored oracles",
    )
    run_p.add_argument(
        "--timeout", type=float, default=120.0, help="oracle timeout in seconds"
    )

    render_p = sub.add_parser("render", help="render heatmaps from a report file")
    render_p.add_argument("--report", required=True, help="report.json path")
    render_p.add_argument("--out", required=True, help="output directory")

    sub.add_parser("selftest", help="run the built-in property checks")
    return parser


def _parse_coalitions(text: str) -> int | str:
    if text == "auto":
        return "auto"
    try:
        return int(text)
    except ValueError:
        raise ConfigError(
            f"--coalitions must be 'auto' or an integer, got {text!r}"
        ) from None


def _cmd_run(args: argparse.Namespace) -> int:
    config = RunConfig(
        dataset_path=args.dataset,
        oracle_spec=args.oracle,
        output_dir=args.out,
        estimator=EstimatorConfig(
            mode=_MODES[args.mode],
            n_coalitions=_parse_coalitions(args.coalitions),
            seed=args.seed,
            exact_limit=args.exact_limit,
        ),
        splits=tuple(s for s in args.splits.split(",") if s),
        workers=args.workers,
        render=args.render,
        threshold=args.threshold,
        oracle_timeout=args.timeout,
    )
    report = run(config)

    out_dir = Path(args.out)
    print(f"report: {out_dir / 'report.json'}")
    print(f"samples: {len(report.samples)} attributed, {len(report.failures)} failed")
    for split in ("caption", "foil"):
        stats = report.dataset_stats.get(split)
        if stats and stats["mean_t_shap"] is not None:
            print(
                f"mean T-SHAP ({split}): {format_percent(stats['mean_t_shap'])}% "
                f"over {stats['n_samples']} samples"
            )
    if report.metrics["acc_r"] is not None:
        print(f"acc_r: {report.metrics['acc_r']:.4f} over {report.metrics['n_pairs']} pairs")
    if report.failures:
        print(
            f"warning: {len(report.failures)} samples failed; "
            f"see {out_dir / 'failures.json'}",
            file=sys.stderr,
        )
        return EXIT_PARTIAL
    return EXIT_OK


def _cmd_render(args: argparse.Namespace) -> int:
    try:
        report = load_report(args.report)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read report {args.report!r}: {exc}") from exc
    written = render_report(report, args.out)
    print(f"rendered {len(written)} files under {args.out}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "render":
            return _cmd_render(args)
        return EXIT_OK if selftest() else 1
    except (ConfigError, ParseError, FileNotFoundError, MissingAttributions) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ProtocolViolation, OracleTimeout) as exc:
        print(f"oracle protocol error: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except OracleError as exc:
        print(f"oracle error: {exc}", file=sys.stderr)
        return EXIT_ORACLE


if __name__ == "__main__":
    sys.exit(main())
