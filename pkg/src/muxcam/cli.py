"""Command-line entry points for batch experiment runs.

    muxcam run      --config exp.cfg [--stage all|simulate|recover|report]
    muxcam simulate --config exp.cfg      (alias of run --stage simulate)
    muxcam recover  --config exp.cfg
    muxcam report   --config exp.cfg
    muxcam design   --config cam.cfg --out dir

Common flags: ``--config`` (key-value file, see muxcam.config), ``--seed``,
``--out`` and ``--preset`` override the corresponding config keys.  Exit
status: 0 on success, 2 when recovery finished but a frame is flagged
(not converged or outside its fidelity ball), 1 on configuration or I/O
errors.  Batch outputs only; nothing is interactive.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, load_experiment_config, parse_config_file, resolve_preset
from .pipeline import (
    run_experiment,
    stage_recover,
    stage_report,
    stage_simulate,
    write_design_outputs,
)

__all__ = ["main"]


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="experiment config file")
    parser.add_argument("--seed", type=int, default=None, help="override the simulation seed")
    parser.add_argument("--out", default=None, help="override the output directory")
    parser.add_argument("--preset", default=None, help="override the camera preset")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="muxcam",
        description="simulate and reconstruct spatial-multiplexing camera experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute the full pipeline (or one stage of it)")
    _add_common(run)
    run.add_argument(
        "--stage", choices=["all", "simulate", "recover", "report"], default="all",
        help="run a single stage against on-disk artifacts",
    )

    for name, text in (
        ("simulate", "build the schedule and acquire measurements"),
        ("recover", "demodulate and invert on-disk measurements"),
        ("report", "compute metrics for recovered frames"),
    ):
        stage = sub.add_parser(name, help=text)
        _add_common(stage)

    design = sub.add_parser("design", help="rate curve and optical layout report")
    design.add_argument("--config", required=True, help="camera/optics config file")
    design.add_argument("--out", required=True, help="output directory")
    design.add_argument("--preset", default=None, help="camera preset name")
    return parser


def _report_status(report) -> int:
    for record in report.records:
        marker = "ok" if (record.converged and record.feasible) else "flagged"
        rsnr = f"{record.rsnr_db:.2f} dB" if record.rsnr_db == record.rsnr_db else "n/a"
        print(
            f"frame {record.frame}: {rsnr}, {record.under_sampling:.2f}x "
            f"under-sampling, {record.iterations} iterations [{marker}]"
        )
    return 0 if report.all_ok else 2


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "design":
            values = parse_config_file(args.config)
            if args.preset:
                values.update(resolve_preset(args.preset))
            path = write_design_outputs(values, Path(args.out))
            print(f"wrote {path} and design_report.txt")
            return 0

        stage = args.stage if args.command == "run" else args.command
        config = load_experiment_config(
            args.config, seed=args.seed, out=args.out, preset=args.preset
        )
        if stage in ("all",):
            report = run_experiment(config)
            return _report_status(report)
        if stage == "simulate":
            path = stage_simulate(config)
            print(f"wrote {path}")
            return 0
        if stage == "recover":
            path = stage_recover(config)
            print(f"wrote {path}")
            return 0
        report = stage_report(config)
        return _report_status(report)
    except ConfigError as exc:
        print(f"muxcam: configuration error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"muxcam: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
