"""
Command-line surface.

    sunkcost run CONFIG.json        two-phase scenario, records + speed report
    sunkcost sequence CONFIG.json   multi-task sequence + cost ledger
    sunkcost sweep CONFIG.json      one-parameter sweep
    sunkcost report RECORDS_DIR     Markdown/CSV/SVG artifacts from records
    sunkcost template KIND          default JSON config for the desk scenario

Failures exit with status 1 and one JSON line on stderr:
{"error": "<ExceptionClass>", "message": "..."}.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any

from dotenv import load_dotenv
from pydantic import BaseModel

from sunkcost.harness.report import report
from sunkcost.harness.scenario import arm_from_aspects, default_experiment, run_scenario
from sunkcost.harness.sequence import run_sequence
from sunkcost.harness.sweep import run_sweep
from sunkcost.models.specs import (
    ExperimentConfig,
    SequenceConfig,
    SweepConfig,
    SweepParameter,
    TargetMode,
)
from sunkcost.observability import TrainingTelemetry
from sunkcost.settings import Settings

COMBINED = ("sp", "l2init", "data", "sched")


def _seeds(raw: str) -> list[int]:
    try:
        return [int(part) for part in raw.split(",") if part.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"--seeds expects comma-separated integers: {raw}") from e


class _Parser(argparse.ArgumentParser):
    """Raises ArgumentError instead of printing usage and exiting with status 2."""

    def error(self, message: str):
        raise argparse.ArgumentError(None, message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="sunkcost", description="Continuous-training cost experiments at desk scale."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--seeds", type=_seeds, help="Comma-separated seeds, e.g. 0,1,2.")
        p.add_argument("--workers", type=int, help="Parallel runs (default SUNKCOST_WORKERS).")
        p.add_argument("--out", help="Output directory (default from the config).")
        p.add_argument(
            "--target-mode", choices=[m.value for m in TargetMode], help="How a_scratch is taken."
        )

    for name, help_text in (
        ("run", "Run a two-phase scenario."),
        ("sequence", "Run a multi-task sequence."),
        ("sweep", "Run a one-parameter sweep."),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", type=Path, help="JSON config file.")
        common(p)

    p = sub.add_parser("report", help="Render artifacts from a records directory.")
    p.add_argument("records", type=Path, help="Output or records directory.")
    p.add_argument("--out", type=Path, help="Artifact directory (default <records>/report).")
    p.add_argument("--baseline", default="scratch", help="Arm that defines a_scratch.")
    p.add_argument("--r-values", type=lambda s: [float(v) for v in s.split(",")],
                   default=[99.0, 100.0], help="Comma-separated r values for L_r.")
    p.add_argument("--target-mode", choices=[m.value for m in TargetMode], default="final")

    p = sub.add_parser("template", help="Print a default config.")
    p.add_argument("kind", choices=["run", "sequence", "sweep"])
    return parser


def _overrides(args: argparse.Namespace, settings: Settings) -> dict[str, Any]:
    updates: dict[str, Any] = {}
    if args.seeds:
        updates["seeds"] = args.seeds
    if args.target_mode:
        updates["target_mode"] = args.target_mode
    if args.out:
        updates["output_dir"] = args.out
    elif settings.out:
        updates["output_dir"] = settings.out
    return updates


def _load(model: type[BaseModel], path: Path, updates: dict[str, Any]) -> Any:
    data = json.loads(path.read_text(encoding="utf-8"))
    if model is SweepConfig:
        data["experiment"] = {**data.get("experiment", {}), **updates}
    else:
        data.update(updates)
    return model.model_validate(data)


def template(kind: str) -> BaseModel:
    if kind == "run":
        return default_experiment()
    if kind == "sequence":
        return SequenceConfig(
            output_dir="runs/sequence", method=arm_from_aspects(True, COMBINED, 0.25)
        )
    return SweepConfig(
        experiment=default_experiment(output_dir="runs/sweep-alpha"),
        parameter=SweepParameter.ALPHA,
        values=[0.2, 0.4, 0.8, 1.0],
        base_arm=arm_from_aspects(True, ("sp",), 0.25),
    )


def _dispatch(args: argparse.Namespace, settings: Settings) -> int:
    if args.command == "template":
        print(template(args.kind).model_dump_json(indent=2))
        return 0

    workers = getattr(args, "workers", None)
    workers = workers if workers is not None else settings.workers
    if workers < 1:
        raise ValueError(f"--workers must be >= 1, got {workers}")
    telemetry = TrainingTelemetry(
        otlp_endpoint=settings.otlp_endpoint, metrics_port=settings.metrics_port
    )
    try:
        if args.command == "report":
            out = args.out or args.records / "report"
            with telemetry.span("report", records=str(args.records)):
                artifacts = report(
                    args.records, out, args.baseline, tuple(args.r_values),
                    TargetMode(args.target_mode),
                )
            print(artifacts.markdown.read_text(encoding="utf-8"))
            return 0

        updates = _overrides(args, settings)
        if args.command == "run":
            config = _load(ExperimentConfig, args.config, updates)
            with telemetry.span("run_scenario", arms=len(config.arms)):
                result = run_scenario(config, workers=workers, telemetry=telemetry)
            with telemetry.span("report", records=str(result.output_dir)):
                artifacts = report(
                    result.output_dir, result.output_dir / "report", config.baseline_arm,
                    tuple(config.r_values), config.target_mode,
                )
            print(artifacts.markdown.read_text(encoding="utf-8"))
        elif args.command == "sequence":
            config = _load(SequenceConfig, args.config, updates)
            with telemetry.span("run_sequence", tasks=1 + len(config.increments)):
                result = run_sequence(config, workers=workers, telemetry=telemetry)
            for ledger in result.ledgers:
                print(ledger.model_dump_json())
        else:
            config = _load(SweepConfig, args.config, updates)
            with telemetry.span("run_sweep", parameter=config.parameter.value):
                result = run_sweep(config, workers=workers, telemetry=telemetry)
            print((result.output_dir / "sweep.md").read_text(encoding="utf-8"))
    finally:
        telemetry.shutdown()
    return 0


def main(argv: list[str] | None = None) -> int:
    load_dotenv()
    try:
        args = build_parser().parse_args(argv)
        settings = Settings()
        logging.basicConfig(
            level=settings.level, format="%(asctime)s %(levelname)s %(message)s"
        )
        return _dispatch(args, settings)
    except Exception as e:
        logging.debug("command failed", exc_info=True)
        print(json.dumps({"error": type(e).__name__, "message": str(e)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
