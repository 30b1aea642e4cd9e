"""One-parameter sweeps: a baseline-vs-variant scenario per grid value."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field

from sunkcost.harness.report import fmt_accuracy, fmt_speedup
from sunkcost.harness.scenario import old_phase_root, run_scenario
from sunkcost.models.records import SpeedReport, r_key
from sunkcost.models.specs import ExperimentConfig, SweepConfig
from sunkcost.observability import TrainingTelemetry


class SweepRow(BaseModel):
    model_config = ConfigDict(extra="forbid")

    value: float
    arm: str
    max_accuracy: float | None
    max_accuracy_se: float | None
    speedups: dict[str, float | None]


class SweepSummary(BaseModel):
    model_config = ConfigDict(extra="forbid")

    schema_version: Literal["sweep_report.v1"] = "sweep_report.v1"
    parameter: str
    baseline_arm: str
    r_values: list[float]
    rows: list[SweepRow]
    trend: str = Field(description="Direction of the first L_r over the grid; reported only.")


@dataclass
class SweepResult:
    summary: SweepSummary
    reports: list[SpeedReport]
    output_dir: Path


def value_experiment(config: SweepConfig, value: float) -> ExperimentConfig:
    """Scenario with the baseline arm and the base arm at this grid value."""
    base = config.experiment
    varied = config.base_arm.with_parameter(config.parameter, value)
    baseline = base.arm(base.baseline_arm)
    out = Path(base.output_dir) / f"{config.parameter.value}={value:g}"
    data = base.model_dump(mode="json")
    data.update(
        arms=[baseline.model_dump(mode="json"), varied.model_dump(mode="json")],
        output_dir=str(out),
        old_phase_dir=str(old_phase_root(base)),
    )
    return ExperimentConfig.model_validate(data)


def trend(values: list[float], metric: list[float | None]) -> str:
    """'increasing', 'decreasing', 'flat', 'not monotone', or 'undetermined' with gaps."""
    if any(m is None for m in metric):
        return "undetermined (unreached targets)"
    ordered = [m for _, m in sorted(zip(values, metric, strict=True))]
    steps = [b - a for a, b in zip(ordered, ordered[1:], strict=False)]
    if all(s == 0 for s in steps):
        return "flat"
    if all(s >= 0 for s in steps):
        return "increasing"
    if all(s <= 0 for s in steps):
        return "decreasing"
    return "not monotone"


def render_sweep(summary: SweepSummary) -> str:
    r_headers = [f"L_{r_key(r)}" for r in summary.r_values]
    header = [summary.parameter, "Arm", "Max Acc", *r_headers]
    lines = [
        f"# Sweep over {summary.parameter}",
        "",
        "| " + " | ".join(header) + " |",
        "|" + "|".join("---" for _ in header) + "|",
    ]
    for row in summary.rows:
        speedups = [fmt_speedup(row.speedups.get(r_key(r))) for r in summary.r_values]
        cells = [f"{row.value:g}", row.arm, fmt_accuracy(row.max_accuracy, row.max_accuracy_se)]
        lines.append("| " + " | ".join([*cells, *speedups]) + " |")
    lines += ["", f"Trend of {r_headers[0] if r_headers else 'L_r'}: {summary.trend}.", ""]
    return "\n".join(lines)


def run_sweep(
    config: SweepConfig,
    workers: int = 1,
    telemetry: TrainingTelemetry | None = None,
    persist: bool = True,
) -> SweepResult:
    # every grid value is validated before anything trains
    experiments = [(value, value_experiment(config, value)) for value in config.values]
    out = Path(config.experiment.output_dir)
    reports: list[SpeedReport] = []
    rows: list[SweepRow] = []
    for value, experiment in experiments:
        logging.info(f"Sweep {config.parameter.value}={value:g}")
        result = run_scenario(experiment, workers=workers, telemetry=telemetry, persist=persist)
        reports.append(result.report)
        varied = result.report.arm(experiment.arms[1].name)
        rows.append(
            SweepRow(
                value=value,
                arm=varied.arm,
                max_accuracy=varied.max_accuracy,
                max_accuracy_se=varied.max_accuracy_se,
                speedups=dict(varied.speedups),
            )
        )

    r_values = list(config.experiment.r_values)
    direction = "undetermined (no r values)"
    if r_values:
        first = r_key(r_values[0])
        direction = trend([row.value for row in rows], [row.speedups.get(first) for row in rows])
    summary = SweepSummary(
        parameter=config.parameter.value,
        baseline_arm=config.experiment.baseline_arm,
        r_values=r_values,
        rows=rows,
        trend=direction,
    )
    if persist:
        out.mkdir(parents=True, exist_ok=True)
        payload = summary.model_dump_json(indent=2) + "\n"
        (out / "sweep.json").write_text(payload, encoding="utf-8")
        (out / "sweep.md").write_text(render_sweep(summary), encoding="utf-8")
    return SweepResult(summary=summary, reports=reports, output_dir=out)
