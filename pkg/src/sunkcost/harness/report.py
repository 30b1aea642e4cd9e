"""
Report artifacts from a directory of RunRecords.

    report.md    one row per arm: aspect flags, Max Acc (mean +/- SE), L_r per r
    report.csv   the same numbers, machine-readable
    curves.svg   seed-mean accuracy per arm with a +/- SE band
    loss.svg     seed-mean training loss per arm

Outputs are a pure function of the records: unchanged inputs give
byte-identical files.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from sunkcost.harness.persistence import load_records  # noqa: E402
from sunkcost.metrics.aggregate import aggregate, group_by_arm  # noqa: E402
from sunkcost.metrics.speed import MetricsError  # noqa: E402
from sunkcost.models.records import RunRecord, RunStatus, SpeedReport, r_key  # noqa: E402
from sunkcost.models.specs import TargetMode  # noqa: E402

COMPONENT_COLUMNS = ("start", "init", "reg", "data", "sched")

# fixed ids in the SVG output
plt.rcParams["svg.hashsalt"] = "sunkcost"


class ReportError(RuntimeError):
    """Raised when no report can be produced from the given records."""

    pass


@dataclass
class ReportArtifacts:
    markdown: Path
    csv: Path
    curves: Path
    loss: Path
    report: SpeedReport
    skipped: list[tuple[str, str]]


def fmt_speedup(value: float | None) -> str:
    return "/" if value is None else f"x{value:.2f}"


def fmt_accuracy(mean: float | None, se: float | None) -> str:
    if mean is None:
        return "/"
    return f"{100 * mean:.2f} ± {100 * (se or 0.0):.2f}"


def render_markdown(report: SpeedReport, skipped: list[tuple[str, str]]) -> str:
    r_headers = [f"L_{r_key(r)}" for r in report.r_values]
    header = ["Arm", "Start", "Init", "Reg", "Data", "Sched", "Max Acc", *r_headers]
    lines = [
        "# Speed report",
        "",
        f"Baseline: `{report.baseline_arm}`; a_scratch = {100 * report.a_scratch:.2f} "
        f"({report.target_mode.value}); s(scratch, a_scratch) = {report.scratch_speed or '/'}; "
        f"evaluation every {report.eval_resolution} iterations.",
        "",
        "| " + " | ".join(header) + " |",
        "|" + "|".join("---" for _ in header) + "|",
    ]
    for arm in report.arms:
        flags = [arm.components.get(column, "") for column in COMPONENT_COLUMNS]
        speedups = [fmt_speedup(arm.speedups.get(r_key(r))) for r in report.r_values]
        row = [arm.arm, *flags, fmt_accuracy(arm.max_accuracy, arm.max_accuracy_se), *speedups]
        lines.append("| " + " | ".join(row) + " |")
    lines += ["", "`/` marks a target that was not reached.", ""]
    if report.notes or skipped:
        lines.append("## Notes")
        lines.append("")
        lines += [f"- {note}" for note in report.notes]
        lines += [f"- skipped corrupt record `{name}`: {reason}" for name, reason in skipped]
        lines.append("")
    return "\n".join(lines)


def render_csv(report: SpeedReport) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    r_keys = [r_key(r) for r in report.r_values]
    writer.writerow(
        ["arm", *COMPONENT_COLUMNS, "seeds", "max_acc", "max_acc_se", "final_acc",
         *[f"s_{k}" for k in r_keys], *[f"L_{k}" for k in r_keys]]
    )
    for arm in report.arms:
        writer.writerow(
            [arm.arm, *[arm.components.get(c, "") for c in COMPONENT_COLUMNS],
             len(arm.seeds), _num(arm.max_accuracy), _num(arm.max_accuracy_se),
             _num(arm.final_accuracy), *[_num(arm.speeds.get(k)) for k in r_keys],
             *[_num(arm.speedups.get(k)) for k in r_keys]]
        )
    return buffer.getvalue()


def _num(value: float | int | None) -> str:
    return "" if value is None else repr(value)


def _save_svg(fig, path: Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_curves(report: SpeedReport, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for arm in report.arms:
        if not arm.eval_iterations:
            continue
        x = np.array(arm.eval_iterations)
        mean = np.array(arm.mean_accuracy)
        se = np.array(arm.se_accuracy)
        (line,) = ax.plot(x, mean, label=arm.arm, linewidth=1.2)
        ax.fill_between(x, mean - se, mean + se, color=line.get_color(), alpha=0.2, linewidth=0)
    ax.axhline(report.a_scratch, color="grey", linestyle="--", linewidth=0.8)
    ax.set_xlabel("iteration")
    ax.set_ylabel("test accuracy")
    ax.legend(fontsize=7, loc="lower right")
    fig.tight_layout()
    _save_svg(fig, path)


def plot_loss(records: list[RunRecord], path: Path) -> None:
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for arm, group in group_by_arm(records).items():
        losses = [r.train_loss for r in group if r.status == RunStatus.COMPLETED and r.train_loss]
        if not losses:
            continue
        length = min(len(loss) for loss in losses)
        mean = np.mean([loss[:length] for loss in losses], axis=0)
        ax.plot(np.arange(1, length + 1), mean, label=arm, linewidth=0.8)
    ax.set_xlabel("iteration")
    ax.set_ylabel("training loss")
    ax.set_yscale("log")
    ax.legend(fontsize=7, loc="upper right")
    fig.tight_layout()
    _save_svg(fig, path)


def report(
    records_dir: Path,
    out_dir: Path,
    baseline_arm: str = "scratch",
    r_values: tuple[float, ...] = (99.0, 100.0),
    target_mode: TargetMode = TargetMode.FINAL,
) -> ReportArtifacts:
    records, skipped = load_records(records_dir)
    if not records:
        raise ReportError(f"no valid run records in {records_dir}")
    try:
        speed_report = aggregate(records, baseline_arm, r_values, target_mode)
    except MetricsError as e:
        raise ReportError(str(e)) from e

    out_dir.mkdir(parents=True, exist_ok=True)
    artifacts = ReportArtifacts(
        markdown=out_dir / "report.md",
        csv=out_dir / "report.csv",
        curves=out_dir / "curves.svg",
        loss=out_dir / "loss.svg",
        report=speed_report,
        skipped=skipped,
    )
    artifacts.markdown.write_text(render_markdown(speed_report, skipped), encoding="utf-8")
    artifacts.csv.write_text(render_csv(speed_report), encoding="utf-8")
    plot_curves(speed_report, artifacts.curves)
    plot_loss(records, artifacts.loss)
    logging.info(
        f"Report over {len(records)} records ({len(skipped)} skipped) written to {out_dir}"
    )
    return artifacts
