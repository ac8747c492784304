"""Report rendering: delimited tables and matplotlib figures on disk."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .catalog import Catalog, cost_str
from .model import StrategyOutcome
from .simulator import SimulationReport


def instance_counts(outcome: StrategyOutcome, catalog: Catalog) -> tuple[int, int]:
    """(non-GPU, GPU) instance counts for a comparison row."""
    non_gpu = gpu = 0
    if outcome.plan is not None:
        for type_name, count in outcome.plan.instance_type_counts().items():
            if catalog.get(type_name).has_gpu:
                gpu += count
            else:
                non_gpu += count
    return non_gpu, gpu


def write_compare_report(
    out_dir, outcomes: list[StrategyOutcome], catalog: Catalog
) -> list[Path]:
    """Write comparison CSV plus a cost-per-strategy figure; returns paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "comparison.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["strategy", "status", "non_gpu_instances", "gpu_instances", "hourly_cost", "savings_pct", "reason"]
        )
        for outcome in outcomes:
            if outcome.plan is None:
                writer.writerow([outcome.strategy.name, "fail", "", "", "", "", outcome.failure])
            else:
                non_gpu, gpu = instance_counts(outcome, catalog)
                writer.writerow(
                    [
                        outcome.strategy.name,
                        "ok",
                        non_gpu,
                        gpu,
                        cost_str(outcome.plan.hourly_cost),
                        outcome.savings_pct,
                        "",
                    ]
                )

    fig_path = out_dir / "costs.png"
    names = [o.strategy.name for o in outcomes]
    costs = [float(o.plan.hourly_cost) if o.plan is not None else 0.0 for o in outcomes]
    fig, ax = plt.subplots(figsize=(5, 3.2))
    bars = ax.bar(names, costs, color="#4878a8")
    for bar, outcome in zip(bars, outcomes):
        if outcome.plan is None:
            ax.annotate(
                "FAIL",
                (bar.get_x() + bar.get_width() / 2, 0.02),
                ha="center",
                va="bottom",
                color="#a84848",
                fontweight="bold",
            )
        else:
            ax.annotate(
                f"${cost_str(outcome.plan.hourly_cost)}",
                (bar.get_x() + bar.get_width() / 2, bar.get_height()),
                ha="center",
                va="bottom",
                fontsize=9,
            )
    ax.set_ylabel("hourly cost ($)")
    ax.set_title("hourly cost by strategy")
    fig.tight_layout()
    fig.savefig(fig_path, dpi=120)
    plt.close(fig)
    return [csv_path, fig_path]


def write_simulation_report(
    out_dir, report: SimulationReport, dim_names: list[str], headroom: float = 0.9
) -> list[Path]:
    """Write utilization/performance CSVs and figures; returns paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    util_csv = out_dir / "utilization.csv"
    with open(util_csv, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["instance", "type", "dimension", "utilization"])
        for inst in report.per_instance:
            for name, value in zip(dim_names, inst.utilization):
                writer.writerow([inst.ordinal, inst.type_name, name, f"{value:.6f}"])
    perf_csv = out_dir / "performance.csv"
    with open(perf_csv, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["stream_id", "performance"])
        for stream_id, perf in sorted(report.per_stream.items()):
            writer.writerow([stream_id, f"{perf:.6f}"])

    paths = [util_csv, perf_csv]

    fig, ax = plt.subplots(figsize=(6, 3.4))
    n_dims = len(dim_names)
    if report.per_instance:
        width = 0.8 / n_dims
        for d, name in enumerate(dim_names):
            xs = [i + d * width for i in range(len(report.per_instance))]
            ys = [inst.utilization[d] for inst in report.per_instance]
            ax.bar(xs, ys, width=width, label=name)
        ax.set_xticks([i + 0.4 - width / 2 for i in range(len(report.per_instance))])
        ax.set_xticklabels(
            [f"{inst.ordinal}: {inst.type_name}" for inst in report.per_instance],
            rotation=20,
            ha="right",
            fontsize=8,
        )
        ax.legend(fontsize=7)
    ax.axhline(headroom, color="#a84848", linestyle="--", linewidth=1, label="headroom")
    ax.set_ylabel("utilization (fraction of raw capacity)")
    ax.set_title("resource utilization by instance")
    fig.tight_layout()
    util_fig = out_dir / "utilization.png"
    fig.savefig(util_fig, dpi=120)
    plt.close(fig)
    paths.append(util_fig)

    fig, ax = plt.subplots(figsize=(6, 3.0))
    streams = sorted(report.per_stream.items())
    if streams:
        ax.bar(range(len(streams)), [p for _, p in streams], color="#5a9a68")
        ax.set_xticks(range(len(streams)))
        ax.set_xticklabels([sid for sid, _ in streams], rotation=30, ha="right", fontsize=7)
    ax.axhline(0.9, color="#a84848", linestyle="--", linewidth=1)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("performance")
    ax.set_title(f"per-stream performance (overall {report.overall_performance:.3f})")
    fig.tight_layout()
    perf_fig = out_dir / "performance.png"
    fig.savefig(perf_fig, dpi=120)
    plt.close(fig)
    paths.append(perf_fig)
    return paths
