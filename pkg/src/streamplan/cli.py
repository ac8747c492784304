"""Command-line front end.

Exit codes: 0 success, 1 input/schema error, 2 infeasible workload,
3 simulated performance below target.  JSON documents are the canonical
output; human-readable tables and optional figure/CSV reports are derived
views.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import report as report_mod
from .catalog import cost_str, load_catalog
from .errors import ContractError, InfeasibleError, SchemaError, StreamPlanError, ValidationError
from .model import (
    compare_strategies,
    get_strategy,
    load_plan,
    load_workload,
    plan_to_doc,
    plan_workload,
)
from .profiles import (
    DEVICES,
    SCALE_LINEAR,
    ProfileStore,
    ReferenceMachine,
    fit_profile,
    load_profiles,
    load_samples,
    profile_to_doc,
    save_profiles,
    speedup,
)
from .simulator import check_plan, generate_test_run, simulate
from .solver import SolverLimits

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_INFEASIBLE = 2
EXIT_PERFORMANCE = 3

_INPUT_ERRORS = (SchemaError, ValidationError, ContractError, OSError, ValueError)


def _dump(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _emit(doc, out: str):
    """Write a JSON document to a file or stdout (``-``)."""
    text = _dump(doc)
    if out == "-":
        click.echo(text, nl=False)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _human(message: str, out: str):
    """Human-readable line; kept off stdout when stdout carries JSON."""
    click.echo(message, err=(out == "-"))


def _fail_input(exc: Exception) -> int:
    click.echo(f"error: {exc}", err=True)
    return EXIT_INPUT_ERROR


def _parse_frame_size_arg(value: str) -> tuple[int, int]:
    try:
        w, h = value.lower().split("x")
        return (int(w), int(h))
    except ValueError:
        raise click.BadParameter(f"expected WxH, got '{value}'") from None


def _parse_machine_arg(value: str) -> ReferenceMachine:
    parts = value.split(",")
    if len(parts) != 4:
        raise click.BadParameter("expected cpu_cores,memory_gb,gpu_cores,gpu_memory_gb")
    cpu, mem, gpu, gpu_mem = (float(p) for p in parts)
    return ReferenceMachine(cpu, mem, gpu, gpu_mem)


_input_path = click.Path(exists=True, dir_okay=False)


@click.group()
@click.version_option(package_name="streamplan")
def main():
    """Cost-minimizing cloud instance planner for stream analysis workloads."""


@main.command("plan")
@click.option("--catalog", "catalog_path", required=True, type=_input_path,
              help="Instance catalog JSON.")
@click.option("--profiles", "profiles_path", required=True, type=_input_path,
              help="Profile store JSON.")
@click.option("--workload", "workload_path", required=True, type=_input_path,
              help="Workload JSON.")
@click.option("--strategy", type=click.Choice(["st1", "st2", "st3"]), default="st3",
              show_default=True, help="Which instance types to consider.")
@click.option("--headroom", type=float, default=0.9, show_default=True,
              help="Fraction of raw capacity the planner may use.")
@click.option("--max-nodes", type=int, default=10_000_000, show_default=True,
              help="Branch-and-bound node budget.")
@click.option("--time-budget", type=float, default=60.0, show_default=True,
              help="Branch-and-bound time budget in seconds.")
@click.option("--out", default="-", show_default=True, help="Output path, or - for stdout.")
def cmd_plan(catalog_path, profiles_path, workload_path, strategy, headroom,
             max_nodes, time_budget, out):
    """Compute a minimum-cost allocation plan for a workload."""
    try:
        catalog = load_catalog(catalog_path)
        profiles = load_profiles(profiles_path)
        workload = load_workload(workload_path)
        limits = SolverLimits(max_nodes=max_nodes, time_budget=time_budget)
        plan = plan_workload(workload, catalog, profiles, get_strategy(strategy),
                             headroom, limits)
    except InfeasibleError as exc:
        _emit({"infeasible": True, "reason": str(exc), "failures": exc.failures}, out)
        _human(f"infeasible: {exc}", out)
        sys.exit(EXIT_INFEASIBLE)
    except _INPUT_ERRORS as exc:
        sys.exit(_fail_input(exc))
    _emit(plan_to_doc(plan), out)
    _human(f"hourly cost: ${cost_str(plan.hourly_cost)}", out)
    sys.exit(EXIT_OK)


@main.command("compare")
@click.option("--catalog", "catalog_path", required=True, type=_input_path,
              help="Instance catalog JSON.")
@click.option("--profiles", "profiles_path", required=True, type=_input_path,
              help="Profile store JSON.")
@click.option("--workload", "workload_path", required=True, type=_input_path,
              help="Workload JSON.")
@click.option("--headroom", type=float, default=0.9, show_default=True,
              help="Fraction of raw capacity the planner may use.")
@click.option("--max-nodes", type=int, default=10_000_000, show_default=True,
              help="Branch-and-bound node budget.")
@click.option("--time-budget", type=float, default=60.0, show_default=True,
              help="Branch-and-bound time budget in seconds.")
@click.option("--out", default="-", show_default=True, help="Output path, or - for stdout.")
@click.option("--report-dir", type=click.Path(file_okay=False), default=None,
              help="Directory for CSV and figure output.")
def cmd_compare(catalog_path, profiles_path, workload_path, headroom,
                max_nodes, time_budget, out, report_dir):
    """Plan under every strategy and compare costs and savings."""
    try:
        catalog = load_catalog(catalog_path)
        profiles = load_profiles(profiles_path)
        workload = load_workload(workload_path)
        limits = SolverLimits(max_nodes=max_nodes, time_budget=time_budget)
        outcomes = compare_strategies(workload, catalog, profiles, headroom, limits)
    except _INPUT_ERRORS as exc:
        sys.exit(_fail_input(exc))
    rows = []
    for outcome in outcomes:
        if outcome.plan is None:
            rows.append({
                "strategy": outcome.strategy.name,
                "status": "fail",
                "reason": outcome.failure,
            })
        else:
            non_gpu, gpu = report_mod.instance_counts(outcome, catalog)
            rows.append({
                "strategy": outcome.strategy.name,
                "status": "ok",
                "non_gpu_instances": non_gpu,
                "gpu_instances": gpu,
                "instances": outcome.plan.instance_type_counts(),
                "hourly_cost": cost_str(outcome.plan.hourly_cost),
                "savings_pct": outcome.savings_pct,
            })
    _emit({"headroom": headroom, "rows": rows}, out)
    header = f"{'strategy':<9} {'instances':<28} {'hourly cost':>12} {'savings':>8}"
    lines = [header, "-" * len(header)]
    for outcome in outcomes:
        if outcome.plan is None:
            lines.append(f"{outcome.strategy.name:<9} FAIL: {outcome.failure}")
        else:
            counts = ", ".join(
                f"{n}x {name}" for name, n in sorted(outcome.plan.instance_type_counts().items())
            ) or "(none)"
            lines.append(
                f"{outcome.strategy.name:<9} {counts:<28} "
                f"${cost_str(outcome.plan.hourly_cost):>11} {outcome.savings_pct:>7}%"
            )
    _human("\n".join(lines), out)
    if report_dir is not None:
        paths = report_mod.write_compare_report(report_dir, outcomes, catalog)
        _human("report files: " + ", ".join(str(p) for p in paths), out)
    sys.exit(EXIT_OK)


@main.command("simulate")
@click.option("--plan", "plan_path", required=True, type=_input_path,
              help="Plan JSON produced by the plan command.")
@click.option("--catalog", "catalog_path", required=True, type=_input_path,
              help="Instance catalog JSON.")
@click.option("--profiles", "profiles_path", required=True, type=_input_path,
              help="Profile store JSON.")
@click.option("--workload", "workload_path", required=True, type=_input_path,
              help="Workload JSON.")
@click.option("--headroom", type=float, default=0.9, show_default=True,
              help="Utilization limit used for the violation audit.")
@click.option("--out", default="-", show_default=True, help="Output path, or - for stdout.")
@click.option("--report-dir", type=click.Path(file_okay=False), default=None,
              help="Directory for CSV and figure output.")
def cmd_simulate(plan_path, catalog_path, profiles_path, workload_path, headroom, out, report_dir):
    """Evaluate a plan's utilization and per-stream performance."""
    try:
        catalog = load_catalog(catalog_path)
        profiles = load_profiles(profiles_path)
        workload = load_workload(workload_path)
        plan = load_plan(plan_path)
        result = simulate(plan, workload, profiles, catalog)
        violations = check_plan(plan, workload, profiles, catalog, headroom)
    except _INPUT_ERRORS as exc:
        sys.exit(_fail_input(exc))
    doc = result.to_doc()
    doc["violations"] = [str(v) for v in violations]
    _emit(doc, out)
    _human(f"overall performance: {result.overall_performance:.3f}", out)
    for violation in violations:
        _human(f"violation: {violation}", out)
    if report_dir is not None:
        paths = report_mod.write_simulation_report(
            report_dir, result, catalog.dimension_names(), headroom
        )
        _human("report files: " + ", ".join(str(p) for p in paths), out)
    sys.exit(EXIT_PERFORMANCE if result.overall_performance < 0.9 else EXIT_OK)


@main.command("profile-fit")
@click.option("--samples", "samples_path", type=_input_path, default=None,
              help="Test-run sample JSON.")
@click.option("--program", required=True, help="Program identifier.")
@click.option("--device", type=click.Choice(list(DEVICES)), required=True)
@click.option("--frame-size", required=True, help="Frame size as WxH, e.g. 640x480.")
@click.option("--reference-machine", "machine_spec", required=True,
              help="cpu_cores,memory_gb,gpu_cores,gpu_memory_gb of the test machine.")
@click.option("--max-rate", type=float, default=None,
              help="Measured max achievable FPS for this device.")
@click.option("--out", "store_path", required=True,
              help="Profile store JSON to create or merge into.")
@click.option("--synthetic-from", "truth_store", type=_input_path, default=None,
              help="Generate samples from the matching profile in this store instead of --samples.")
@click.option("--rate", type=float, default=None, help="Synthetic test-run frame rate.")
@click.option("--n-samples", type=int, default=5, show_default=True,
              help="Synthetic sample count.")
@click.option("--noise-sd", type=float, default=0.0, show_default=True,
              help="Gaussian noise on synthetic utilization fractions.")
@click.option("--seed", type=int, default=0, show_default=True,
              help="Seed for synthetic sample generation.")
def cmd_profile_fit(samples_path, program, device, frame_size, machine_spec, max_rate,
                    store_path, truth_store, rate, n_samples, noise_sd, seed):
    """Fit a resource profile from test-run samples and store it."""
    try:
        size = _parse_frame_size_arg(frame_size)
        machine = _parse_machine_arg(machine_spec)
        if (samples_path is None) == (truth_store is None):
            raise ValidationError("exactly one of --samples or --synthetic-from is required")
        if truth_store is not None:
            if rate is None:
                raise ValidationError("--synthetic-from requires --rate")
            truth = load_profiles(truth_store).get(program, size, device)
            if truth is None:
                raise ValidationError(
                    f"no {device} profile for '{program}' at {frame_size} in {truth_store}"
                )
            samples = generate_test_run(truth, rate, n_samples, noise_sd, seed)
        else:
            samples = load_samples(samples_path)
        profile = fit_profile(samples, device, size, machine,
                              program=program, max_rate=max_rate)
        if all(v == 0.0 for v in profile.reference_utilization.values()):
            click.echo("warning: fitted profile has all-zero utilization", err=True)
        store = ProfileStore()
        if Path(store_path).exists():
            store = load_profiles(store_path)
        store.add(profile, replace=True)
        save_profiles(store, store_path)
    except _INPUT_ERRORS as exc:
        sys.exit(_fail_input(exc))
    click.echo(_dump(profile_to_doc(profile)), nl=False)
    slopes = {
        kind: profile.reference_utilization[kind] / profile.reference_rate
        for kind, mode in profile.scaling.items()
        if mode == SCALE_LINEAR
    }
    slope_text = ", ".join(f"{k}={v:.6f}/fps" for k, v in sorted(slopes.items()))
    click.echo(f"fitted {profile.key_str()}: {slope_text}", err=True)
    p_cpu, p_gpu = store.pair(program, size)
    if p_cpu is not None and p_gpu is not None and p_cpu.max_rate and p_gpu.max_rate:
        click.echo(
            f"speedup (gpu-assisted vs cpu-only): {speedup(p_cpu, p_gpu):.2f}", err=True
        )
    sys.exit(EXIT_OK)


@main.command("validate")
@click.option("--catalog", "catalog_path", type=_input_path, default=None)
@click.option("--profiles", "profiles_path", type=_input_path, default=None)
@click.option("--workload", "workload_path", type=_input_path, default=None)
@click.option("--plan", "plan_path", type=_input_path, default=None)
def cmd_validate(catalog_path, profiles_path, workload_path, plan_path):
    """Schema-check catalog, profile, workload, or plan documents."""
    targets = [
        ("catalog", catalog_path, load_catalog),
        ("profiles", profiles_path, load_profiles),
        ("workload", workload_path, load_workload),
        ("plan", plan_path, load_plan),
    ]
    if all(path is None for _, path, _ in targets):
        click.echo("error: nothing to validate (pass --catalog/--profiles/--workload/--plan)",
                   err=True)
        sys.exit(EXIT_INPUT_ERROR)
    status = EXIT_OK
    for kind, path, loader in targets:
        if path is None:
            continue
        try:
            loader(path)
            click.echo(f"{kind} {path}: ok")
        except (StreamPlanError, OSError, ValueError) as exc:
            click.echo(f"{kind} {path}: error: {exc}")
            status = EXIT_INPUT_ERROR
    sys.exit(status)


if __name__ == "__main__":
    main()
