"""Analytic plan evaluation: utilization, performance, and synthetic runs.

Steady-state model: per-instance demand is the sum of its streams' demand
vectors at their desired rates, and utilization is reported against raw
capacity.  A stream delivers its desired rate unless its device ceiling or
an overloaded dimension throttles it; overload is shared proportionally, so
overfilling a dimension by factor f cuts every stream touching it to 1/f.
Degradation starts past raw capacity; the planner's headroom keeps normal
operation well below that.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .catalog import Catalog, capacity_vector
from .errors import ContractError, ValidationError
from .model import Plan, StreamRequest, expand_workload, parse_device
from .profiles import (
    DEVICE_CPU,
    DEVICE_GPU,
    KINDS,
    Profile,
    ProfileStore,
    TestRunSample,
    demand_fraction,
    demand_vector,
)

_TOL = 1e-9


@dataclass(frozen=True)
class InstanceUtilization:
    ordinal: int
    type_name: str
    utilization: tuple[float, ...]


@dataclass(frozen=True)
class SimulationReport:
    per_instance: tuple[InstanceUtilization, ...]
    per_stream: dict[str, float]
    overall_performance: float

    def to_doc(self) -> dict:
        return {
            "per_instance": [
                {
                    "ordinal": u.ordinal,
                    "type": u.type_name,
                    "utilization": list(u.utilization),
                }
                for u in self.per_instance
            ],
            "per_stream": [
                {"stream_id": sid, "performance": perf}
                for sid, perf in sorted(self.per_stream.items())
            ],
            "overall_performance": self.overall_performance,
        }


@dataclass(frozen=True)
class Violation:
    """One headroom or rate-cap breach found by check_plan."""

    kind: str  # "utilization" | "rate"
    instance: int | None
    dimension: str | None
    stream_id: str | None
    value: float
    limit: float

    def __str__(self) -> str:
        if self.kind == "utilization":
            return (
                f"instance {self.instance}: {self.dimension} utilization "
                f"{self.value:.3f} exceeds headroom {self.limit:.2f}"
            )
        return (
            f"stream '{self.stream_id}': desired {self.value:.2f} FPS exceeds "
            f"device max {self.limit:.2f} FPS"
        )


def _stream_profile(profiles: ProfileStore, req: StreamRequest, device: str) -> Profile:
    slot = parse_device(device)
    kind = DEVICE_CPU if slot is None else DEVICE_GPU
    profile = profiles.get(req.program, req.frame_size, kind)
    if profile is None:
        raise ContractError(
            f"no {kind} profile for '{req.program}' at "
            f"{req.frame_size[0]}x{req.frame_size[1]}"
        )
    return profile


def _gather(plan: Plan, workload: list[StreamRequest], profiles: ProfileStore, catalog: Catalog):
    """Resolve plan against workload: per-instance capacity and demands."""
    expanded = expand_workload(workload)
    assigned = set(plan.assignments)
    ids = {s.item_id for s in expanded}
    if ids != assigned:
        missing = sorted(ids - assigned)
        extra = sorted(assigned - ids)
        detail = []
        if missing:
            detail.append(f"unassigned streams: {', '.join(missing)}")
        if extra:
            detail.append(f"assignments for unknown streams: {', '.join(extra)}")
        raise ContractError("plan does not cover the workload: " + "; ".join(detail))
    plan.validate_against(catalog)
    n_max = catalog.n_max
    capacities = [
        capacity_vector(catalog.get(inst.type_name), n_max).values
        for inst in plan.instances
    ]
    demands = [[0.0] * (2 + 2 * n_max) for _ in plan.instances]
    stream_info = []
    for stream in expanded:
        ordinal, device = plan.assignments[stream.item_id]
        profile = _stream_profile(profiles, stream.request, device)
        slot = parse_device(device)
        vec = demand_vector(profile, stream.request.desired_rate, n_max, gpu_slot=slot)
        for d, value in enumerate(vec):
            demands[ordinal][d] += value
        stream_info.append((stream, ordinal, profile, vec))
    return capacities, demands, stream_info


def simulate(
    plan: Plan,
    workload: list[StreamRequest],
    profiles: ProfileStore,
    catalog: Catalog,
) -> SimulationReport:
    """Evaluate a plan: utilization per instance, performance per stream.

    Performance is min(1, rate-cap factor, bottleneck factor); every stream
    with demand on an overloaded dimension shares the same slowdown.
    """
    capacities, demands, stream_info = _gather(plan, workload, profiles, catalog)
    per_instance = []
    for b, inst in enumerate(plan.instances):
        utilization = []
        for d, cap in enumerate(capacities[b]):
            demand = demands[b][d]
            if cap <= 0:
                if demand > _TOL:
                    raise ContractError(
                        f"instance {inst.ordinal} ({inst.type_name}) has demand on an absent resource"
                    )
                utilization.append(0.0)
            else:
                utilization.append(demand / cap)
        per_instance.append(InstanceUtilization(inst.ordinal, inst.type_name, tuple(utilization)))
    per_stream = {}
    for stream, ordinal, profile, vec in stream_info:
        rate_factor = 1.0
        if profile.max_rate is not None:
            rate_factor = profile.max_rate / stream.request.desired_rate
        bottleneck = 1.0
        for d, demand in enumerate(vec):
            if demand <= 0:
                continue
            total = demands[ordinal][d]
            cap = capacities[ordinal][d]
            if total > cap:
                bottleneck = min(bottleneck, cap / total)
        per_stream[stream.item_id] = min(1.0, rate_factor, bottleneck)
    overall = (
        sum(per_stream.values()) / len(per_stream) if per_stream else 1.0
    )
    return SimulationReport(tuple(per_instance), per_stream, overall)


def check_plan(
    plan: Plan,
    workload: list[StreamRequest],
    profiles: ProfileStore,
    catalog: Catalog,
    headroom: float = 0.9,
) -> list[Violation]:
    """Headroom and rate-cap audit; empty list means the plan honors both."""
    capacities, demands, stream_info = _gather(plan, workload, profiles, catalog)
    dim_names = catalog.dimension_names()
    violations = []
    for b, inst in enumerate(plan.instances):
        for d, cap in enumerate(capacities[b]):
            if cap <= 0:
                continue
            if demands[b][d] > headroom * cap + 1e-6:
                violations.append(
                    Violation(
                        kind="utilization",
                        instance=inst.ordinal,
                        dimension=dim_names[d],
                        stream_id=None,
                        value=demands[b][d] / cap,
                        limit=headroom,
                    )
                )
    for stream, _, profile, _ in stream_info:
        if profile.max_rate is not None and stream.request.desired_rate > profile.max_rate:
            violations.append(
                Violation(
                    kind="rate",
                    instance=None,
                    dimension=None,
                    stream_id=stream.item_id,
                    value=stream.request.desired_rate,
                    limit=profile.max_rate,
                )
            )
    return violations


def generate_test_run(
    truth: Profile,
    rate: float,
    n_samples: int,
    noise_sd: float,
    seed: int,
    duration_s: float = 60.0,
) -> list[TestRunSample]:
    """Synthesize monitored samples from a known profile.

    Gaussian noise is added per resource kind and clamped into [0, 1];
    identical seeds give identical samples.  A real test run cannot exceed
    the program's rate ceiling, so neither can a synthetic one.
    """
    if rate <= 0:
        raise ValidationError("rate must be > 0")
    if truth.max_rate is not None and rate > truth.max_rate:
        raise ValidationError(
            f"test run at {rate} FPS exceeds the profile max of {truth.max_rate} FPS"
        )
    if noise_sd < 0:
        raise ValidationError("noise_sd must be >= 0")
    if n_samples < 1:
        raise ValidationError("n_samples must be >= 1")
    base = demand_fraction(truth, rate)
    rng = random.Random(seed)
    samples = []
    for _ in range(n_samples):
        utilization = {}
        for kind in KINDS:
            value = base[kind] + rng.gauss(0.0, noise_sd)
            utilization[kind] = min(1.0, max(0.0, value))
        samples.append(TestRunSample(rate=rate, utilization=utilization, duration=duration_s))
    return samples
