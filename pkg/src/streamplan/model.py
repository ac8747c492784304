"""Workload modeling: streams to packing instances, solutions to plans.

A stream request names a program, frame size, and desired frame rate.  Under
a strategy (which instance types are allowed) each stream turns into a
packing item with up to ``1 + n_max`` choices: CPU execution plus one per
GPU slot.  Choices that cannot run (rate above the device ceiling) or cannot
fit (demand beyond every allowed instance) are eliminated; a stream with no
surviving choice makes the whole workload infeasible under that strategy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from decimal import Decimal, ROUND_HALF_UP
from pathlib import Path

from .catalog import Catalog, InstanceType, capacity_vector, cost_str, gpu_core_dim, gpu_memory_dim, parse_cost
from .errors import ContractError, InfeasibleError, SchemaError, ValidationError
from .packing import BinType, Choice, PackingInstance, PackingItem, choice_fits
from .profiles import DEVICE_CPU, DEVICE_GPU, ProfileStore, demand_vector, rate_feasible
from .solver import Solution, SolverLimits, solve_exact, verify

DEFAULT_HEADROOM = 0.9

CHOICE_CPU = "cpu"


def gpu_choice_id(slot: int) -> str:
    return f"gpu:{slot}"


def parse_device(device: str) -> int | None:
    """Device string to GPU slot index (None for CPU execution)."""
    if device == CHOICE_CPU:
        return None
    if device.startswith("gpu:"):
        try:
            slot = int(device[4:])
        except ValueError:
            raise ValidationError(f"bad device string '{device}'") from None
        if slot < 0:
            raise ValidationError(f"bad device string '{device}'")
        return slot
    raise ValidationError(f"bad device string '{device}'")


@dataclass(frozen=True)
class StreamRequest:
    """One requested analysis: possibly several identical camera streams."""

    stream_id: str
    program: str
    frame_size: tuple[int, int]
    desired_rate: float
    replicas: int = 1

    def __post_init__(self):
        if not self.stream_id:
            raise ValidationError("stream_id must be nonempty")
        if self.desired_rate <= 0:
            raise ValidationError(f"{self.stream_id}: desired_rate must be > 0")
        if self.replicas < 1:
            raise ValidationError(f"{self.stream_id}: replicas must be >= 1")
        object.__setattr__(
            self, "frame_size", (int(self.frame_size[0]), int(self.frame_size[1]))
        )


@dataclass(frozen=True)
class ExpandedStream:
    """One concrete stream after replica expansion."""

    item_id: str
    request: StreamRequest


def expand_workload(workload: list[StreamRequest]) -> list[ExpandedStream]:
    """Expand replicas into individually named streams.

    Single-replica requests keep their id; replicas get ``-1``, ``-2``, ...
    suffixes.  Expanded ids must stay unique.
    """
    expanded = []
    for req in workload:
        if req.replicas == 1:
            expanded.append(ExpandedStream(req.stream_id, req))
        else:
            for k in range(req.replicas):
                expanded.append(ExpandedStream(f"{req.stream_id}-{k + 1}", req))
    seen = set()
    for stream in expanded:
        if stream.item_id in seen:
            raise ValidationError(f"expanded stream id collision: '{stream.item_id}'")
        seen.add(stream.item_id)
    return expanded


@dataclass(frozen=True)
class Strategy:
    """Which instance types an allocation run may use."""

    name: str
    description: str

    def allows(self, t: InstanceType) -> bool:
        if self.name == "st1":
            return not t.has_gpu
        if self.name == "st2":
            return t.has_gpu
        return True


ST1 = Strategy("st1", "non-GPU instances only")
ST2 = Strategy("st2", "GPU instances only")
ST3 = Strategy("st3", "both GPU and non-GPU instances")
STRATEGIES = {s.name: s for s in (ST1, ST2, ST3)}


def get_strategy(name: str) -> Strategy:
    try:
        return STRATEGIES[name.lower()]
    except KeyError:
        raise ValidationError(f"unknown strategy '{name}' (expected st1, st2, or st3)") from None


def build_instance(
    workload: list[StreamRequest],
    catalog: Catalog,
    profiles: ProfileStore,
    strategy: Strategy,
    headroom: float = DEFAULT_HEADROOM,
) -> PackingInstance:
    """Encode a workload as a multiple-choice vector bin packing instance.

    Bin types are the strategy-allowed instances at ``headroom`` times their
    raw capacity.  Raises InfeasibleError naming each stream that ends up
    with no executable, placeable choice.
    """
    if not 0 < headroom <= 1:
        raise ValidationError(f"headroom must be in (0, 1], got {headroom}")
    allowed = [t for t in catalog.instance_types if strategy.allows(t)]
    if not allowed:
        raise InfeasibleError(f"strategy {strategy.name} admits no instance type in the catalog")
    n_max = catalog.n_max
    bin_types = tuple(
        BinType(t.name, capacity_vector(t, n_max).scaled(headroom), t.hourly_cost)
        for t in allowed
    )

    items = []
    failures = []
    for stream in expand_workload(workload):
        req = stream.request
        p_cpu = profiles.get(req.program, req.frame_size, DEVICE_CPU)
        p_gpu = profiles.get(req.program, req.frame_size, DEVICE_GPU)
        if p_cpu is None and p_gpu is None:
            w, h = req.frame_size
            raise ValidationError(
                f"no profile for program '{req.program}' at {w}x{h} on any device"
            )
        choices = []
        reasons = []
        if p_cpu is None:
            reasons.append("no cpu profile")
        elif not rate_feasible(p_cpu, req.desired_rate):
            reasons.append(
                f"desired {req.desired_rate:.2f} FPS > cpu max {p_cpu.max_rate:.2f} FPS"
            )
        else:
            demand = demand_vector(p_cpu, req.desired_rate, n_max)
            if any(choice_fits(Choice(CHOICE_CPU, demand), bt.capacity) for bt in bin_types):
                choices.append(Choice(CHOICE_CPU, demand))
            else:
                reasons.append("cpu demand exceeds every allowed instance capacity")
        if p_gpu is None:
            reasons.append("no gpu profile")
        elif not rate_feasible(p_gpu, req.desired_rate):
            reasons.append(
                f"desired {req.desired_rate:.2f} FPS > gpu max {p_gpu.max_rate:.2f} FPS"
            )
        else:
            slot_choices = []
            for g in range(n_max):
                demand = demand_vector(p_gpu, req.desired_rate, n_max, gpu_slot=g)
                choice = Choice(gpu_choice_id(g), demand, slot=g)
                if any(choice_fits(choice, bt.capacity) for bt in bin_types):
                    slot_choices.append(choice)
            if slot_choices:
                choices.extend(slot_choices)
            else:
                reasons.append("gpu demand exceeds every allowed instance capacity")
        if not choices:
            failures.append(
                {
                    "stream_id": stream.item_id,
                    "program": req.program,
                    "desired_rate_fps": req.desired_rate,
                    "reasons": reasons,
                }
            )
        else:
            items.append(PackingItem(stream.item_id, tuple(choices)))
    if failures:
        grouped: dict[tuple, list[str]] = {}
        for f in failures:
            key = (f["program"], f["desired_rate_fps"], tuple(f["reasons"]))
            grouped.setdefault(key, []).append(f["stream_id"])
        lines = []
        for (program, rate, reasons), stream_ids in grouped.items():
            names = ", ".join(f"'{s}'" for s in stream_ids[:3])
            if len(stream_ids) > 3:
                names += f", ... ({len(stream_ids)} streams)"
            lines.append(
                f"no feasible choice for stream {names} "
                f"({program} @ {rate:.2f} FPS): " + "; ".join(reasons)
            )
        raise InfeasibleError("; ".join(lines), failures=failures)
    slot_dims = tuple((gpu_core_dim(g), gpu_memory_dim(g)) for g in range(n_max))
    return PackingInstance(
        dims=2 + 2 * n_max,
        bin_types=bin_types,
        items=tuple(items),
        slot_dims=slot_dims,
    )


@dataclass(frozen=True)
class PlanInstance:
    type_name: str
    ordinal: int


@dataclass(frozen=True)
class Plan:
    """Concrete allocation: opened instances and stream assignments."""

    instances: tuple[PlanInstance, ...]
    assignments: dict[str, tuple[int, str]]  # stream id -> (ordinal, device)
    hourly_cost: Decimal

    def __post_init__(self):
        ordinals = [inst.ordinal for inst in self.instances]
        if sorted(ordinals) != list(range(len(ordinals))):
            raise ValidationError("plan instance ordinals must be 0..n-1")
        for stream_id, (ordinal, device) in self.assignments.items():
            if not 0 <= ordinal < len(self.instances):
                raise ValidationError(f"assignment of '{stream_id}' references unknown instance {ordinal}")
            parse_device(device)
        object.__setattr__(self, "instances", tuple(sorted(self.instances, key=lambda i: i.ordinal)))

    def instance_type_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for inst in self.instances:
            counts[inst.type_name] = counts.get(inst.type_name, 0) + 1
        return counts

    def validate_against(self, catalog: Catalog):
        """Check instance names, GPU slots, and cost against a catalog."""
        total = Decimal("0.000")
        for inst in self.instances:
            total += catalog.get(inst.type_name).hourly_cost
        if total != self.hourly_cost:
            raise ContractError(
                f"plan cost {self.hourly_cost} != sum of instance costs {total}"
            )
        for stream_id, (ordinal, device) in self.assignments.items():
            slot = parse_device(device)
            if slot is not None:
                t = catalog.get(self.instances[ordinal].type_name)
                if slot >= len(t.gpus):
                    raise ContractError(
                        f"stream '{stream_id}' assigned to missing GPU slot {slot} on {t.name}"
                    )


def solution_to_plan(solution: Solution, inst: PackingInstance) -> Plan:
    """Convert a verified solver solution into a deployment plan.

    Instance ordinals are renumbered stably: sorted by type name, then by
    the order bins were opened.
    """
    if not verify(inst, solution):
        raise ContractError("solution does not satisfy the packing instance")
    opened = [(inst.bin_types[t].name, b) for b, t in enumerate(solution.opened_bins)]
    order = sorted(range(len(opened)), key=lambda b: (opened[b][0], opened[b][1]))
    new_ordinal = {old: new for new, old in enumerate(order)}
    instances = tuple(
        PlanInstance(opened[old][0], new_ordinal[old]) for old in order
    )
    assignments = {
        item_id: (new_ordinal[ordinal], device)
        for item_id, (ordinal, device) in solution.placement.items()
    }
    return Plan(instances, assignments, solution.total_cost)


def plan_to_solution(plan: Plan, inst: PackingInstance) -> Solution:
    """Re-express a plan as a solution against the instance it solves."""
    type_index = {bt.name: i for i, bt in enumerate(inst.bin_types)}
    try:
        opened = tuple(type_index[p.type_name] for p in plan.instances)
    except KeyError as exc:
        raise ContractError(f"plan references bin type {exc} not in the instance") from None
    solution = Solution(opened, dict(plan.assignments), plan.hourly_cost, optimal=False)
    if not verify(inst, solution):
        raise ContractError("plan is not feasible for the packing instance")
    return solution


def plan_workload(
    workload: list[StreamRequest],
    catalog: Catalog,
    profiles: ProfileStore,
    strategy: Strategy,
    headroom: float = DEFAULT_HEADROOM,
    limits: SolverLimits | None = None,
) -> Plan:
    """End-to-end planning: build the instance, solve exactly, emit the plan."""
    if not workload:
        return Plan((), {}, Decimal("0.000"))
    inst = build_instance(workload, catalog, profiles, strategy, headroom)
    solution = solve_exact(inst, limits)
    return solution_to_plan(solution, inst)


@dataclass(frozen=True)
class StrategyOutcome:
    """One row of a strategy comparison."""

    strategy: Strategy
    plan: Plan | None
    failure: str | None
    savings_pct: int | None

    @property
    def feasible(self) -> bool:
        return self.plan is not None


def _savings_pct(cost: Decimal, worst: Decimal) -> int:
    if worst == 0:
        return 0
    fraction = (Decimal(1) - cost / worst) * Decimal(100)
    return int(fraction.quantize(Decimal("1"), rounding=ROUND_HALF_UP))


def compare_strategies(
    workload: list[StreamRequest],
    catalog: Catalog,
    profiles: ProfileStore,
    headroom: float = DEFAULT_HEADROOM,
    limits: SolverLimits | None = None,
) -> list[StrategyOutcome]:
    """Plan the workload under every strategy and score cost savings.

    Savings are measured against the most expensive feasible strategy and
    rounded half-up to whole percent.  Infeasible strategies become failure
    rows, not errors.
    """
    results = []
    for strategy in (ST1, ST2, ST3):
        try:
            plan = plan_workload(workload, catalog, profiles, strategy, headroom, limits)
            results.append((strategy, plan, None))
        except InfeasibleError as exc:
            results.append((strategy, None, str(exc)))
    feasible_costs = [plan.hourly_cost for _, plan, _ in results if plan is not None]
    worst = max(feasible_costs) if feasible_costs else None
    outcomes = []
    for strategy, plan, failure in results:
        savings = _savings_pct(plan.hourly_cost, worst) if plan is not None else None
        outcomes.append(StrategyOutcome(strategy, plan, failure, savings))
    return outcomes


def parse_workload(data) -> list[StreamRequest]:
    if not isinstance(data, list):
        raise SchemaError("workload document must be a JSON list")
    requests = []
    seen = set()
    for i, entry in enumerate(data):
        context = f"workload entry {i}"
        if not isinstance(entry, dict):
            raise SchemaError(f"{context}: expected an object")
        for key in ("stream_id", "program", "frame_size", "desired_rate_fps"):
            if key not in entry:
                raise SchemaError(f"{context}: missing field '{key}'")
        frame = entry["frame_size"]
        if not isinstance(frame, dict) or "w" not in frame or "h" not in frame:
            raise SchemaError(f"{context}: frame_size must be an object with 'w' and 'h'")
        req = StreamRequest(
            stream_id=entry["stream_id"],
            program=entry["program"],
            frame_size=(int(frame["w"]), int(frame["h"])),
            desired_rate=float(entry["desired_rate_fps"]),
            replicas=int(entry.get("replicas", 1)),
        )
        if req.stream_id in seen:
            raise ValidationError(f"duplicate stream_id '{req.stream_id}'")
        seen.add(req.stream_id)
        requests.append(req)
    return requests


def load_workload(source) -> list[StreamRequest]:
    if isinstance(source, (str, Path)):
        try:
            with open(source, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{source}: invalid JSON: {exc}") from None
        return parse_workload(data)
    return parse_workload(source)


def workload_to_doc(workload: list[StreamRequest]) -> list[dict]:
    return [
        {
            "stream_id": r.stream_id,
            "program": r.program,
            "frame_size": {"w": r.frame_size[0], "h": r.frame_size[1]},
            "desired_rate_fps": r.desired_rate,
            "replicas": r.replicas,
        }
        for r in workload
    ]


def plan_to_doc(plan: Plan) -> dict:
    return {
        "instances": [
            {"type": inst.type_name, "ordinal": inst.ordinal} for inst in plan.instances
        ],
        "assignments": [
            {"stream_id": sid, "instance": ordinal, "device": device}
            for sid, (ordinal, device) in sorted(plan.assignments.items())
        ],
        "hourly_cost": cost_str(plan.hourly_cost),
    }


def parse_plan(data) -> Plan:
    if not isinstance(data, dict):
        raise SchemaError("plan document must be a JSON object")
    for key in ("instances", "assignments", "hourly_cost"):
        if key not in data:
            raise SchemaError(f"plan document: missing field '{key}'")
    instances = tuple(
        PlanInstance(entry["type"], int(entry["ordinal"])) for entry in data["instances"]
    )
    assignments = {}
    for entry in data["assignments"]:
        for key in ("stream_id", "instance", "device"):
            if key not in entry:
                raise SchemaError(f"plan assignment: missing field '{key}'")
        if entry["stream_id"] in assignments:
            raise ValidationError(f"stream '{entry['stream_id']}' assigned more than once")
        assignments[entry["stream_id"]] = (int(entry["instance"]), entry["device"])
    return Plan(instances, assignments, parse_cost(data["hourly_cost"]))


def load_plan(source) -> Plan:
    if isinstance(source, (str, Path)):
        try:
            with open(source, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{source}: invalid JSON: {exc}") from None
        return parse_plan(data)
    return parse_plan(source)
