"""Instance catalog: machine classes, capacity vectors, and currency handling.

Resource vectors have a uniform layout of ``2 + 2 * n_max`` entries: CPU
cores, memory (GB), then one (cores, GB) pair per GPU slot.  ``n_max`` is the
maximum GPU count across the catalog, so every vector in one planning problem
has the same dimension.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path

from .errors import SchemaError, ValidationError

CPU_DIM = 0
MEMORY_DIM = 1


def gpu_core_dim(slot: int) -> int:
    return 2 + 2 * slot


def gpu_memory_dim(slot: int) -> int:
    return 3 + 2 * slot


def vector_length(n_max: int) -> int:
    return 2 + 2 * n_max


def dimension_names(n_max: int) -> list[str]:
    """Human-readable name per vector dimension, in vector order."""
    names = ["cpu_cores", "memory_gb"]
    for g in range(n_max):
        names += [f"gpu{g}_cores", f"gpu{g}_memory_gb"]
    return names


def parse_cost(value) -> Decimal:
    """Parse an hourly cost into an exact Decimal with at least 3 decimals.

    Costs are kept as decimals, never floats, so plan costs compare exactly.
    """
    if isinstance(value, bool) or not isinstance(value, (int, float, str, Decimal)):
        raise SchemaError(f"cost must be a number or numeric string, got {value!r}")
    try:
        cost = Decimal(str(value))
    except InvalidOperation:
        raise SchemaError(f"cost {value!r} is not a valid decimal") from None
    if not cost.is_finite():
        raise SchemaError(f"cost {value!r} is not finite")
    # Widen to 3 fractional digits; never round away finer precision.
    if cost.as_tuple().exponent > -3:
        cost = cost.quantize(Decimal("0.001"))
    return cost


def cost_str(cost: Decimal) -> str:
    """Render a cost with at least 3 fractional digits (``0.65`` -> ``0.650``)."""
    if cost.as_tuple().exponent > -3:
        cost = cost.quantize(Decimal("0.001"))
    return str(cost)


@dataclass(frozen=True)
class ResourceVector:
    """Demand or capacity vector over CPU, memory, and per-GPU-slot resources."""

    values: tuple[float, ...]

    def __post_init__(self):
        if not self.values:
            raise ValidationError("resource vector must have at least one entry")
        if any(v < 0 for v in self.values):
            raise ValidationError("resource vector entries must be nonnegative")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    @property
    def dims(self) -> int:
        return len(self.values)

    @property
    def n_slots(self) -> int:
        return max(0, (len(self.values) - 2) // 2)

    def __getitem__(self, dim: int) -> float:
        return self.values[dim]

    def __iter__(self):
        return iter(self.values)

    def __add__(self, other: "ResourceVector") -> "ResourceVector":
        if other.dims != self.dims:
            raise ValidationError("cannot add vectors of different dimension")
        return ResourceVector(tuple(a + b for a, b in zip(self.values, other.values)))

    def scaled(self, factor: float) -> "ResourceVector":
        if factor < 0:
            raise ValidationError("scale factor must be nonnegative")
        return ResourceVector(tuple(v * factor for v in self.values))

    def fits_within(self, capacity: "ResourceVector", slack: float = 0.0) -> bool:
        if capacity.dims != self.dims:
            raise ValidationError("cannot compare vectors of different dimension")
        return all(d <= c + slack for d, c in zip(self.values, capacity.values))

    def as_list(self) -> list[float]:
        return list(self.values)


@dataclass(frozen=True)
class GpuSpec:
    """One physical GPU: compute units (cores) and on-board memory."""

    gpu_cores: int
    gpu_memory_gb: float

    def __post_init__(self):
        if self.gpu_cores < 1:
            raise ValidationError("gpu_cores must be >= 1")
        if self.gpu_memory_gb <= 0:
            raise ValidationError("gpu_memory_gb must be > 0")


@dataclass(frozen=True)
class InstanceType:
    """A named machine class with per-resource capacities and an hourly cost."""

    name: str
    cpu_cores: int
    memory_gb: float
    gpus: tuple[GpuSpec, ...]
    hourly_cost: Decimal

    def __post_init__(self):
        if not self.name:
            raise ValidationError("instance type name must be nonempty")
        if self.cpu_cores < 1:
            raise ValidationError(f"{self.name}: cpu_cores must be >= 1")
        if self.memory_gb <= 0:
            raise ValidationError(f"{self.name}: memory_gb must be > 0")
        if self.hourly_cost <= 0:
            raise ValidationError(f"{self.name}: hourly_cost must be > 0")
        object.__setattr__(self, "gpus", tuple(self.gpus))

    @property
    def has_gpu(self) -> bool:
        return len(self.gpus) > 0


@dataclass(frozen=True)
class Catalog:
    """Validated set of instance types; ``n_max`` is the max GPU count."""

    instance_types: tuple[InstanceType, ...]
    n_max: int = field(init=False)

    def __post_init__(self):
        if not self.instance_types:
            raise ValidationError("catalog must contain at least one instance type")
        names = [t.name for t in self.instance_types]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise ValidationError(f"duplicate instance type names: {', '.join(dupes)}")
        object.__setattr__(self, "instance_types", tuple(self.instance_types))
        object.__setattr__(self, "n_max", max(len(t.gpus) for t in self.instance_types))

    def get(self, name: str) -> InstanceType:
        for t in self.instance_types:
            if t.name == name:
                return t
        raise ValidationError(f"unknown instance type: {name}")

    def dimension_names(self) -> list[str]:
        return dimension_names(self.n_max)


def capacity_vector(t: InstanceType, n_max: int) -> ResourceVector:
    """Capacity of an instance type as a vector of length ``2 + 2*n_max``.

    GPUs occupy the lowest slots in declaration order; unpopulated slots
    stay zero.
    """
    if len(t.gpus) > n_max:
        raise ValidationError(
            f"{t.name} has {len(t.gpus)} GPUs but the vector allows only {n_max} slots"
        )
    values = [0.0] * vector_length(n_max)
    values[CPU_DIM] = float(t.cpu_cores)
    values[MEMORY_DIM] = float(t.memory_gb)
    for g, gpu in enumerate(t.gpus):
        values[gpu_core_dim(g)] = float(gpu.gpu_cores)
        values[gpu_memory_dim(g)] = float(gpu.gpu_memory_gb)
    return ResourceVector(tuple(values))


def _require_field(entry: dict, key: str, index: int):
    if key not in entry:
        raise SchemaError(f"catalog entry {index}: missing field '{key}'")
    return entry[key]


def _parse_number(value, context: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"{context}: expected a number, got {value!r}")
    return float(value)


def parse_catalog(data) -> Catalog:
    """Build a Catalog from a parsed JSON document (a list of entries)."""
    if not isinstance(data, list):
        raise SchemaError("catalog document must be a JSON list of instance types")
    types = []
    for i, entry in enumerate(data):
        if not isinstance(entry, dict):
            raise SchemaError(f"catalog entry {i}: expected an object")
        name = _require_field(entry, "name", i)
        if not isinstance(name, str):
            raise SchemaError(f"catalog entry {i}: 'name' must be a string")
        cpu_cores = _require_field(entry, "cpu_cores", i)
        if isinstance(cpu_cores, bool) or not isinstance(cpu_cores, int):
            raise SchemaError(f"catalog entry {i}: 'cpu_cores' must be an integer")
        memory_gb = _parse_number(_require_field(entry, "memory_gb", i), f"catalog entry {i}: memory_gb")
        gpus_raw = _require_field(entry, "gpus", i)
        if not isinstance(gpus_raw, list):
            raise SchemaError(f"catalog entry {i}: 'gpus' must be a list")
        gpus = []
        for j, g in enumerate(gpus_raw):
            if not isinstance(g, dict) or "gpu_cores" not in g or "gpu_memory_gb" not in g:
                raise SchemaError(
                    f"catalog entry {i}: gpus[{j}] needs 'gpu_cores' and 'gpu_memory_gb'"
                )
            cores = g["gpu_cores"]
            if isinstance(cores, bool) or not isinstance(cores, int):
                raise SchemaError(f"catalog entry {i}: gpus[{j}].gpu_cores must be an integer")
            mem = _parse_number(g["gpu_memory_gb"], f"catalog entry {i}: gpus[{j}].gpu_memory_gb")
            gpus.append(GpuSpec(gpu_cores=cores, gpu_memory_gb=mem))
        cost = parse_cost(_require_field(entry, "hourly_cost", i))
        types.append(
            InstanceType(
                name=name,
                cpu_cores=cpu_cores,
                memory_gb=memory_gb,
                gpus=tuple(gpus),
                hourly_cost=cost,
            )
        )
    return Catalog(tuple(types))


def load_catalog(source) -> Catalog:
    """Load and validate a catalog from a JSON file path or parsed document."""
    if isinstance(source, (str, Path)):
        try:
            with open(source, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{source}: invalid JSON: {exc}") from None
        return parse_catalog(data)
    return parse_catalog(source)


def catalog_to_doc(catalog: Catalog) -> list[dict]:
    return [
        {
            "name": t.name,
            "cpu_cores": t.cpu_cores,
            "memory_gb": t.memory_gb,
            "gpus": [{"gpu_cores": g.gpu_cores, "gpu_memory_gb": g.gpu_memory_gb} for g in t.gpus],
            "hourly_cost": cost_str(t.hourly_cost),
        }
        for t in catalog.instance_types
    ]
