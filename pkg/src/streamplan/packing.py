"""Multiple-choice vector bin packing problem types.

Shared language between the model (which builds instances from workloads)
and the solvers.  An item is one stream; each of its choices is a candidate
demand vector (CPU execution, or GPU execution pinned to one slot); a bin
type is an instance type with effective capacity and hourly cost.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal

from .catalog import ResourceVector
from .errors import ValidationError

# Absolute slack, in resource units, for all capacity comparisons.
CAPACITY_SLACK = 1e-6


@dataclass(frozen=True)
class Choice:
    """One candidate demand vector for an item.

    ``slot`` is the GPU slot index the demand is pinned to, or None for a
    CPU-execution choice.
    """

    choice_id: str
    demand: ResourceVector
    slot: int | None = None


@dataclass(frozen=True)
class PackingItem:
    item_id: str
    choices: tuple[Choice, ...]

    def __post_init__(self):
        if not self.choices:
            raise ValidationError(f"item '{self.item_id}' has no choices")
        object.__setattr__(self, "choices", tuple(self.choices))


@dataclass(frozen=True)
class BinType:
    name: str
    capacity: ResourceVector
    cost: Decimal

    def __post_init__(self):
        if self.cost <= 0:
            raise ValidationError(f"bin type '{self.name}' must have positive cost")


@dataclass(frozen=True)
class PackingInstance:
    """A multiple-choice vector bin packing instance.

    ``slot_dims`` lists the (cores, memory) dimension pairs of interchangeable
    GPU slots; solvers may exploit it for symmetry breaking.  Empty for
    instances without slot structure.
    """

    dims: int
    bin_types: tuple[BinType, ...]
    items: tuple[PackingItem, ...]
    slot_dims: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if self.dims < 1:
            raise ValidationError("instance needs at least one dimension")
        if not self.bin_types:
            raise ValidationError("instance needs at least one bin type")
        for bt in self.bin_types:
            if bt.capacity.dims != self.dims:
                raise ValidationError(
                    f"bin type '{bt.name}' capacity has {bt.capacity.dims} dims, expected {self.dims}"
                )
        seen = set()
        for item in self.items:
            if item.item_id in seen:
                raise ValidationError(f"duplicate item id '{item.item_id}'")
            seen.add(item.item_id)
            for choice in item.choices:
                if choice.demand.dims != self.dims:
                    raise ValidationError(
                        f"item '{item.item_id}' choice '{choice.choice_id}' has wrong dimension"
                    )
        object.__setattr__(self, "bin_types", tuple(self.bin_types))
        object.__setattr__(self, "items", tuple(self.items))
        object.__setattr__(self, "slot_dims", tuple(tuple(p) for p in self.slot_dims))

    @property
    def n_items(self) -> int:
        return len(self.items)

    def item(self, item_id: str) -> PackingItem:
        for it in self.items:
            if it.item_id == item_id:
                return it
        raise ValidationError(f"unknown item id '{item_id}'")


def choice_fits(choice: Choice, capacity: ResourceVector, slack: float = CAPACITY_SLACK) -> bool:
    return choice.demand.fits_within(capacity, slack)
