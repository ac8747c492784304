"""Solvers for multiple-choice vector bin packing.

Three routes with one contract:

* ``solve_heuristic`` -- multiple-choice best-fit-decreasing; fast feasible
  upper bound, never claims optimality.
* ``solve_exact`` -- depth-first branch-and-bound seeded by the heuristic;
  proves optimality unless the node/time budget runs out.
* ``brute_force`` -- exhaustive enumeration over set partitions; the test
  oracle for small instances.

All capacity comparisons use the shared absolute slack; every solver verifies
its own result before returning it.
"""

from __future__ import annotations

import itertools
import logging
import time
from dataclasses import dataclass
from decimal import Decimal

from .errors import (
    BudgetExhaustedError,
    ContractError,
    EnumerationLimitError,
    InfeasibleError,
    ValidationError,
)
from .packing import CAPACITY_SLACK, PackingInstance, PackingItem

logger = logging.getLogger(__name__)

# Margin under the incumbent below which a branch is pruned.  Costs are exact
# decimals with 0.001 granularity, so float noise in the bound cannot prune a
# strictly better completion.
_PRUNE_EPS = 1e-9

BRUTE_MAX_ITEMS = 6
BRUTE_MAX_CHOICES = 3


@dataclass(frozen=True)
class Solution:
    """Assignment of every item to one (bin, choice).

    ``opened_bins[b]`` is the bin type index of bin ordinal ``b``;
    ``placement`` maps item id to (bin ordinal, choice id).
    """

    opened_bins: tuple[int, ...]
    placement: dict[str, tuple[int, str]]
    total_cost: Decimal
    optimal: bool


@dataclass(frozen=True)
class SolverLimits:
    max_nodes: int = 10_000_000
    time_budget: float = 60.0
    optimality_required: bool = False

    def __post_init__(self):
        if self.max_nodes <= 0:
            raise ValidationError("max_nodes must be positive")
        if self.time_budget <= 0:
            raise ValidationError("time_budget must be positive")


def verify(inst: PackingInstance, solution: Solution) -> bool:
    """True iff the solution satisfies every packing constraint of ``inst``."""
    expected_ids = {it.item_id for it in inst.items}
    if set(solution.placement) != expected_ids:
        return False
    n_bins = len(solution.opened_bins)
    for type_idx in solution.opened_bins:
        if not 0 <= type_idx < len(inst.bin_types):
            return False
    usage = [[0.0] * inst.dims for _ in range(n_bins)]
    for item in inst.items:
        ordinal, choice_id = solution.placement[item.item_id]
        if not 0 <= ordinal < n_bins:
            return False
        chosen = next((c for c in item.choices if c.choice_id == choice_id), None)
        if chosen is None:
            return False
        for d in range(inst.dims):
            usage[ordinal][d] += chosen.demand[d]
    for b in range(n_bins):
        cap = inst.bin_types[solution.opened_bins[b]].capacity
        if any(usage[b][d] > cap[d] + CAPACITY_SLACK for d in range(inst.dims)):
            return False
    total = sum((inst.bin_types[t].cost for t in solution.opened_bins), Decimal("0.000"))
    return total == solution.total_cost


def _fits(usage: list[float], demand, cap) -> bool:
    return all(u + d <= c + CAPACITY_SLACK for u, d, c in zip(usage, demand, cap))


def _usable_choices(inst: PackingInstance, item: PackingItem) -> list[int]:
    """Indices of choices that fit at least one bin type standing alone."""
    zero = [0.0] * inst.dims
    usable = []
    for ci, choice in enumerate(item.choices):
        if any(_fits(zero, choice.demand.values, bt.capacity.values) for bt in inst.bin_types):
            usable.append(ci)
    return usable


def _item_sort_key(inst: PackingInstance, item: PackingItem, usable: list[int]) -> float:
    """Max over usable choices of the normalized demand against the cheapest
    fitting bin type (max over dimensions)."""
    zero = [0.0] * inst.dims
    key = 0.0
    for ci in usable:
        demand = item.choices[ci].demand.values
        fitting = [
            bt for bt in inst.bin_types if _fits(zero, demand, bt.capacity.values)
        ]
        cheapest = min(fitting, key=lambda bt: bt.cost)
        norm = max(
            (demand[d] / cheapest.capacity[d] for d in range(inst.dims) if cheapest.capacity[d] > 0),
            default=0.0,
        )
        key = max(key, norm)
    return key


def _ordered_items(inst: PackingInstance) -> list[int]:
    """Item indices in descending normalized-demand order (stable).

    Raises InfeasibleError if any item fits no bin type under any choice.
    """
    keys = []
    for idx, item in enumerate(inst.items):
        usable = _usable_choices(inst, item)
        if not usable:
            raise InfeasibleError(
                f"item '{item.item_id}' fits no bin type under any choice"
            )
        keys.append((idx, _item_sort_key(inst, item, usable)))
    return [idx for idx, _ in sorted(keys, key=lambda pair: -pair[1])]


def _empty_solution(optimal: bool) -> Solution:
    return Solution((), {}, Decimal("0.000"), optimal)


def solve_heuristic(inst: PackingInstance) -> Solution:
    """Multiple-choice best-fit-decreasing.

    Items are handled hardest-first; each takes the first zero-marginal-cost
    (open bin, choice) slot, opening the bin type with the lowest
    cost-per-normalized-capacity when nothing fits.
    """
    if not inst.items:
        return _empty_solution(False)
    order = _ordered_items(inst)
    dims = inst.dims
    caps = [bt.capacity.values for bt in inst.bin_types]
    # Normalized capacity of a type: per-dim capacity relative to the catalog
    # max, summed; scores how much packing room a dollar buys.
    max_cap = [max(c[d] for c in caps) for d in range(dims)]
    norm_cap = [
        sum(c[d] / max_cap[d] for d in range(dims) if max_cap[d] > 0) for c in caps
    ]
    open_score = [
        float(inst.bin_types[t].cost) / norm_cap[t] if norm_cap[t] > 0 else float("inf")
        for t in range(len(caps))
    ]
    bin_type_of: list[int] = []
    usage: list[list[float]] = []
    placement: dict[str, tuple[int, str]] = {}
    zero = [0.0] * dims
    for idx in order:
        item = inst.items[idx]
        placed = False
        for b in range(len(usage)):
            cap = caps[bin_type_of[b]]
            for choice in item.choices:
                if _fits(usage[b], choice.demand.values, cap):
                    for d in range(dims):
                        usage[b][d] += choice.demand[d]
                    placement[item.item_id] = (b, choice.choice_id)
                    placed = True
                    break
            if placed:
                break
        if placed:
            continue
        candidates = [
            t for t in range(len(caps))
            if any(_fits(zero, c.demand.values, caps[t]) for c in item.choices)
        ]
        if not candidates:
            raise InfeasibleError(f"item '{item.item_id}' fits no bin type under any choice")
        t = min(candidates, key=lambda t: (open_score[t], t))
        choice = next(c for c in item.choices if _fits(zero, c.demand.values, caps[t]))
        bin_type_of.append(t)
        usage.append(list(choice.demand.values))
        placement[item.item_id] = (len(usage) - 1, choice.choice_id)
    total = sum((inst.bin_types[t].cost for t in bin_type_of), Decimal("0.000"))
    solution = Solution(tuple(bin_type_of), placement, total, optimal=False)
    if not verify(inst, solution):
        raise ContractError("heuristic produced an infeasible solution")
    return solution


def lower_bound(inst: PackingInstance) -> float:
    """Admissible lower bound on the optimal total cost.

    Per dimension, the cheapest conceivable way to buy the summed minimal
    demand at the catalog's best capacity-per-cost; the max over dimensions
    never exceeds the true optimum.
    """
    if not inst.items:
        return 0.0
    dims = inst.dims
    rem = [0.0] * dims
    for item in inst.items:
        for d in range(dims):
            rem[d] += min(c.demand[d] for c in item.choices)
    best = [
        max(float(bt.capacity[d]) / float(bt.cost) for bt in inst.bin_types)
        for d in range(dims)
    ]
    bound = 0.0
    for d in range(dims):
        if rem[d] <= 0:
            continue
        if best[d] == 0:
            return float("inf")
        bound = max(bound, rem[d] / best[d])
    return bound


class _ExactSearch:
    """Depth-first branch-and-bound state for one solve."""

    def __init__(self, inst: PackingInstance, limits: SolverLimits):
        self.inst = inst
        self.limits = limits
        self.dims = inst.dims
        self.caps = [bt.capacity.values for bt in inst.bin_types]
        self.costs = [bt.cost for bt in inst.bin_types]
        self.costs_f = [float(c) for c in self.costs]
        self.order = _ordered_items(inst)
        self.items = [inst.items[i] for i in self.order]
        self.n = len(self.items)
        self.demands = [[c.demand.values for c in it.choices] for it in self.items]

        # Remaining minimal demand per dimension for item suffixes.
        self.suffix = [[0.0] * self.dims for _ in range(self.n + 1)]
        for k in range(self.n - 1, -1, -1):
            mins = [min(dem[d] for dem in self.demands[k]) for d in range(self.dims)]
            self.suffix[k] = [self.suffix[k + 1][d] + mins[d] for d in range(self.dims)]
        self.best_cpc = [
            max(self.caps[t][d] / self.costs_f[t] for t in range(len(self.caps)))
            for d in range(self.dims)
        ]

        # Identity classes: items with equal choice demand lists are
        # interchangeable and get placed in nondecreasing bin-ordinal order.
        signatures: dict[tuple, int] = {}
        self.class_of = []
        for k in range(self.n):
            sig = tuple(self.demands[k])
            self.class_of.append(signatures.setdefault(sig, len(signatures)))

        # Slot-symmetric choice variants: choice ci may be skipped in a bin
        # where some lower, equal-capacity, equally-empty slot hosts the same
        # demand via variant cj.
        self.lower_variants: list[list[list[tuple[int, int]]]] = []
        for k in range(self.n):
            per_choice = []
            for ci, choice in enumerate(self.items[k].choices):
                variants = []
                if choice.slot is not None:
                    for cj, other in enumerate(self.items[k].choices):
                        if (
                            other.slot is not None
                            and other.slot < choice.slot
                            and self._is_slot_variant(k, ci, cj)
                        ):
                            variants.append((cj, other.slot))
                per_choice.append(variants)
            self.lower_variants.append(per_choice)

        # Mutable search state.
        self.bin_type_of: list[int] = []
        self.usage: list[list[float]] = []
        self.committed = Decimal("0.000")
        self.committed_f = 0.0
        self.class_last: dict[int, int] = {}
        self.placed: list[tuple[int, int] | None] = [None] * self.n
        self.nodes = 0
        self.deadline = time.monotonic() + limits.time_budget
        self.stopped = False

        self.inc_cost: Decimal | None = None
        self.inc_cost_f = float("inf")
        self.inc_bins = 0
        self.inc_key: tuple = ()
        self.inc_opened: tuple[int, ...] = ()
        self.inc_placement: dict[str, tuple[int, str]] = {}

    def _is_slot_variant(self, k: int, ci: int, cj: int) -> bool:
        """Choice cj equals choice ci with its slot block moved to a lower slot."""
        slot_dims = self.inst.slot_dims
        choice_i = self.items[k].choices[ci]
        choice_j = self.items[k].choices[cj]
        if choice_i.slot >= len(slot_dims) or choice_j.slot >= len(slot_dims):
            return False
        hi = slot_dims[choice_i.slot]
        lo = slot_dims[choice_j.slot]
        di, dj = choice_i.demand.values, choice_j.demand.values
        for d in range(self.dims):
            if d in hi or d in lo:
                continue
            if di[d] != dj[d]:
                return False
        return (
            di[hi[0]] == dj[lo[0]]
            and di[hi[1]] == dj[lo[1]]
            and di[lo[0]] == 0.0
            and di[lo[1]] == 0.0
            and dj[hi[0]] == 0.0
            and dj[hi[1]] == 0.0
        )

    def _slot_blocked(self, k: int, ci: int, usage_row: list[float], cap) -> bool:
        """Skip a slot choice when an equivalent lower empty slot exists."""
        choice = self.items[k].choices[ci]
        if choice.slot is None or not self.lower_variants[k][ci]:
            return False
        slot_dims = self.inst.slot_dims
        hi = slot_dims[choice.slot]
        if usage_row[hi[0]] != 0.0 or usage_row[hi[1]] != 0.0:
            return False
        for _, lo_slot in self.lower_variants[k][ci]:
            lo = slot_dims[lo_slot]
            if (
                usage_row[lo[0]] == 0.0
                and usage_row[lo[1]] == 0.0
                and cap[lo[0]] == cap[hi[0]]
                and cap[lo[1]] == cap[hi[1]]
            ):
                return True
        return False

    def _additional_bound(self, k: int) -> float:
        """Admissible extra cost to place items k.. beyond open-bin headroom."""
        rem = self.suffix[k]
        bound = 0.0
        for d in range(self.dims):
            if rem[d] <= 0:
                continue
            free = 0.0
            for b in range(len(self.usage)):
                slack = self.caps[self.bin_type_of[b]][d] - self.usage[b][d]
                if slack > 0:
                    free += slack
            need = rem[d] - free
            if need <= 0:
                continue
            if self.best_cpc[d] == 0:
                return float("inf")
            bound = max(bound, need / self.best_cpc[d])
        return bound

    def _placement_key(self) -> tuple:
        key = [None] * self.n
        for k in range(self.n):
            key[self.order[k]] = self.placed[k]
        return tuple(key)

    def _record_incumbent(self):
        cost = self.committed
        nbins = len(self.bin_type_of)
        key = self._placement_key()
        if self.inc_cost is not None:
            if cost > self.inc_cost:
                return
            if cost == self.inc_cost:
                if nbins > self.inc_bins:
                    return
                if nbins == self.inc_bins and key >= self.inc_key:
                    return
        self.inc_cost = cost
        self.inc_cost_f = float(cost)
        self.inc_bins = nbins
        self.inc_key = key
        self.inc_opened = tuple(self.bin_type_of)
        self.inc_placement = {
            self.items[k].item_id: (self.placed[k][0], self.items[k].choices[self.placed[k][1]].choice_id)
            for k in range(self.n)
        }
        logger.debug(
            "incumbent: cost=%s bins=%d nodes=%d", cost, nbins, self.nodes
        )

    def seed(self, solution: Solution):
        self.inc_cost = solution.total_cost
        self.inc_cost_f = float(solution.total_cost)
        self.inc_bins = len(solution.opened_bins)
        self.inc_opened = solution.opened_bins
        self.inc_placement = dict(solution.placement)
        key = [None] * self.n
        for k in range(self.n):
            item = self.items[k]
            ordinal, choice_id = solution.placement[item.item_id]
            ci = next(i for i, c in enumerate(item.choices) if c.choice_id == choice_id)
            key[self.order[k]] = (ordinal, ci)
        self.inc_key = tuple(key)

    def _place_in_bin(self, k: int, b: int, ci: int):
        demand = self.demands[k][ci]
        for d in range(self.dims):
            self.usage[b][d] += demand[d]
        cls = self.class_of[k]
        prev = self.class_last.get(cls)
        self.class_last[cls] = b
        self.placed[k] = (b, ci)
        self.search(k + 1)
        self.placed[k] = None
        if prev is None:
            del self.class_last[cls]
        else:
            self.class_last[cls] = prev
        for d in range(self.dims):
            self.usage[b][d] -= demand[d]

    def search(self, k: int):
        self.nodes += 1
        if self.nodes > self.limits.max_nodes or time.monotonic() > self.deadline:
            self.stopped = True
            return
        if k == self.n:
            self._record_incumbent()
            return
        if self.committed_f + self._additional_bound(k) >= self.inc_cost_f - _PRUNE_EPS:
            return

        min_ordinal = self.class_last.get(self.class_of[k], 0)
        seen: set[tuple] = set()
        for b in range(min_ordinal, len(self.usage)):
            state = (self.bin_type_of[b], tuple(self.usage[b]))
            if state in seen:
                continue
            seen.add(state)
            cap = self.caps[self.bin_type_of[b]]
            for ci in range(len(self.demands[k])):
                if not _fits(self.usage[b], self.demands[k][ci], cap):
                    continue
                if self._slot_blocked(k, ci, self.usage[b], cap):
                    continue
                self._place_in_bin(k, b, ci)
                if self.stopped:
                    return

        zero = [0.0] * self.dims
        for t in range(len(self.caps)):
            cap = self.caps[t]
            for ci in range(len(self.demands[k])):
                if not _fits(zero, self.demands[k][ci], cap):
                    continue
                if self._slot_blocked(k, ci, zero, cap):
                    continue
                self.bin_type_of.append(t)
                self.usage.append([0.0] * self.dims)
                self.committed += self.costs[t]
                self.committed_f += self.costs_f[t]
                self._place_in_bin(k, len(self.usage) - 1, ci)
                self.committed -= self.costs[t]
                self.committed_f -= self.costs_f[t]
                self.usage.pop()
                self.bin_type_of.pop()
                if self.stopped:
                    return


def solve_exact(inst: PackingInstance, limits: SolverLimits | None = None) -> Solution:
    """Minimum-cost solve via branch-and-bound; optimal=True when proven.

    Search follows the heuristic item order, branching on open bins before
    new ones, with symmetry breaking over identical items, identical open
    bins, and interchangeable GPU slots.  On budget exhaustion the best
    incumbent is returned with optimal=False (or BudgetExhaustedError is
    raised when limits.optimality_required is set).
    """
    limits = limits or SolverLimits()
    if not inst.items:
        return _empty_solution(True)
    seed = solve_heuristic(inst)
    search = _ExactSearch(inst, limits)
    search.seed(seed)
    search.search(0)
    logger.debug("search done: nodes=%d stopped=%s", search.nodes, search.stopped)
    if search.stopped and search.limits.optimality_required:
        raise BudgetExhaustedError(
            f"budget exhausted after {search.nodes} nodes without optimality proof"
        )
    solution = Solution(
        search.inc_opened,
        dict(search.inc_placement),
        search.inc_cost,
        optimal=not search.stopped,
    )
    if not verify(inst, solution):
        raise ContractError("exact solver produced an infeasible solution")
    return solution


def _set_partitions(n: int):
    """All set partitions of range(n), blocks ordered by first element."""
    blocks: list[list[int]] = []

    def extend(k: int):
        if k == n:
            yield [list(b) for b in blocks]
            return
        for b in blocks:
            b.append(k)
            yield from extend(k + 1)
            b.pop()
        blocks.append([k])
        yield from extend(k + 1)
        blocks.pop()

    yield from extend(0)


def brute_force(inst: PackingInstance) -> Solution:
    """Exhaustive optimum for small instances; the oracle the solvers are
    tested against.

    Refuses instances beyond 6 items or 3 choices per item.
    """
    n = len(inst.items)
    if n == 0:
        return _empty_solution(True)
    if n > BRUTE_MAX_ITEMS:
        raise EnumerationLimitError(f"brute force limited to {BRUTE_MAX_ITEMS} items, got {n}")
    if any(len(it.choices) > BRUTE_MAX_CHOICES for it in inst.items):
        raise EnumerationLimitError(
            f"brute force limited to {BRUTE_MAX_CHOICES} choices per item"
        )
    dims = inst.dims
    best: tuple | None = None  # (cost, nbins, key, opened, placement)
    for partition in _set_partitions(n):
        opened: list[int] = []
        placement: dict[str, tuple[int, str]] = {}
        total = Decimal("0.000")
        feasible = True
        for ordinal, block in enumerate(partition):
            block_best: tuple | None = None  # (cost, type idx, combo)
            for t, bt in enumerate(inst.bin_types):
                if block_best is not None and bt.cost >= block_best[0]:
                    continue
                cap = bt.capacity.values
                for combo in itertools.product(*(range(len(inst.items[i].choices)) for i in block)):
                    usage = [0.0] * dims
                    ok = True
                    for i, ci in zip(block, combo):
                        demand = inst.items[i].choices[ci].demand.values
                        for d in range(dims):
                            usage[d] += demand[d]
                            if usage[d] > cap[d] + CAPACITY_SLACK:
                                ok = False
                                break
                        if not ok:
                            break
                    if ok:
                        block_best = (bt.cost, t, combo)
                        break
            if block_best is None:
                feasible = False
                break
            total += block_best[0]
            opened.append(block_best[1])
            for i, ci in zip(block, block_best[2]):
                placement[inst.items[i].item_id] = (ordinal, inst.items[i].choices[ci].choice_id)
        if not feasible:
            continue
        key = tuple(
            placement[it.item_id] for it in inst.items
        )
        candidate = (total, len(opened), key, tuple(opened), placement)
        if best is None or candidate[:3] < best[:3]:
            best = candidate
    if best is None:
        raise InfeasibleError("no feasible packing exists for this instance")
    solution = Solution(best[3], dict(best[4]), best[0], optimal=True)
    if not verify(inst, solution):
        raise ContractError("brute force produced an infeasible solution")
    return solution
