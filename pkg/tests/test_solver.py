import random
from decimal import Decimal

import pytest

from streamplan import (
    ST2,
    ST3,
    BudgetExhaustedError,
    EnumerationLimitError,
    InfeasibleError,
    ResourceVector,
    SolverLimits,
    ValidationError,
    brute_force,
    build_instance,
    lower_bound,
    solve_exact,
    solve_heuristic,
    verify,
)
from streamplan.packing import BinType, Choice, PackingInstance, PackingItem
from streamplan.solver import Solution

from conftest import make_random_instance


def _single_bin_instance(demand, capacity, cost="1.000"):
    return PackingInstance(
        dims=len(capacity),
        bin_types=(BinType("bin", ResourceVector(capacity), Decimal(cost)),),
        items=(PackingItem("item", (Choice("c0", ResourceVector(demand)),),),),
    )


def test_heuristic_single_item_single_bin():
    inst = _single_bin_instance((2.0,), (4.0,), "0.500")
    solution = solve_heuristic(inst)
    assert solution.opened_bins == (0,)
    assert solution.total_cost == Decimal("0.500")
    assert solution.optimal is False


def test_heuristic_empty_instance():
    inst = PackingInstance(
        dims=1,
        bin_types=(BinType("bin", ResourceVector((1.0,)), Decimal("1.000")),),
        items=(),
    )
    assert solve_heuristic(inst).total_cost == Decimal("0.000")
    assert solve_exact(inst).total_cost == Decimal("0.000")
    assert brute_force(inst).total_cost == Decimal("0.000")


def test_heuristic_scenario1_bounded(scenario1, experiment_catalog, profile_store):
    inst = build_instance(scenario1, experiment_catalog, profile_store, ST3, 0.9)
    solution = solve_heuristic(inst)
    assert solution.total_cost <= Decimal("1.676")


def test_exact_scenario1(scenario1, experiment_catalog, profile_store):
    inst = build_instance(scenario1, experiment_catalog, profile_store, ST3, 0.9)
    solution = solve_exact(inst)
    assert solution.optimal
    assert solution.total_cost == Decimal("0.650")
    assert len(solution.opened_bins) == 1


def test_exact_scenario3_st3(scenario3, experiment_catalog, profile_store):
    inst = build_instance(scenario3, experiment_catalog, profile_store, ST3, 0.9)
    solution = solve_exact(inst)
    assert solution.total_cost == Decimal("6.919")
    names = sorted(inst.bin_types[t].name for t in solution.opened_bins)
    assert names.count("g2.2xlarge") == 10
    assert names.count("c4.2xlarge") == 1


def test_exact_scenario3_st2(scenario3, experiment_catalog, profile_store):
    inst = build_instance(scenario3, experiment_catalog, profile_store, ST2, 0.9)
    solution = solve_exact(inst)
    assert solution.total_cost == Decimal("7.150")
    assert len(solution.opened_bins) == 11


def test_brute_force_scenario2(scenario2, experiment_catalog, profile_store):
    inst = build_instance(scenario2, experiment_catalog, profile_store, ST3, 0.9)
    assert brute_force(inst).total_cost == Decimal("0.419")


def test_exact_matches_brute_force_on_random_instances():
    for seed in range(30):
        inst = make_random_instance(seed)
        exact = solve_exact(inst)
        oracle = brute_force(inst)
        heuristic = solve_heuristic(inst)
        assert exact.optimal
        assert exact.total_cost == oracle.total_cost, f"seed {seed}"
        assert heuristic.total_cost >= exact.total_cost, f"seed {seed}"
        assert lower_bound(inst) <= float(exact.total_cost) + 1e-9, f"seed {seed}"


def test_lower_bound_empty_instance():
    inst = PackingInstance(
        dims=1,
        bin_types=(BinType("bin", ResourceVector((1.0,)), Decimal("1.000")),),
        items=(),
    )
    assert lower_bound(inst) == 0.0


def test_lower_bound_hand_example():
    # One item needing 4 cores; the only bin has 8 cores at $0.419.
    inst = _single_bin_instance((4.0,), (8.0,), "0.419")
    bound = lower_bound(inst)
    assert bound == pytest.approx(0.2095, rel=1e-9)
    assert bound <= float(solve_exact(inst).total_cost)
    assert solve_exact(inst).total_cost == Decimal("0.419")


def test_lower_bound_scenario3_st2(scenario3, experiment_catalog, profile_store):
    inst = build_instance(scenario3, experiment_catalog, profile_store, ST2, 0.9)
    bound = lower_bound(inst)
    optimum = solve_exact(inst).total_cost
    assert bound <= float(optimum)
    assert bound > 6.0  # ten streams at ~88% CPU force nearly ten bins


def test_brute_force_refuses_large_instances():
    items = tuple(
        PackingItem(f"i{k}", (Choice("c0", ResourceVector((0.1,))),)) for k in range(7)
    )
    inst = PackingInstance(
        dims=1,
        bin_types=(BinType("bin", ResourceVector((1.0,)), Decimal("1.000")),),
        items=items,
    )
    with pytest.raises(EnumerationLimitError):
        brute_force(inst)


def test_brute_force_refuses_many_choices():
    choices = tuple(Choice(f"c{k}", ResourceVector((0.1,))) for k in range(4))
    inst = PackingInstance(
        dims=1,
        bin_types=(BinType("bin", ResourceVector((1.0,)), Decimal("1.000")),),
        items=(PackingItem("item", choices),),
    )
    with pytest.raises(EnumerationLimitError):
        brute_force(inst)


def test_all_solvers_agree_on_infeasibility():
    inst = _single_bin_instance((5.0,), (1.0,))
    for solver in (solve_heuristic, solve_exact, brute_force):
        with pytest.raises(InfeasibleError):
            solver(inst)


def test_verify_accepts_solver_output(scenario1, experiment_catalog, profile_store):
    inst = build_instance(scenario1, experiment_catalog, profile_store, ST3, 0.9)
    assert verify(inst, solve_exact(inst))
    assert verify(inst, solve_heuristic(inst))


def test_verify_rejects_duplicate_or_missing_items():
    inst = _single_bin_instance((0.5,), (1.0,))
    good = solve_exact(inst)
    assert verify(inst, good)
    missing = Solution(good.opened_bins, {}, good.total_cost, False)
    assert not verify(inst, missing)
    extra = dict(good.placement)
    extra["ghost"] = (0, "c0")
    assert not verify(inst, Solution(good.opened_bins, extra, good.total_cost, False))


def test_verify_rejects_wrong_cost():
    inst = _single_bin_instance((0.5,), (1.0,))
    good = solve_exact(inst)
    assert not verify(inst, Solution(good.opened_bins, dict(good.placement), Decimal("0.999"), False))


def test_verify_tolerance_boundary():
    # Demand within the 1e-6 slack passes; 1e-9 beyond it fails.
    ok = _single_bin_instance((1.0 + 0.9e-6,), (1.0,))
    solution = Solution((0,), {"item": (0, "c0")}, Decimal("1.000"), False)
    assert verify(ok, solution)
    over = _single_bin_instance((1.0 + 1e-6 + 1e-9,), (1.0,))
    assert not verify(over, solution)


def test_exact_is_deterministic(scenario3, experiment_catalog, profile_store):
    inst = build_instance(scenario3, experiment_catalog, profile_store, ST3, 0.9)
    a = solve_exact(inst)
    b = solve_exact(inst)
    assert a == b


def test_exact_is_permutation_invariant():
    rng = random.Random(99)
    for seed in range(10):
        inst = make_random_instance(seed)
        base_cost = solve_exact(inst).total_cost
        items = list(inst.items)
        rng.shuffle(items)
        shuffled = PackingInstance(
            dims=inst.dims,
            bin_types=inst.bin_types,
            items=tuple(items),
            slot_dims=inst.slot_dims,
        )
        assert solve_exact(shuffled).total_cost == base_cost


def test_budget_exhaustion_returns_incumbent(scenario3, experiment_catalog, profile_store):
    inst = build_instance(scenario3, experiment_catalog, profile_store, ST3, 0.9)
    limits = SolverLimits(max_nodes=1)
    solution = solve_exact(inst, limits)
    assert solution.optimal is False
    assert solution.total_cost == solve_heuristic(inst).total_cost
    with pytest.raises(BudgetExhaustedError):
        solve_exact(inst, SolverLimits(max_nodes=1, optimality_required=True))


def test_solver_limits_validation():
    with pytest.raises(ValidationError):
        SolverLimits(max_nodes=0)
    with pytest.raises(ValidationError):
        SolverLimits(time_budget=0)


def test_dominance_chain_on_scenarios(
    scenario1, scenario2, scenario3, experiment_catalog, profile_store
):
    for workload in (scenario1, scenario2, scenario3):
        for strategy in (ST2, ST3):
            inst = build_instance(workload, experiment_catalog, profile_store, strategy, 0.9)
            heuristic = solve_heuristic(inst)
            exact = solve_exact(inst)
            assert heuristic.total_cost >= exact.total_cost
            assert lower_bound(inst) <= float(exact.total_cost) + 1e-9
