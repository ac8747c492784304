from decimal import Decimal

import pytest

from streamplan import (
    ST2,
    ST3,
    ContractError,
    Plan,
    StreamRequest,
    ValidationError,
    check_plan,
    fit_profile,
    generate_test_run,
    plan_workload,
    simulate,
)
from streamplan.model import PlanInstance
from streamplan.profiles import DEVICE_CPU, DEVICE_GPU, KINDS, demand_fraction

SIZE = (640, 480)


def _plan(assignments, *types):
    instances = tuple(PlanInstance(name, i) for i, name in enumerate(types))
    cost = {"c4.2xlarge": Decimal("0.419"), "g2.2xlarge": Decimal("0.650")}
    total = sum((cost[name] for name in types), Decimal("0.000"))
    return Plan(instances, assignments, total)


def test_simulate_scenario2_plan(scenario2, experiment_catalog, profile_store):
    plan = plan_workload(scenario2, experiment_catalog, profile_store, ST3)
    report = simulate(plan, scenario2, profile_store, experiment_catalog)
    assert len(report.per_instance) == 1
    assert report.per_instance[0].utilization[0] == pytest.approx(0.839)
    assert report.per_stream == {"vgg16-cam": 1.0, "zf-cam": 1.0}
    assert report.overall_performance == 1.0


def test_simulate_single_gpu_stream_at_2fps(experiment_catalog, profile_store):
    workload = [StreamRequest("cam", "vgg16", SIZE, 2.0)]
    plan = _plan({"cam": (0, "gpu:0")}, "g2.2xlarge")
    report = simulate(plan, workload, profile_store, experiment_catalog)
    util = report.per_instance[0].utilization
    assert util[0] == pytest.approx(0.53)
    assert util[2] == pytest.approx(0.46)
    assert report.per_stream["cam"] == 1.0


def test_simulate_between_headroom_and_raw_capacity(experiment_catalog, profile_store):
    # Two ZF CPU streams at 0.55 FPS: 97.9% CPU demand, above the planner's
    # 90% cap but below raw capacity, so no degradation in this model.
    workload = [StreamRequest("zf", "zf", SIZE, 0.55, replicas=2)]
    plan = _plan({"zf-1": (0, "cpu"), "zf-2": (0, "cpu")}, "c4.2xlarge")
    report = simulate(plan, workload, profile_store, experiment_catalog)
    assert report.per_instance[0].utilization[0] == pytest.approx(0.979, abs=1e-3)
    assert report.overall_performance == 1.0
    violations = check_plan(plan, workload, profile_store, experiment_catalog, 0.9)
    assert len(violations) == 1 and violations[0].kind == "utilization"


def test_simulate_overload_shares_proportionally(experiment_catalog, profile_store):
    workload = [StreamRequest("zf", "zf", SIZE, 8.0, replicas=2)]
    plan = _plan({"zf-1": (0, "gpu:0"), "zf-2": (0, "gpu:0")}, "g2.2xlarge")
    report = simulate(plan, workload, profile_store, experiment_catalog)
    f = 2 * 7.04 / 8.0  # CPU overload factor 1.76
    assert report.per_stream["zf-1"] == pytest.approx(1 / f)
    assert report.per_stream["zf-2"] == pytest.approx(1 / f)
    assert report.overall_performance == pytest.approx(1 / f)
    assert report.overall_performance < 0.9


def test_overload_factor_property(experiment_catalog, profile_store):
    # Overloading a dimension by factor f cuts affected streams to 1/f.
    for replicas in (3, 4, 5):
        workload = [StreamRequest("zf", "zf", SIZE, 2.0, replicas=replicas)]
        assignments = {f"zf-{k + 1}": (0, "gpu:0") for k in range(replicas)}
        plan = _plan(assignments, "g2.2xlarge")
        report = simulate(plan, workload, profile_store, experiment_catalog)
        demand = replicas * 0.022 * 10 * 8  # cpu cores
        f = demand / 8.0
        for perf in report.per_stream.values():
            expected = 1 / f if f > 1 else 1.0
            assert perf == pytest.approx(expected)


def test_rate_cap_limits_performance(experiment_catalog, profile_store):
    workload = [StreamRequest("cam", "vgg16", SIZE, 4.0)]  # above the 3.61 ceiling
    plan = _plan({"cam": (0, "gpu:0")}, "g2.2xlarge")
    report = simulate(plan, workload, profile_store, experiment_catalog)
    assert report.per_stream["cam"] == pytest.approx(3.61 / 4.0)
    violations = check_plan(plan, workload, profile_store, experiment_catalog, 0.9)
    assert any(v.kind == "rate" for v in violations)


def test_utilization_additivity(experiment_catalog, profile_store):
    single = [StreamRequest("cam", "vgg16", SIZE, 1.0)]
    plan1 = _plan({"cam": (0, "gpu:0")}, "g2.2xlarge")
    base = simulate(plan1, single, profile_store, experiment_catalog).per_instance[0].utilization
    triple = [StreamRequest("cam", "vgg16", SIZE, 1.0, replicas=3)]
    plan3 = _plan({f"cam-{k}": (0, "gpu:0") for k in (1, 2, 3)}, "g2.2xlarge")
    stacked = simulate(plan3, triple, profile_store, experiment_catalog).per_instance[0].utilization
    for d in range(4):
        assert stacked[d] == pytest.approx(3 * base[d], rel=1e-9, abs=1e-12)


def test_degradation_monotonicity(experiment_catalog, profile_store):
    perfs = []
    for replicas in (1, 2, 3):
        workload = [StreamRequest("zf", "zf", SIZE, 8.0, replicas=replicas)]
        ids = [f"zf-{k + 1}" for k in range(replicas)] if replicas > 1 else ["zf"]
        plan = _plan({sid: (0, "gpu:0") for sid in ids}, "g2.2xlarge")
        report = simulate(plan, workload, profile_store, experiment_catalog)
        perfs.append(report.per_stream[ids[0]])
    assert perfs[0] >= perfs[1] >= perfs[2]
    assert perfs[1] < perfs[0]


def test_check_plan_accepts_solver_output(
    scenario1, scenario2, scenario3, experiment_catalog, profile_store
):
    for workload, strategy in (
        (scenario1, ST3),
        (scenario2, ST3),
        (scenario3, ST3),
        (scenario3, ST2),
    ):
        plan = plan_workload(workload, experiment_catalog, profile_store, strategy)
        assert check_plan(plan, workload, profile_store, experiment_catalog, 0.9) == []
        report = simulate(plan, workload, profile_store, experiment_catalog)
        assert report.overall_performance == 1.0


def test_check_plan_flags_forced_overcommit(scenario3, experiment_catalog, profile_store):
    # Force a VGG stream onto an instance already at 88% CPU: 93.3% > 90%.
    plan = plan_workload(scenario3, experiment_catalog, profile_store, ST3)
    zf_instance = plan.assignments["zf-cam-1"][0]
    assignments = dict(plan.assignments)
    assignments["vgg16-cam-1"] = (zf_instance, "gpu:0")
    forced = Plan(plan.instances, assignments, plan.hourly_cost)
    violations = check_plan(forced, scenario3, profile_store, experiment_catalog, 0.9)
    cpu_violations = [v for v in violations if v.dimension == "cpu_cores"]
    assert cpu_violations and cpu_violations[0].instance == zf_instance
    assert cpu_violations[0].value == pytest.approx(0.933, abs=1e-3)


def test_empty_plan_empty_workload(experiment_catalog, profile_store):
    plan = Plan((), {}, Decimal("0.000"))
    assert check_plan(plan, [], profile_store, experiment_catalog, 0.9) == []
    report = simulate(plan, [], profile_store, experiment_catalog)
    assert report.overall_performance == 1.0


def test_unassigned_stream_is_contract_error(experiment_catalog, profile_store):
    workload = [StreamRequest("cam", "vgg16", SIZE, 0.2)]
    plan = Plan((), {}, Decimal("0.000"))
    with pytest.raises(ContractError, match="unassigned"):
        simulate(plan, workload, profile_store, experiment_catalog)


def test_missing_gpu_slot_is_contract_error(experiment_catalog, profile_store):
    workload = [StreamRequest("cam", "vgg16", SIZE, 0.2)]
    plan = _plan({"cam": (0, "gpu:0")}, "c4.2xlarge")
    with pytest.raises(ContractError, match="GPU slot"):
        simulate(plan, workload, profile_store, experiment_catalog)


def test_generate_test_run_noiseless_matches_reference(profile_store):
    truth = profile_store.get("vgg16", SIZE, DEVICE_GPU)
    samples = generate_test_run(truth, 0.2, 3, 0.0, seed=1)
    assert len(samples) == 3
    for s in samples:
        assert s.rate == 0.2
        assert s.utilization["cpu"] == pytest.approx(0.053)
        assert s.utilization["gpu"] == pytest.approx(0.046)
        assert s.utilization["memory"] == 0.0


def test_generate_test_run_respects_max_rate(profile_store):
    truth = profile_store.get("vgg16", SIZE, DEVICE_GPU)
    with pytest.raises(ValidationError):
        generate_test_run(truth, 5.0, 1, 0.0, seed=1)


def test_generate_test_run_deterministic(profile_store):
    truth = profile_store.get("zf", SIZE, DEVICE_GPU)
    a = generate_test_run(truth, 1.0, 10, 0.01, seed=7)
    b = generate_test_run(truth, 1.0, 10, 0.01, seed=7)
    assert a == b
    c = generate_test_run(truth, 1.0, 10, 0.01, seed=8)
    assert a != c


def test_noiseless_round_trip_recovers_slopes(profile_store):
    truth = profile_store.get("vgg16", SIZE, DEVICE_GPU)
    samples = []
    for rate in (0.5, 1.0, 2.0):
        samples.extend(generate_test_run(truth, rate, 2, 0.0, seed=0))
    fitted = fit_profile(
        samples, DEVICE_GPU, SIZE, truth.reference_machine, program="vgg16"
    )
    for kind in KINDS:
        if truth.scaling[kind] != "linear-in-rate":
            continue
        true_slope = truth.reference_utilization[kind] / truth.reference_rate
        got = fitted.reference_utilization[kind] / fitted.reference_rate
        if true_slope == 0:
            assert got == 0
        else:
            assert got == pytest.approx(true_slope, rel=1e-9)


def test_noisy_fit_lands_within_three_sd(profile_store):
    truth = profile_store.get("vgg16", SIZE, DEVICE_GPU)
    true_slope = truth.reference_utilization["cpu"] / truth.reference_rate
    rate, n, sd = 2.0, 50, 0.005
    slope_sd = sd / (n ** 0.5 * rate)
    # Empirically all of seeds 0..99 land within 3 sd (worst ~2.7).
    for seed in range(100):
        samples = generate_test_run(truth, rate, n, sd, seed=seed)
        fitted = fit_profile(
            samples, DEVICE_GPU, SIZE, truth.reference_machine, program="vgg16"
        )
        slope = fitted.reference_utilization["cpu"] / fitted.reference_rate
        assert abs(slope - true_slope) <= 3 * slope_sd
