import random
from decimal import Decimal

import pytest

from streamplan import (
    ResourceVector,
    fixture_path,
    load_catalog,
    load_profiles,
    load_workload,
)
from streamplan.packing import BinType, Choice, PackingInstance, PackingItem


@pytest.fixture(scope="session")
def experiment_catalog():
    return load_catalog(fixture_path("catalog_experiment.json"))


@pytest.fixture(scope="session")
def full_catalog():
    return load_catalog(fixture_path("catalog_ec2.json"))


@pytest.fixture(scope="session")
def profile_store():
    return load_profiles(fixture_path("profiles_640x480.json"))


@pytest.fixture(scope="session")
def scenario1():
    return load_workload(fixture_path("workload_scenario1.json"))


@pytest.fixture(scope="session")
def scenario2():
    return load_workload(fixture_path("workload_scenario2.json"))


@pytest.fixture(scope="session")
def scenario3():
    return load_workload(fixture_path("workload_scenario3.json"))


def make_random_instance(seed: int) -> PackingInstance:
    """Small feasible instance within the brute-force oracle bounds.

    Every choice is generated to fit some bin type standing alone, so the
    instance as a whole is always feasible (one bin per item at worst).
    """
    rng = random.Random(seed)
    dims = rng.randint(1, 4)
    n_types = rng.randint(1, 2)
    bin_types = []
    for t in range(n_types):
        capacity = tuple(round(rng.uniform(2.0, 10.0), 3) for _ in range(dims))
        cost = Decimal(str(round(rng.uniform(0.1, 5.0), 3)))
        if cost <= 0:
            cost = Decimal("0.100")
        bin_types.append(BinType(f"type{t}", ResourceVector(capacity), cost))
    items = []
    for i in range(rng.randint(1, 4)):
        choices = []
        for c in range(rng.randint(1, 2)):
            anchor = rng.randrange(n_types)
            cap = bin_types[anchor].capacity
            demand = tuple(round(rng.uniform(0.0, 0.95 * cap[d]), 3) for d in range(dims))
            choices.append(Choice(f"c{c}", ResourceVector(demand)))
        items.append(PackingItem(f"item{i}", tuple(choices)))
    return PackingInstance(
        dims=dims, bin_types=tuple(bin_types), items=tuple(items)
    )
