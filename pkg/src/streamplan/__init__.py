"""streamplan: cost-minimizing cloud instance planning for stream analysis.

Profiles analysis programs from test runs, encodes workload placement as
multiple-choice vector bin packing over CPU/GPU instance types, solves it
exactly, and validates plans with an analytic utilization/performance
simulator.
"""

from .catalog import (
    Catalog,
    GpuSpec,
    InstanceType,
    ResourceVector,
    capacity_vector,
    load_catalog,
)
from .errors import (
    BudgetExhaustedError,
    ContractError,
    EnumerationLimitError,
    InfeasibleError,
    SchemaError,
    StreamPlanError,
    ValidationError,
)
from .fixtures import fixture_path
from .model import (
    ST1,
    ST2,
    ST3,
    Plan,
    StrategyOutcome,
    StreamRequest,
    Strategy,
    build_instance,
    compare_strategies,
    expand_workload,
    get_strategy,
    load_plan,
    load_workload,
    plan_to_solution,
    plan_workload,
    solution_to_plan,
)
from .packing import BinType, Choice, PackingInstance, PackingItem
from .profiles import (
    Profile,
    ProfileStore,
    ReferenceMachine,
    TestRunSample,
    demand_fraction,
    demand_vector,
    fit_profile,
    load_profiles,
    rate_feasible,
    save_profiles,
    speedup,
)
from .simulator import SimulationReport, check_plan, generate_test_run, simulate
from .solver import (
    Solution,
    SolverLimits,
    brute_force,
    lower_bound,
    solve_exact,
    solve_heuristic,
    verify,
)

__version__ = "0.1.0"
