"""Energy-latency tradeoff simulation for in-network aggregation.

Builds minimum-latency aggregation trees over randomly placed nodes, trades
extra latency for energy with leveled relay paths, extends to functions that
decompose over the maximal cliques of a proximity graph, and ships an
experiment harness that validates every schedule against the link model.
"""

__version__ = "0.1.0"

from .errors import (
    AggsimError,
    InfeasibleBudgetError,
    InvalidParameterError,
    InvalidPathError,
    InvalidStructureError,
    ScheduleConflictError,
)
from .geometry import (
    Deployment,
    EnergyParams,
    Region,
    ceil_log2,
    edge_energy,
    load_deployment,
    path_energy,
    place_uniform,
    region_bisect,
    save_deployment,
)
from .graphs import (
    CliqueSet,
    EdgeColoring,
    UndirectedGraph,
    build_knng,
    build_mst,
    build_rgg,
    max_degree,
    maximal_cliques,
    proper_edge_coloring,
)
from .trees import (
    AggregationTree,
    brute_force_min_latency,
    brute_force_min_makespan,
    build_bisection_tree,
    build_min_latency_tree,
    tree_energy,
    tree_latency,
)
from .tradeoff import (
    AggregationPlan,
    WeightSchedule,
    build_agg_plan,
    compute_weights,
    hop_bounded_path_exact,
    hop_bounded_path_heuristic,
)
from .scheduling import (
    ContributionToken,
    Schedule,
    Transmission,
    schedule_energy,
    schedule_plan,
    schedule_tree,
    validate_schedule,
    verify_aggregate,
)
from .cliques import (
    FunctionSpec,
    assign_processors,
    build_clq_policy,
    build_forwarding_stage,
    make_function_spec,
)
from .baselines import mst_policy, raw_forwarding_policy
from .experiment import (
    ExperimentConfig,
    ResultRow,
    fit_scaling_exponent,
    read_results,
    run_experiment,
    run_trial,
    trial_seed,
    write_results,
)
