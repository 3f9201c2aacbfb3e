"""Constrained-queueing simulator and scheduling-policy library.

Networks are interference graphs over slotted single-server queues; a
policy picks a conflict-free activation each slot from limited state
(queue-nonemptiness bits, backlogs, frame snapshots, or channel sensing).
The package bundles the policy catalogs, a discrete-event simulator,
exact stationary analysis for small networks, and a CLI for experiment
presets.
"""

from .arrivals import ArrivalSpec, bernoulli, markov, markov_from_mean
from .coc_policies import COC_CATALOG, make_coc_policy
from .engine import (
    Metrics,
    SimConfig,
    cdf_sup_distance,
    config_hash,
    coupled_compare,
    make_graph,
    make_policy,
    run,
    run_many,
    run_traced,
    stability_verdict,
    sum_backlog_cdf,
    write_metrics_csv,
)
from .matching import (
    decompose_runs,
    is_msm,
    lemma_conditions,
    max_service_count,
    max_service_sets,
    mwis,
    project_L,
    refine_inner_priority,
)
from .model import (
    InterferenceGraph,
    clique_graph,
    constraint_load,
    enumerate_valid_activations,
    in_capacity_region,
    in_gamma_inner_bound,
    is_activation_valid,
    linear_array_of_cliques,
    occupancy_of,
    path_graph,
    star_of_cliques,
)
from .oracle import TruncatedChain, truncated_mean_deficit
from .path_policies import PATH_CATALOG, make_path_policy

__version__ = "0.1.0"

__all__ = [
    "ArrivalSpec", "bernoulli", "markov", "markov_from_mean",
    "COC_CATALOG", "make_coc_policy",
    "Metrics", "SimConfig", "cdf_sup_distance", "config_hash",
    "coupled_compare", "make_graph", "make_policy", "run", "run_many",
    "run_traced", "stability_verdict", "sum_backlog_cdf",
    "write_metrics_csv",
    "decompose_runs", "is_msm", "lemma_conditions", "max_service_count",
    "max_service_sets", "mwis", "project_L", "refine_inner_priority",
    "InterferenceGraph", "clique_graph", "constraint_load",
    "enumerate_valid_activations", "in_capacity_region",
    "in_gamma_inner_bound", "is_activation_valid",
    "linear_array_of_cliques", "occupancy_of", "path_graph",
    "star_of_cliques",
    "TruncatedChain", "truncated_mean_deficit",
    "PATH_CATALOG", "make_path_policy",
    "__version__",
]