"""Feature-partitioned block coordinate descent for l1-regularized linear
classifiers, run on a simulated cluster with an explicit communication
cost model."""

__version__ = "0.1.0"

from .cluster import ClusterConfig, CostLedger, SimulatedCluster
from .datasets import (
    Dataset,
    Partition,
    SparseMatrix,
    column_stats,
    load_libsvm,
    parse_libsvm,
    partition_features,
    to_libsvm,
)
from .driver import (
    METHODS,
    MethodConfig,
    ReferenceSolution,
    Trajectory,
    compute_delta,
    line_search,
    reference_solve,
    run_method,
)
from .errors import (
    ConfigurationError,
    DataFormatError,
    LineSearchError,
    NodeTaskError,
)
from .estimator import DistributedL1Classifier
from .metrics import (
    CostParams,
    IterationRecord,
    auprc,
    cost_estimate,
    emit_csv,
    load_reference,
    rfvd,
    save_reference,
    synth_correlated_dataset,
    synth_dataset,
)
from .model import (
    LOSSES,
    LossKind,
    ModelState,
    get_loss,
    gradient_block,
    kkt_violation,
    l1_penalty_delta,
    min_norm_subgradient,
    objective_value,
)
from .subproblems import (
    CyclicSelector,
    GreedyScores,
    InnerResult,
    approx_stop_satisfied,
    decoupled_step,
    greedy_scores,
    minimize_1d,
    select_greedy,
    solve_prox_jacobi,
)

__all__ = [
    "__version__",
    "ClusterConfig",
    "CostLedger",
    "SimulatedCluster",
    "Dataset",
    "Partition",
    "SparseMatrix",
    "column_stats",
    "load_libsvm",
    "parse_libsvm",
    "partition_features",
    "to_libsvm",
    "METHODS",
    "MethodConfig",
    "ReferenceSolution",
    "Trajectory",
    "compute_delta",
    "line_search",
    "reference_solve",
    "run_method",
    "ConfigurationError",
    "DataFormatError",
    "LineSearchError",
    "NodeTaskError",
    "DistributedL1Classifier",
    "CostParams",
    "IterationRecord",
    "auprc",
    "cost_estimate",
    "emit_csv",
    "load_reference",
    "rfvd",
    "save_reference",
    "synth_correlated_dataset",
    "synth_dataset",
    "LOSSES",
    "LossKind",
    "ModelState",
    "get_loss",
    "gradient_block",
    "kkt_violation",
    "l1_penalty_delta",
    "min_norm_subgradient",
    "objective_value",
    "CyclicSelector",
    "GreedyScores",
    "InnerResult",
    "approx_stop_satisfied",
    "decoupled_step",
    "greedy_scores",
    "minimize_1d",
    "select_greedy",
    "solve_prox_jacobi",
]
