"""trajeval: utility evaluation and privacy auditing for synthetic mobility data."""

__version__ = "0.1.0"

from .core import (
    Dataset,
    DatasetProfile,
    GeoPoint,
    SplitSpec,
    TrajPoint,
    Trajectory,
    ingest_csv,
    mask_trajectory,
    profile_dataset,
    split_dataset,
    write_csv,
)
from .grid import CellId, GridSpec, discretize, grid_diagnostics, select_cell_size, stability_sweep
from .measures import (
    EmpiricalDistribution,
    GroundCostMatrix,
    RankVector,
    cosine_distance,
    discrete_frechet,
    dtw,
    hausdorff,
    kendall_tau_b,
    spatial_ground_cost,
    transport_plan,
    wasserstein1_ground_cost,
    wasserstein1_scalar,
)
from .framework import (
    EvalEnvironment,
    MetricSelection,
    UtilityReport,
    UtilityVector,
    assemble_utility_vector,
    compare_models,
    emit_report,
)
from .privacy import (
    AttackConfig,
    AttackResult,
    AuxSplit,
    HeuristicTULSolver,
    ThresholdModel,
    TULResult,
    compute_alpha,
    decide,
    learn_threshold,
    run_attack,
    split_aux,
    tul_protocols,
)

__all__ = [name for name in dir() if not name.startswith("_")]
