"""Outlier-robust Wasserstein-1 DRO for generalized linear models.

Solver library plus benchmark harness: robust mean estimation drives an
inexact primal-dual method whose excess risk on the uncorrupted part of
the data scales like sqrt(corruption fraction).
"""

from .baselines import (
    OracleResult,
    doro_cvar,
    dro_objective_eval,
    dro_sup_lower_bound,
    erm_subgradient,
    oracle_solve,
)
from .data import (
    ContaminationSpec,
    Dataset,
    DoroCounterexample,
    FarCluster,
    LabelFlipPlusLeverage,
    center_with_estimate,
    contaminate,
    generate_synthetic,
    prepend_ones,
)
from .harness import ExperimentConfig, MetricsRow, emit_report, run_experiment
from .losses import (
    LossFamily,
    NormRegularizer,
    conjugate_eval,
    conjugate_prox,
    loss_eval,
    reg_prox,
)
from .robust_mean import (
    FilterState,
    StabilityReport,
    inexact_hybrid_gradient_oracle,
    robust_mean_estimation,
    stability_check,
    stability_filter,
    top_eigenvector,
    trimmed_mean_1d,
)
from .solver import (
    PDHGConfig,
    SolveResult,
    clip_weight,
    idealized_solve,
    pdhg_solve,
    pipeline,
    schedule,
    tune_gamma,
)

__all__ = [
    "ContaminationSpec",
    "Dataset",
    "DoroCounterexample",
    "ExperimentConfig",
    "FarCluster",
    "FilterState",
    "LabelFlipPlusLeverage",
    "LossFamily",
    "MetricsRow",
    "NormRegularizer",
    "OracleResult",
    "PDHGConfig",
    "SolveResult",
    "StabilityReport",
    "center_with_estimate",
    "clip_weight",
    "conjugate_eval",
    "conjugate_prox",
    "contaminate",
    "doro_cvar",
    "dro_objective_eval",
    "dro_sup_lower_bound",
    "emit_report",
    "erm_subgradient",
    "generate_synthetic",
    "idealized_solve",
    "inexact_hybrid_gradient_oracle",
    "loss_eval",
    "oracle_solve",
    "pdhg_solve",
    "pipeline",
    "prepend_ones",
    "reg_prox",
    "robust_mean_estimation",
    "run_experiment",
    "schedule",
    "stability_check",
    "stability_filter",
    "top_eigenvector",
    "trimmed_mean_1d",
    "tune_gamma",
]
