"""Single-point black-box spill-over attacks on 2-way clustering."""

from .attack import AttackConfig, AttackReport, delta_metric, objective, run_attack, select_target
from .clustering import ClusterAssignment, ClusterModel, cluster, kmeans, ward
from .data import Dataset, GaussianSpec, load_csv, synth_gaussians
from .depth import (
    DepthReport,
    PerturbationBox,
    comd,
    depth_report,
    mahalanobis_depth,
    mdc,
    select_delta,
)
from .optimizer import (
    OptimBudget,
    SurrogateModel,
    anneal_minimize,
    cors_minimize,
    fit_cubic_rbf,
    latin_hypercube,
)
from .theory import (
    NoisyMetricConfig,
    noisy_metric,
    theorem1_certify,
    theorem1_validate,
    theorem2_experiment,
)

__all__ = [
    "AttackConfig",
    "AttackReport",
    "ClusterAssignment",
    "ClusterModel",
    "Dataset",
    "DepthReport",
    "GaussianSpec",
    "NoisyMetricConfig",
    "OptimBudget",
    "PerturbationBox",
    "SurrogateModel",
    "anneal_minimize",
    "cluster",
    "comd",
    "cors_minimize",
    "delta_metric",
    "depth_report",
    "fit_cubic_rbf",
    "kmeans",
    "latin_hypercube",
    "load_csv",
    "mahalanobis_depth",
    "mdc",
    "noisy_metric",
    "objective",
    "run_attack",
    "select_delta",
    "select_target",
    "synth_gaussians",
    "theorem1_certify",
    "theorem1_validate",
    "theorem2_experiment",
    "ward",
]

__version__ = "0.1.0"
