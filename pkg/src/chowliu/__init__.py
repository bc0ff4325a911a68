"""Chow-Liu tree learning and its large-deviation error exponent."""

from .crossover import (
    CrossoverOutcome,
    SolverConfig,
    approx_rate,
    empirical_pair_joint,
    empirical_rate,
    exact_rate,
    is_very_noisy,
    psi_weight,
)
from .dist import (
    DenseJoint,
    EmpiricalCounts,
    PairJoint,
    empirical_distribution,
    entropy,
    information_density,
    kl_divergence,
    marginalize,
    mutual_information,
)
from .errors import ChowLiuError, ParseError, SolverNonConvergenceError, ValidationError
from .exponent import (
    ExponentReport,
    GeneralizedReport,
    PositivityCertificate,
    ProjectionSet,
    dominant_replacement,
    error_exponent,
    evaluation_bound,
    evaluation_budget,
    finite_sample_bound,
    generalized_exponent,
    optimal_projections,
    positivity_certificate,
)
from .learning import LearnResult, learn, log_likelihood, structure_from_mi
from .simulate import (
    SimConfig,
    SimResult,
    estimate_error_probability,
    estimate_generalized_error_probability,
    example2_random_tree,
    star4,
    symmetric_star,
    table1_distribution,
)
from .trees import (
    EdgeSet,
    TreeModel,
    diameter,
    enumerate_spanning_trees,
    evaluate,
    is_proper_forest,
    mix_seed,
    mwst,
    path_between,
    sample,
    to_dense,
)

__version__ = "0.1.0"

__all__ = [
    "ChowLiuError",
    "CrossoverOutcome",
    "DenseJoint",
    "EdgeSet",
    "EmpiricalCounts",
    "ExponentReport",
    "GeneralizedReport",
    "LearnResult",
    "PairJoint",
    "ParseError",
    "PositivityCertificate",
    "ProjectionSet",
    "SimConfig",
    "SimResult",
    "SolverConfig",
    "SolverNonConvergenceError",
    "TreeModel",
    "ValidationError",
    "approx_rate",
    "diameter",
    "dominant_replacement",
    "empirical_distribution",
    "empirical_pair_joint",
    "empirical_rate",
    "entropy",
    "enumerate_spanning_trees",
    "error_exponent",
    "estimate_error_probability",
    "estimate_generalized_error_probability",
    "evaluate",
    "evaluation_bound",
    "evaluation_budget",
    "exact_rate",
    "example2_random_tree",
    "finite_sample_bound",
    "generalized_exponent",
    "information_density",
    "is_proper_forest",
    "is_very_noisy",
    "kl_divergence",
    "learn",
    "log_likelihood",
    "marginalize",
    "mix_seed",
    "mutual_information",
    "mwst",
    "optimal_projections",
    "path_between",
    "positivity_certificate",
    "psi_weight",
    "sample",
    "star4",
    "structure_from_mi",
    "symmetric_star",
    "table1_distribution",
    "to_dense",
]
