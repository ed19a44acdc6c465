"""Permutation inference for dyadic network data.

QAP tests association between two networks; MRQAP tests focal
coefficients of a network regression. Both support studentized statistics
whose permutation distributions are valid under weak nulls.
"""

__version__ = "0.1.0"

from .dyad import (
    DyadMatrix,
    DyadStats,
    apply_double_permutation,
    centered,
    dyad_stats,
    new_dyad_matrix,
    off_diagonal_mean,
)
from .estimators import DyadicRegression, MRQAPTest, QAPTest, check_dyad, check_dyads
from .exceptions import (
    BudgetWarning,
    DegenerateMatrixError,
    DyadNumericalError,
    DyadValidationError,
    ParseError,
)
from .io import parse_edge_list, parse_matrix_csv, write_matrix_csv
from .permutation import (
    Mode,
    PermutationReport,
    Strategy,
    permutation_cdf,
    run_mrqap,
    run_qap,
)
from .regress import (
    DyadDesign,
    DyadFit,
    cluster_robust_variance,
    fit_dyadic_ols,
    make_design,
    residualize,
    wald_statistic,
)
from .rng import ALGORITHM as RNG_ALGORITHM
from .rng import PermutationStream, random_permutation
from .simulation import (
    ExperimentConfig,
    ExperimentSummary,
    KernelSpec,
    asymptotic_reference,
    compare_statistics,
    generate_dyadic_pair,
    generate_mrqap_design,
    run_experiment,
)
from .ustat import UStatEstimates, qap_estimates, studentized_statistic, unstudentized_statistic

__all__ = [
    "BudgetWarning",
    "DegenerateMatrixError",
    "DyadDesign",
    "DyadFit",
    "DyadMatrix",
    "DyadNumericalError",
    "DyadStats",
    "DyadValidationError",
    "DyadicRegression",
    "ExperimentConfig",
    "ExperimentSummary",
    "KernelSpec",
    "MRQAPTest",
    "Mode",
    "ParseError",
    "PermutationReport",
    "PermutationStream",
    "QAPTest",
    "RNG_ALGORITHM",
    "Strategy",
    "UStatEstimates",
    "apply_double_permutation",
    "asymptotic_reference",
    "centered",
    "check_dyad",
    "check_dyads",
    "cluster_robust_variance",
    "compare_statistics",
    "dyad_stats",
    "fit_dyadic_ols",
    "generate_dyadic_pair",
    "generate_mrqap_design",
    "make_design",
    "new_dyad_matrix",
    "off_diagonal_mean",
    "parse_edge_list",
    "parse_matrix_csv",
    "permutation_cdf",
    "qap_estimates",
    "random_permutation",
    "residualize",
    "run_experiment",
    "run_mrqap",
    "run_qap",
    "studentized_statistic",
    "unstudentized_statistic",
    "wald_statistic",
    "write_matrix_csv",
]
