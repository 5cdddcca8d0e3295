"""Sorted-L1 penalized regression with FDR, k-FWER and FDP calibrated penalties.

Includes the stepdown multiple-testing baselines, seeded simulation designs and
a config-driven Monte Carlo harness.
"""

from .exceptions import ConditioningError, ConfigError, DimensionError, DomainError, SlopeError
from .harness import ExperimentConfig, emit_heatmap, emit_report, load_config, run_experiment
from .metrics import ExperimentReport, SelectionOutcome, aggregate, fdp, score_selection
from .sequences import (
    SequenceSpec,
    gaussian_correction,
    lambda_bh,
    lambda_fdp,
    lambda_kfwer,
    monte_carlo_correction,
    wishart_weight,
)
from .simgen import (
    RngStream,
    gen_correlated_means,
    gen_gaussian_design,
    gen_orthogonal,
)
from .solver import (
    Problem,
    SlopeSolution,
    SolverOptions,
    duality_gap,
    solve_orthogonal,
    solve_slope,
    support_of,
)
from .sorted_l1 import LambdaSequence, prox_sorted_l1, sorted_l1_norm
from .special import std_normal_cdf, std_normal_quantile
from .stepdown import fdp_thresholds, kfwer_thresholds, stepdown_select, two_sided_p

__version__ = "0.1.0"
