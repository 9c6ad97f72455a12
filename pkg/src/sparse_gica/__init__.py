"""Recover a sparse mixing matrix from the covariance of its Gaussian mixtures.

Given ``Sigma = A A^T + D`` (or a Wishart sample of it) with ``A`` drawn from
the Bernoulli-Gaussian ensemble, the columns of ``A`` are recovered one at a
time by a ratio-mode/median procedure on pairs of covariance rows, each
verified and deflated out of the working matrix.
"""

from .concentration import (
    binomial_range,
    covariance_deviation,
    okamoto_tail,
    plan_sample_size,
    row_norm_bound,
    theoretical_epsilon,
    theta_band,
)
from .harness import TrialConfig, TrialRecord, run_sweep, run_trial
from .metrics import Matching, dist, support_metrics
from .model import (
    CovarianceInput,
    empirical_covariance,
    population_covariance,
    sample_bg,
    sample_data,
    sample_empirical_covariance,
)
from .recovery import (
    ColumnCandidate,
    RecoveryResult,
    ScipParams,
    l_set,
    ratio_mode,
    recover,
    scip,
    scip_population,
    verify_column,
)
from .structure import StructureReport, h_eps, oc_check, overlap_sets, structure_report, supports

__version__ = "0.1.0"

__all__ = [
    "ColumnCandidate", "CovarianceInput", "Matching", "RecoveryResult", "ScipParams",
    "StructureReport", "TrialConfig", "TrialRecord", "binomial_range", "covariance_deviation",
    "dist", "empirical_covariance", "h_eps", "l_set", "oc_check", "okamoto_tail",
    "overlap_sets", "plan_sample_size", "population_covariance", "ratio_mode", "recover",
    "row_norm_bound", "run_sweep", "run_trial", "sample_bg", "sample_data",
    "sample_empirical_covariance", "scip", "scip_population", "structure_report", "supports",
    "support_metrics", "theoretical_epsilon", "theta_band", "verify_column",
]
