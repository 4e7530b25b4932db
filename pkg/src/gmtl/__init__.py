"""Generative multitask prediction and prior-shift robustness evaluation."""

from .harness import (
    SweepConfig,
    SweepResult,
    gap_curve,
    optimal_alpha_correlation,
    run_sweep,
    sweep,
)
from .inference import (
    Prediction,
    ScoreRecord,
    ScoreTable,
    check_alpha,
    dmtl_predict_main,
    gmtl_predict,
    joint_log_posterior,
    predict_batch,
    predict_table,
)
from .priors import (
    BivariateBernoulliParams,
    JointPrior,
    TargetSpace,
    estimate_prior,
    marginal_aux,
    marginal_main,
    pair_counts,
    prior_from_bernoulli,
    read_counts,
    write_counts,
)
from .io import read_scores, write_scores
from .rank import severity_bins, weighted_kendall_tau
from .shift import (
    ShiftedPrior,
    ShiftSpec,
    effective_sample_size,
    importance_weighted_accuracy,
    importance_weights,
    sample_shift,
)
from .synthetic import (
    MixtureSpec,
    dmtl_boundary,
    exact_log_posteriors,
    gmtl_boundary,
    log_likelihood,
    oracle_scores,
    sample_dataset,
)

__version__ = "0.1.0"
