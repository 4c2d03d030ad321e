"""Distributionally-diverse (DD) risk toolkit.

Computes the worst-case expected error over all test distributions whose
entropy sits within a budget of uniform: exact oracles and closed-form
bounds, a greedy adversarial approximation on sampled pools, inverse-
density training-set rebalancing, and a seeded synthetic benchmark tying
them together.
"""

from .adversarial import AdversarialPool, AdversarialResult, build_pool, dd_curve, greedy_adversarial, greedy_curve
from .bounds import (
    bernoulli_kl,
    dd_alpha_branch,
    dd_risk_bound,
    dd_risk_bound_simplified,
    dd_risk_exact,
    l1_to_uniform,
    q_star_entropy_gap,
)
from .core import BinGrid, Dataset, LabeledSample, Point2, RiskReport, bin_index, bin_indices, child_rng, zero_one_loss
from .density import DensityModel, GmmDensity, HistogramDensity, KdeDensity, fit_gmm, fit_histogram, fit_kde
from .entropy import BinnedHistogram, binned_entropy, entropy_gap, histogram
from .experiments import ExperimentConfig, grid_risk, load_config, run_experiment, run_fig1, run_fig3
from .learner import (
    MlpModel,
    SelectionResult,
    TrainConfig,
    TrainingTrace,
    gradient_check,
    predict,
    predict_batch,
    select_by_wdl2,
    train,
    wdl2,
)
from .rebalance import (
    WeightConfig,
    WeightedDataset,
    is_uniform_risk,
    rebalance_weights,
    split_half,
    unit_weights,
    weighted_empirical_risk,
)
from .tasks import (
    GaussianMixtureTask,
    RejectionBudgetError,
    TruncatedGaussianSampler,
    sample_task,
    sample_truncated_gaussian,
    sample_uniform,
    true_density_truncated_gaussian,
    true_label,
)

__version__ = "0.1.0"
