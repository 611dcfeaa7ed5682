"""Gradient-free block-coordinate training with built-in model compression.

Every network block (weights, pre-activations, post-activations, and a
compressed twin of each weight) is updated by an exact closed-form solve of
its own sub-problem, so each full sweep is guaranteed to decrease the
training objective by a computable margin — a property the diagnostics
module verifies at run time instead of assuming.
"""

from .compress import (
    CompressionSpec,
    compressed_param_count,
    compression_ratio,
    constraint_violation,
    project,
    sparsity,
    update_mc,
)
from .data import Dataset, load_csv, load_idx, make_synthetic
from .diagnostics import (
    IterationRecord,
    check_descent,
    rate_summary,
    stationarity_estimate,
    sufficient_decrease_coefficient,
)
from .errors import NNBCDError
from .linalg import im2col, solve_spd, truncated_svd
from .model import (
    Activation,
    BlockState,
    Hyperparams,
    NetworkSpec,
    compressed_weights_of,
    empirical_risk,
    forward,
    init_state,
    objective,
    weights_of,
)
from .prox import (
    hard_threshold,
    project_topk,
    prox_hinge,
    prox_leaky_relu,
    prox_relu,
    soft_threshold,
)
from .train import TrainResult, accuracy, balanced_accuracy, run_training
from .tt import (
    Tensorization,
    TTCores,
    max_rank_chain,
    tt_forward,
    tt_param_count,
    tt_reconstruct,
    tt_svd,
)

__version__ = "0.1.0"

__all__ = [
    "Activation", "BlockState", "CompressionSpec", "Dataset", "Hyperparams",
    "IterationRecord", "NetworkSpec", "NNBCDError", "TTCores", "Tensorization",
    "TrainResult", "accuracy", "balanced_accuracy", "check_descent",
    "compressed_param_count", "compressed_weights_of", "compression_ratio",
    "constraint_violation", "empirical_risk", "forward", "hard_threshold",
    "im2col", "init_state", "load_csv", "load_idx", "make_synthetic",
    "max_rank_chain", "objective", "project", "project_topk", "prox_hinge",
    "prox_leaky_relu", "prox_relu", "rate_summary", "run_training",
    "soft_threshold", "solve_spd", "sparsity", "stationarity_estimate",
    "sufficient_decrease_coefficient", "truncated_svd", "tt_forward",
    "tt_param_count", "tt_reconstruct", "tt_svd", "update_mc", "weights_of",
]
