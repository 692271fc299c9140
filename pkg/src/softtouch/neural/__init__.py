"""From-scratch neural force regressors and their training machinery."""

from .models import (
    LAYOUT_VERSION,
    Arch,
    ModelSpec,
    ModelWeights,
    PreprocessBundle,
    backward_batch,
    forward,
    forward_batch,
    init_weights,
    load_weights,
    mse_loss_and_gradient,
    predict,
    save_weights,
)
from .optim import ADAM_BETA1, ADAM_BETA2, ADAM_EPS, AdamState, adam_step
from .training import (
    RmseReport,
    SquaredErrorAccumulator,
    TrainConfig,
    TrainHistory,
    TrainResult,
    WindowSet,
    evaluate_rmse,
    train,
)

__all__ = [
    "ADAM_BETA1",
    "ADAM_BETA2",
    "ADAM_EPS",
    "AdamState",
    "Arch",
    "LAYOUT_VERSION",
    "ModelSpec",
    "ModelWeights",
    "PreprocessBundle",
    "RmseReport",
    "SquaredErrorAccumulator",
    "TrainConfig",
    "TrainHistory",
    "TrainResult",
    "WindowSet",
    "adam_step",
    "backward_batch",
    "evaluate_rmse",
    "forward",
    "forward_batch",
    "init_weights",
    "load_weights",
    "mse_loss_and_gradient",
    "predict",
    "save_weights",
    "train",
]
