"""Minibatch training and RMSE evaluation for the force regressors."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .models import ModelSpec, ModelWeights, init_weights, mse_loss_and_gradient, predict
from .optim import ADAM_BETA1, ADAM_BETA2, ADAM_EPS, AdamState, adam_step

EVAL_CHUNK = 4096  # windows per forward pass during evaluation


@dataclass(frozen=True)
class TrainConfig:
    """Optimization settings; defaults follow the training protocol."""

    batch_size: int = 32
    epochs: int = 50
    learning_rate: float = 1e-3
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS
    shuffle_seed: int = 0
    init_seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")


@dataclass
class WindowSet:
    """A batch of training samples: windows and their final-frame labels."""

    x: np.ndarray  # (m, window, features)
    y: np.ndarray  # (m, 3)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.x.ndim != 3 or self.y.shape != (len(self.x), 3):
            raise ValueError(
                f"windows must be (m, L, d) with (m, 3) labels, got "
                f"{self.x.shape} and {self.y.shape}"
            )

    def __len__(self) -> int:
        return len(self.x)


@dataclass
class RmseReport:
    """Per-axis and pooled root-mean-square error, newtons."""

    rmse_fx: float
    rmse_fy: float
    rmse_fz: float
    rmse_pooled: float
    n_samples: int


@dataclass
class TrainHistory:
    train_rmse: list[float] = field(default_factory=list)
    val_rmse: list[float] = field(default_factory=list)

    @property
    def best_epoch(self) -> int:
        """Zero-based epoch with the lowest validation RMSE."""
        if not self.val_rmse:
            raise ValueError("history is empty")
        return int(np.argmin(self.val_rmse))


@dataclass
class TrainResult:
    weights: ModelWeights  # after the final epoch
    best_weights: ModelWeights  # lowest validation RMSE snapshot
    history: TrainHistory


class SquaredErrorAccumulator:
    """Streaming per-axis sum of squared errors."""

    def __init__(self):
        self.sq = np.zeros(3)
        self.n = 0

    def add(self, w: ModelWeights, x: np.ndarray, y: np.ndarray) -> None:
        for lo in range(0, len(x), EVAL_CHUNK):
            chunk = slice(lo, lo + EVAL_CHUNK)
            err = predict(w, x[chunk]) - y[chunk]
            self.sq += np.sum(err * err, axis=0)
            self.n += len(err)

    def report(self) -> RmseReport:
        if self.n == 0:
            raise ValueError("no samples evaluated")
        per_axis = np.sqrt(self.sq / self.n)
        pooled = math.sqrt(float(np.sum(self.sq)) / (3 * self.n))
        return RmseReport(
            rmse_fx=float(per_axis[0]),
            rmse_fy=float(per_axis[1]),
            rmse_fz=float(per_axis[2]),
            rmse_pooled=pooled,
            n_samples=self.n,
        )


def evaluate_rmse(w: ModelWeights, data: WindowSet) -> RmseReport:
    acc = SquaredErrorAccumulator()
    acc.add(w, data.x, data.y)
    return acc.report()


def train(
    spec: ModelSpec,
    config: TrainConfig,
    train_set: WindowSet,
    val_set: WindowSet,
) -> TrainResult:
    """Minibatch MSE training with ADAM; deterministic given the seeds.

    Per epoch: shuffle, step over all batches (the last may be short),
    then record train and validation pooled RMSE.  Returns the final
    weights and the best-validation snapshot.
    """
    if len(train_set) == 0:
        raise ValueError("empty train set")
    if len(val_set) == 0:
        raise ValueError("empty validation set")
    w = init_weights(spec, seed=config.init_seed)
    state = AdamState.for_params(w.params)
    rng = np.random.default_rng(config.shuffle_seed)
    history = TrainHistory()
    best = w.copy()
    best_val = math.inf
    for _ in range(config.epochs):
        order = rng.permutation(len(train_set))
        for lo in range(0, len(order), config.batch_size):
            idx = order[lo : lo + config.batch_size]
            _, grads, _ = mse_loss_and_gradient(w, train_set.x[idx], train_set.y[idx])
            adam_step(
                w.params,
                grads,
                state,
                lr=config.learning_rate,
                beta1=config.beta1,
                beta2=config.beta2,
                eps=config.eps,
            )
        history.train_rmse.append(evaluate_rmse(w, train_set).rmse_pooled)
        val = evaluate_rmse(w, val_set).rmse_pooled
        history.val_rmse.append(val)
        if val < best_val:
            best_val = val
            best = w.copy()
    return TrainResult(weights=w, best_weights=best, history=history)
