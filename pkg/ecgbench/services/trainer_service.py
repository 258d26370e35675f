"""Supervised training: loss, gradients, optimizers, early stopping and the epoch loop"""
import time
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from ecgbench.core.exceptions import ShapeError, TrainingDivergedError
from ecgbench.core.tensor import RngStream
from ecgbench.models.beats import Dataset
from ecgbench.models.network import Sequential
from ecgbench.schemas.config import OptimizerKind, TrainConfig
from ecgbench.schemas.metrics import EpochRecord, TrainingHistory
from ecgbench.utils.logger import logger

PROB_FLOOR = 1e-12


def _check_labels(labels: np.ndarray, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if np.any(labels < 0) or np.any(labels >= num_classes):
        raise ValueError(f"Labels must lie in 0..{num_classes - 1}")
    return labels


def cross_entropy_loss(probs: np.ndarray, labels: Sequence[int]) -> float:
    """Mean -log p(true class), probabilities floored at 1e-12"""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2:
        raise ShapeError(f"probs must be [N, num_classes], got {probs.shape}")
    labels = _check_labels(labels, probs.shape[1])
    if labels.shape != (probs.shape[0],):
        raise ShapeError(f"Got {labels.shape[0]} labels for {probs.shape[0]} rows")
    # non-finite rows fall through so callers can report divergence
    if np.all(np.isfinite(probs)) and not np.allclose(probs.sum(axis=1), 1.0, atol=1e-6):
        raise ValueError("Each probability row must sum to 1")
    picked = np.maximum(probs[np.arange(len(labels)), labels], PROB_FLOOR)
    return float(-np.mean(np.log(picked)))


def cross_entropy_grad(probs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """d(mean cross-entropy)/d(probs)"""
    grad = np.zeros_like(probs)
    rows = np.arange(len(labels))
    picked = probs[rows, labels]
    grad[rows, labels] = np.where(picked > PROB_FLOOR, -1.0 / np.maximum(picked, PROB_FLOOR), 0.0)
    return grad / len(labels)


def backward(model: Sequential, batch: Tuple[np.ndarray, np.ndarray], training: bool = True
             ) -> Tuple[float, Dict[str, np.ndarray]]:
    """
    Forward and backward pass over one batch

    Args:
        model: network to differentiate
        batch: (inputs [N, ...], integer labels [N])
        training: enables dropout

    Returns:
        (batch loss, gradient for every trainable tensor keyed like model.parameters())
    """
    x, labels = batch
    if x.shape[0] != len(labels):
        raise ShapeError(f"Batch has {x.shape[0]} inputs but {len(labels)} labels")
    probs = model.forward(x, training=training)
    labels = _check_labels(labels, probs.shape[1])
    loss = cross_entropy_loss(probs, labels)
    model.backward(cross_entropy_grad(probs, labels))
    return loss, model.gradients()


class SgdOptimizer:
    """Plain stochastic gradient descent"""

    def __init__(self, learning_rate: float):
        self.learning_rate = learning_rate

    def step(self, params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray]) -> None:
        for key, grad in grads.items():
            params[key] -= self.learning_rate * grad


class AdamOptimizer:
    """Adam with bias-corrected moment estimates"""

    def __init__(self, learning_rate: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: Dict[str, np.ndarray] = {}
        self.v: Dict[str, np.ndarray] = {}

    def step(self, params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray]) -> None:
        self.t += 1
        lr_t = self.learning_rate * np.sqrt(1.0 - self.beta2 ** self.t) / (1.0 - self.beta1 ** self.t)
        for key, grad in grads.items():
            m = self.m.setdefault(key, np.zeros_like(grad))
            v = self.v.setdefault(key, np.zeros_like(grad))
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad * grad
            params[key] -= lr_t * m / (np.sqrt(v) + self.eps)


def make_optimizer(cfg: TrainConfig):
    if cfg.optimizer == OptimizerKind.SGD:
        return SgdOptimizer(cfg.learning_rate)
    return AdamOptimizer(cfg.learning_rate)


def clip_gradients(grads: Dict[str, np.ndarray], max_norm: float) -> float:
    """Rescale ``grads`` in place so their joint L2 norm is at most ``max_norm``; returns the norm before clipping"""
    norm = float(np.sqrt(sum(np.sum(g * g) for g in grads.values())))
    if max_norm > 0.0 and norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm


class EarlyStopping:
    """
    Tracks validation loss; an epoch improves when it beats the best loss by
    more than min_delta. Training stops on the first non-improving epoch after
    ``patience`` consecutive non-improving epochs.
    """

    def __init__(self, patience: int, min_delta: float):
        self.patience = patience
        self.min_delta = min_delta
        self.best_val_loss = float("inf")
        self.best_epoch = 0
        self.epochs_without_improvement = 0

    def update(self, epoch: int, val_loss: float) -> bool:
        """Record one epoch; returns True when training should stop"""
        if val_loss < self.best_val_loss - self.min_delta:
            self.best_val_loss = val_loss
            self.best_epoch = epoch
            self.epochs_without_improvement = 0
            return False
        if self.epochs_without_improvement >= self.patience:
            return True
        self.epochs_without_improvement += 1
        return False


def fit(model: Sequential, train: Dataset, val: Dataset, cfg: TrainConfig) -> Tuple[Sequential, TrainingHistory]:
    """
    Mini-batch training with per-epoch validation and early stopping

    Args:
        model: network to train in place
        train: training set
        val: validation set used for early stopping
        cfg: training hyperparameters

    Returns:
        (model, history); on early stop the model holds its best-validation parameters
    """
    rng = RngStream(cfg.seed)
    model.reseed(cfg.seed + 1)
    optimizer = make_optimizer(cfg)
    stopper = EarlyStopping(cfg.patience, cfg.min_delta)
    history = TrainingHistory()
    best_snapshot = model.snapshot()
    params = model.parameters()
    x_train, y_train = train.features, train.labels
    x_val, y_val = val.features, val.labels

    for epoch in range(1, cfg.epochs + 1):
        started = time.perf_counter()
        order = rng.permutation(len(train))
        batch_losses = []
        for batch_index, start in enumerate(range(0, len(order), cfg.batch_size)):
            idx = order[start:start + cfg.batch_size]
            loss, grads = backward(model, (x_train[idx], y_train[idx]))
            if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
                logger.error(f"Non-finite loss at epoch {epoch}, batch {batch_index}")
                raise TrainingDivergedError(epoch, batch_index, loss)
            clip_gradients(grads, cfg.clip_norm)
            optimizer.step(params, grads)
            batch_losses.append(loss * len(idx))
        train_loss = float(np.sum(batch_losses) / len(train))
        val_loss = cross_entropy_loss(model.predict_proba(x_val), y_val)
        if not np.isfinite(val_loss):
            raise TrainingDivergedError(epoch, -1, val_loss)
        history.epochs.append(EpochRecord(
            epoch=epoch,
            train_loss=train_loss,
            val_loss=val_loss,
            wall_clock_s=time.perf_counter() - started,
        ))
        logger.info(f"[{model.name}] epoch {epoch}/{cfg.epochs} train_loss={train_loss:.4f} val_loss={val_loss:.4f}")

        if stopper.update(epoch, val_loss):
            model.restore(best_snapshot)
            history.stopped_early = True
            logger.info(f"[{model.name}] early stop at epoch {epoch}, restored epoch {stopper.best_epoch}")
            break
        if stopper.best_epoch == epoch:
            best_snapshot = model.snapshot()

    history.best_epoch = stopper.best_epoch
    return model, history
