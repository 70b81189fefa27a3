"""Linear SVM on flattened 24-value spectrogram vectors.

Trained by mini-batch SGD with momentum on the hinge loss plus an L2
penalty (c/2)*|w|^2 on the weights; the bias is not regularized. Labels
are -1/+1. Early stopping follows the shared protocol in `training`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .training import EarlyStopper, EpochRecord, TrainLog, minibatch_indices


@dataclass
class SvmModel:
    w: np.ndarray
    b: float

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=np.float64)
        if not (np.isfinite(self.w).all() and np.isfinite(self.b)):
            raise ValueError("SVM parameters must be finite")

    def decision(self, X: np.ndarray) -> np.ndarray:
        return np.atleast_2d(X) @ self.w + self.b

    def copy(self) -> "SvmModel":
        return SvmModel(self.w.copy(), self.b)


@dataclass(frozen=True)
class SvmTrainConfig:
    lr: float = 0.01
    momentum: float = 0.9
    reg_c: float = 0.01
    batch_size: int = 128
    patience: int = 200
    max_epochs: int = 5000
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if not 0 <= self.momentum < 1:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.patience > self.max_epochs:
            raise ValueError(f"patience {self.patience} exceeds max_epochs {self.max_epochs}")


def svm_loss(model: SvmModel, X: np.ndarray, y: np.ndarray, reg_c: float) -> float:
    """Mean hinge loss over the batch plus (c/2)*|w|^2."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    if len(X) == 0:
        raise ValueError("empty batch")
    margins = y * model.decision(X)
    hinge = np.maximum(0.0, 1.0 - margins).mean()
    return float(hinge + 0.5 * reg_c * model.w @ model.w)


def svm_gradient(
    model: SvmModel, X: np.ndarray, y: np.ndarray, reg_c: float
) -> tuple[np.ndarray, float]:
    """Subgradient of svm_loss; the hinge kink (margin exactly 1) contributes 0."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    margins = y * model.decision(X)
    active = margins < 1.0
    gw = -(y[active, None] * X[active]).sum(axis=0) / len(X) + reg_c * model.w
    gb = -y[active].sum() / len(X)
    return gw, float(gb)


def svm_predict(model: SvmModel, x: np.ndarray) -> int:
    """Predicted label in {-1, +1}; a decision value of 0 maps to -1."""
    return 1 if float(model.decision(x)[0]) > 0.0 else -1


def svm_predict_batch(model: SvmModel, X: np.ndarray) -> np.ndarray:
    return np.where(model.decision(X) > 0.0, 1, -1)


def svm_train(
    X_train: np.ndarray,
    y_train: np.ndarray,
    X_val: np.ndarray,
    y_val: np.ndarray,
    cfg: SvmTrainConfig = SvmTrainConfig(),
) -> tuple[SvmModel, TrainLog]:
    """Train by mini-batch SGD with momentum; return the best-validation model."""
    X_train = np.atleast_2d(np.asarray(X_train, dtype=np.float64))
    y_train = np.asarray(y_train, dtype=np.float64)
    X_val = np.atleast_2d(np.asarray(X_val, dtype=np.float64))
    y_val = np.asarray(y_val, dtype=np.float64)
    if len(X_train) == 0 or len(X_val) == 0:
        raise ValueError("train and validation partitions must both be non-empty")
    if len(set(np.sign(y_train))) < 2:
        raise ValueError("training data must contain both classes")

    rng = np.random.default_rng(cfg.seed)
    model = SvmModel(np.zeros(X_train.shape[1]), 0.0)
    vw = np.zeros_like(model.w)
    vb = 0.0
    best = model.copy()
    stopper = EarlyStopper(cfg.patience)
    log = TrainLog()

    for epoch in range(cfg.max_epochs):
        batch_losses = []
        for idx in minibatch_indices(len(X_train), cfg.batch_size, rng):
            Xb, yb = X_train[idx], y_train[idx]
            batch_losses.append(svm_loss(model, Xb, yb, cfg.reg_c) * len(idx))
            gw, gb = svm_gradient(model, Xb, yb, cfg.reg_c)
            vw = cfg.momentum * vw + gw
            vb = cfg.momentum * vb + gb
            model.w = model.w - cfg.lr * vw
            model.b = model.b - cfg.lr * vb
        train_loss = float(np.sum(batch_losses) / len(X_train))
        val_loss = svm_loss(model, X_val, y_val, cfg.reg_c)
        val_acc = float((svm_predict_batch(model, X_val) == y_val).mean())
        log.append(EpochRecord(epoch, train_loss, val_loss, val_acc))
        if stopper.update(val_loss, epoch):
            best = model.copy()
            log.best_epoch = epoch
        if stopper.should_stop:
            break
    return best, log
