"""Shared training-loop machinery: epoch shuffling, early stopping, logs.

Both trainable classifiers follow the same protocol: one seeded shuffle
pass per epoch, validation loss after every epoch, stop after `patience`
epochs without improvement (or at max_epochs), return the parameters that
achieved the minimum validation loss.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_acc: float


@dataclass
class TrainLog:
    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = -1

    def append(self, rec: EpochRecord) -> None:
        self.records.append(rec)

    @property
    def best_val_loss(self) -> float:
        return self.records[self.best_epoch].val_loss if self.best_epoch >= 0 else np.inf

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "train_loss", "val_loss", "val_acc"])
            for r in self.records:
                writer.writerow(
                    [r.epoch, f"{r.train_loss:.10g}", f"{r.val_loss:.10g}", f"{r.val_acc:.10g}"]
                )


class EarlyStopper:
    """Stop after `patience` consecutive epochs without validation improvement."""

    def __init__(self, patience: int):
        if patience < 0:
            raise ValueError(f"patience must be >= 0, got {patience}")
        self.patience = patience
        self.best_loss = np.inf
        self.best_epoch = -1
        self.epochs_since_improvement = 0

    def update(self, val_loss: float, epoch: int) -> bool:
        """Record an epoch's validation loss; True if it improved the best."""
        if val_loss < self.best_loss:
            self.best_loss = val_loss
            self.best_epoch = epoch
            self.epochs_since_improvement = 0
            return True
        self.epochs_since_improvement += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.epochs_since_improvement >= self.patience


def minibatch_indices(
    n: int, batch_size: int, rng: np.random.Generator
) -> Iterator[np.ndarray]:
    """Yield index batches covering one seeded shuffle of range(n)."""
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]
