"""Learning-rate-on-plateau and early stopping over the validation loss."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass
class PlateauState:
    """Reduce-on-plateau bookkeeping.

    When the best validation loss has not improved by more than `threshold`
    for `patience` consecutive epochs, the rate is multiplied by `factor`
    (floored at `min_lr`) and the wait counter resets.
    """

    lr: float
    factor: float = 0.4
    patience: int = 8
    threshold: float = 1e-4
    min_lr: float = 1e-6
    best: float = float("inf")
    wait: int = 0

    def update(self, val_loss: float) -> float:
        if val_loss < self.best - self.threshold:
            self.best = val_loss
            self.wait = 0
        else:
            self.wait += 1
            if self.wait >= self.patience:
                self.lr = max(self.lr * self.factor, self.min_lr)
                self.wait = 0
        return self.lr


def lr_on_plateau(state: PlateauState, val_loss: float) -> float:
    return state.update(val_loss)


@dataclass
class EarlyStopState:
    """Stop when the best validation loss is `patience` epochs old."""

    patience: int = 15
    best: float = float("inf")
    best_epoch: int = 0
    wait: int = 0

    def update(self, epoch: int, val_loss: float) -> bool:
        """Record one epoch; returns True when training should stop."""
        if val_loss < self.best:
            self.best = val_loss
            self.best_epoch = epoch
            self.wait = 0
            return False
        self.wait += 1
        return self.wait >= self.patience


def early_stop_check(state: EarlyStopState, epoch: int, val_loss: float) -> bool:
    return state.update(epoch, val_loss)
