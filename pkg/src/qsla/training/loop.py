"""The epoch loop: shuffled mini-batches, Adam, the plateau schedule,
early stopping with best-epoch restoration, and reproducible logging.

Epoch records go to `epochs.jsonl` (excluding wall-clock time, so reruns
at a fixed seed are byte-identical); per-epoch timings go to the separate
`timings.jsonl`, which is hardware-dependent by nature.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..autodiff import ops
from ..autodiff.tensor import Tape
from ..errors import ConfigError, DataError, NumericalError
from ..model.network import Model
from ..signal.dataset import SignalDataset
from ..signal.frames import quad_views_batch
from .optim import AdamState, adam_step
from .schedule import EarlyStopState, PlateauState

_SHUFFLE_STREAM = 2


@dataclass(frozen=True)
class TrainConfig:
    """Optimization recipe; the defaults are the full-scale settings.

    Desk-scale runs typically override batch_size (128) and max_epochs.
    """

    lr0: float = 1e-3
    plateau_factor: float = 0.4
    plateau_patience: int = 8
    plateau_threshold: float = 1e-4
    max_epochs: int = 100
    batch_size: int = 1024
    early_stop_patience: int = 15
    min_lr: float = 1e-6
    seed: int = 0
    checkpoint_every: int = 0  # 0 disables periodic checkpoints

    def __post_init__(self):
        if not 0.0 < self.plateau_factor < 1.0:
            raise ConfigError("plateau_factor must lie in (0, 1)")
        if self.plateau_patience < 1 or self.early_stop_patience < 1:
            raise ConfigError("patience values must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.max_epochs < 1:
            raise ConfigError("max_epochs must be >= 1")
        if self.lr0 <= 0 or self.min_lr <= 0:
            raise ConfigError("learning rates must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown train config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: float
    lr: float
    seconds: float

    def log_fields(self) -> dict:
        d = asdict(self)
        d.pop("seconds")
        return d


def _views_subset(views: dict[str, np.ndarray], idx: np.ndarray) -> dict:
    return {k: v[idx] for k, v in views.items()}


def evaluate(model: Model, views: dict[str, np.ndarray], labels: np.ndarray,
             batch_size: int) -> tuple[float, float, np.ndarray]:
    """Eval-mode mean cross-entropy, accuracy, and stacked probabilities."""
    n = len(labels)
    total_loss = 0.0
    correct = 0
    probs_out = []
    for start in range(0, n, batch_size):
        idx = np.arange(start, min(start + batch_size, n))
        logits = model.forward_views(_views_subset(views, idx), "eval")
        loss, probs = ops.softmax_crossentropy(logits, labels[idx])
        total_loss += float(loss.data) * len(idx)
        correct += int((probs.argmax(axis=1) == labels[idx]).sum())
        probs_out.append(probs)
    return total_loss / n, correct / n, np.concatenate(probs_out, axis=0)


def train(model: Model, ds: SignalDataset, config: TrainConfig,
          run_dir=None) -> tuple[list[EpochRecord], dict]:
    """Run the full recipe; returns the epoch records and the best snapshot.

    The model is left holding the restored best-epoch weights. When
    `run_dir` is given, epoch records, timings, periodic/best checkpoints,
    and the final manifest are written there.
    """
    if ds.split is None:
        raise DataError("dataset has no split; generate or load one first")
    if model.config.num_classes != len(ds.meta.class_names):
        raise ConfigError(
            f"model expects {model.config.num_classes} classes but dataset has"
            f" {len(ds.meta.class_names)}"
        )
    run_dir = Path(run_dir) if run_dir is not None else None
    log_f = timing_f = None
    if run_dir is not None:
        run_dir.mkdir(parents=True, exist_ok=True)
        log_f = open(run_dir / "epochs.jsonl", "w")
        timing_f = open(run_dir / "timings.jsonl", "w")

    views = quad_views_batch(ds.iq.astype(np.float32, copy=False))
    labels = ds.labels.astype(np.int64)
    train_idx = np.asarray(ds.split.train, dtype=np.int64)
    val_idx = np.asarray(ds.split.val, dtype=np.int64)
    train_views = _views_subset(views, train_idx)
    train_labels = labels[train_idx]
    val_views = _views_subset(views, val_idx)
    val_labels = labels[val_idx]

    model.dropout.reseed(config.seed)
    adam = AdamState()
    plateau = PlateauState(
        lr=config.lr0, factor=config.plateau_factor,
        patience=config.plateau_patience, threshold=config.plateau_threshold,
        min_lr=config.min_lr,
    )
    stopper = EarlyStopState(patience=config.early_stop_patience)
    params = model.parameters()
    records: list[EpochRecord] = []
    best_snapshot = model.snapshot()
    lr = config.lr0
    n_train = len(train_idx)

    try:
        for epoch in range(1, config.max_epochs + 1):
            t0 = time.perf_counter()
            rng = np.random.default_rng(
                np.random.SeedSequence(entropy=config.seed,
                                       spawn_key=(_SHUFFLE_STREAM, epoch))
            )
            order = rng.permutation(n_train)
            epoch_loss = 0.0
            for start in range(0, n_train, config.batch_size):
                idx = order[start : start + config.batch_size]
                model.zero_grads()
                with Tape() as tape:
                    logits = model.forward_views(_views_subset(train_views, idx),
                                                 "train")
                    ce, _ = ops.softmax_crossentropy(logits, train_labels[idx])
                    total = ops.add(ce, model.l2_penalty())
                tape.backward(total)
                adam_step(params, adam, lr)
                epoch_loss += float(total.data) * len(idx)
            train_loss = epoch_loss / n_train

            val_loss, val_acc, _ = evaluate(model, val_views, val_labels,
                                            config.batch_size)
            if not np.isfinite(val_loss) or not np.isfinite(train_loss):
                if run_dir is not None:
                    model.restore(best_snapshot)
                    model.manifest().save(run_dir / "diverged-last-good.qslaw")
                raise NumericalError(
                    f"divergence at epoch {epoch}: train {train_loss},"
                    f" val {val_loss}"
                )

            record = EpochRecord(epoch, train_loss, val_loss, val_acc, lr,
                                 time.perf_counter() - t0)
            records.append(record)
            if log_f is not None:
                log_f.write(json.dumps(record.log_fields()) + "\n")
                log_f.flush()
                timing_f.write(json.dumps({"epoch": epoch,
                                           "seconds": record.seconds}) + "\n")
                timing_f.flush()

            improved = val_loss < stopper.best
            stop = stopper.update(epoch, val_loss)
            if improved:
                best_snapshot = model.snapshot()
                if run_dir is not None:
                    model.manifest().save(run_dir / f"{epoch}.qslaw")
            elif (run_dir is not None and config.checkpoint_every
                  and epoch % config.checkpoint_every == 0):
                model.manifest().save(run_dir / f"{epoch}.qslaw")
            lr = plateau.update(val_loss)
            if stop:
                break
    finally:
        if log_f is not None:
            log_f.close()
            timing_f.close()

    model.restore(best_snapshot)
    if run_dir is not None:
        model.manifest().save(run_dir / "final.qslaw")
    return records, best_snapshot
