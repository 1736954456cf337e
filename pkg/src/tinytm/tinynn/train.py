from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .loss import batch_loss, batch_loss_and_grad, normalize_params
from .model import REFERENCE, Architecture, ModelWeights, check_budget, init_weights
from .optim import AdamState, PlateauScheduler, adam_step

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 16
    plateau_factor: float = 0.3
    plateau_patience: int = 6
    min_lr: float = 1e-8
    max_epochs: int = 100
    seed: int = 0
    cil_weight: float = 1.0

    def __post_init__(self):
        if self.learning_rate <= 0 or self.min_lr <= 0:
            raise ValueError("learning rates must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if not 0 < self.plateau_factor < 1:
            raise ValueError("plateau_factor must be in (0, 1)")
        if self.plateau_patience < 0 or self.max_epochs < 0 or self.cil_weight < 0:
            raise ValueError("patience, epochs and cil_weight must be non-negative")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    lr: float


@dataclass
class History:
    initial_train_loss: float
    initial_val_loss: float
    epochs: list = field(default_factory=list)
    best_epoch: int = 0
    best_val_loss: float = math.inf

    def lines(self) -> list[str]:
        out = [
            "# epoch train_loss val_loss lr",
            f"# initial train_loss={self.initial_train_loss!r} val_loss={self.initial_val_loss!r}",
        ]
        out += [f"{r.epoch} {r.train_loss!r} {r.val_loss!r} {r.lr!r}" for r in self.epochs]
        return out


def iterations_per_epoch(n_samples: int, batch_size: int) -> int:
    return math.ceil(n_samples / batch_size)


def dataset_loss(w: ModelWeights, data, cil_weight: float = 1.0, chunk: int = 4096) -> float:
    """Mean per-sample loss over a whole dataset."""
    targets = normalize_params(data.params)
    total = 0.0
    for start in range(0, len(data), chunk):
        sl = slice(start, start + chunk)
        n = len(data.params[sl])
        total += batch_loss(w, data.hists[sl], targets[sl], cil_weight) * n
    return total / len(data)


def train(train_set, val_set, cfg: TrainConfig, arch: Architecture = REFERENCE):
    """Adam on shuffled mini-batches with plateau scheduling on validation loss.

    Returns the float32 weights of the epoch with the lowest validation loss
    (the initialization counts as epoch 0) and the per-epoch history.
    """
    if len(train_set) == 0 or len(val_set) == 0:
        raise ValueError("training and validation sets must be non-empty")
    check_budget(arch)
    rng = np.random.default_rng(cfg.seed)
    w = init_weights(arch, rng)
    targets = normalize_params(train_set.params)
    state = AdamState()
    sched = PlateauScheduler(cfg.learning_rate, cfg.plateau_factor, cfg.plateau_patience, cfg.min_lr)

    hist = History(
        initial_train_loss=dataset_loss(w, train_set, cfg.cil_weight),
        initial_val_loss=dataset_loss(w, val_set, cfg.cil_weight),
    )
    hist.best_val_loss = hist.initial_val_loss
    best_w = w

    n = len(train_set)
    for epoch in range(1, cfg.max_epochs + 1):
        lr = sched.lr
        order = rng.permutation(n)
        running = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            batch_loss_value, grads = batch_loss_and_grad(
                w, train_set.hists[idx], targets[idx], cfg.cil_weight
            )
            running += batch_loss_value * len(idx)
            w, state = adam_step(w, grads, state, lr)
        val = dataset_loss(w, val_set, cfg.cil_weight)
        hist.epochs.append(EpochRecord(epoch, running / n, val, lr))
        if val < hist.best_val_loss:
            hist.best_val_loss, hist.best_epoch, best_w = val, epoch, w
        sched.step(val)
        log.info("epoch %d train %.6f val %.6f lr %.3g", epoch, running / n, val, lr)
    return best_w.astype(np.float32), hist
