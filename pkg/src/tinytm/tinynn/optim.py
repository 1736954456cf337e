from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import ModelWeights, ShapeError


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_step(
    w: ModelWeights,
    grads: dict,
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[ModelWeights, AdamState]:
    """One bias-corrected Adam update; returns new weights and a new state."""
    if set(grads) != set(w.tensors):
        raise ShapeError("gradient names do not match the weights")
    t = state.t + 1
    new_w, new_m, new_v = {}, {}, {}
    for name, p in w.tensors.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeError(f"{name}: gradient shape {g.shape} != weight shape {p.shape}")
        m = beta1 * state.m.get(name, 0.0) + (1 - beta1) * g
        v = beta2 * state.v.get(name, 0.0) + (1 - beta2) * g * g
        m_hat = m / (1 - beta1**t)
        v_hat = v / (1 - beta2**t)
        new_w[name] = p - lr * m_hat / (np.sqrt(v_hat) + eps)
        new_m[name], new_v[name] = m, v
    return ModelWeights(new_w, w.arch), AdamState(new_m, new_v, t)


class PlateauScheduler:
    """Cut the learning rate when validation loss stops improving.

    After more than ``patience`` consecutive epochs without a new best, the
    rate is multiplied by ``factor`` (never below ``min_lr``) and tracking of
    the best loss starts over.
    """

    def __init__(self, lr: float, factor: float = 0.3, patience: int = 6, min_lr: float = 1e-8):
        if not 0 < factor < 1:
            raise ValueError("factor must be in (0, 1)")
        self.lr = lr
        self.factor = factor
        self.patience = patience
        self.min_lr = min_lr
        self.best = math.inf
        self.bad_epochs = 0

    def step(self, val_loss: float) -> float:
        if val_loss < self.best:
            self.best = val_loss
            self.bad_epochs = 0
        else:
            self.bad_epochs += 1
        if self.bad_epochs > self.patience:
            self.lr = max(self.lr * self.factor, self.min_lr)
            self.best = math.inf
            self.bad_epochs = 0
        return self.lr


def plateau_scheduler(history, current_lr: float, factor=0.3, patience=6, min_lr=1e-8) -> float:
    """Learning rate after replaying ``history`` (validation losses) from ``current_lr``."""
    if len(history) == 0:
        raise ValueError("history must not be empty")
    sched = PlateauScheduler(current_lr, factor, patience, min_lr)
    for v in history:
        sched.step(v)
    return sched.lr
