"""Central finite-difference oracle for the network loss gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from corpus import make_corpus
from tinytm.simulate import sample_random_params, simulate_sample
from tinytm.tinynn import backward, batch_loss, forward, normalize_params
from tinytm.tinynn.loss import _gain2, _integral, logistic
from tinytm.tinynn.model import ModelWeights


@dataclass
class Check:
    name: str
    index: tuple
    analytic: float
    numeric: float
    crosses_kink: bool

    @property
    def rel_err(self) -> float:
        scale = max(abs(self.analytic), abs(self.numeric))
        return 0.0 if scale < 1e-10 else abs(self.analytic - self.numeric) / scale


def simulated_inputs(count: int, seed: int):
    """Histograms of randomly degraded corpus crops, paired with unrelated random targets."""
    rng = np.random.default_rng(seed)
    hists, gts = [], []
    for img in make_corpus(count, seed=seed, size=32):
        hists.append(simulate_sample(img, sample_random_params(rng)).hist.stacked())
        gts.append(sample_random_params(rng).as_tuple())
    return np.array(hists), np.array(gts)


def _perturbed(w: ModelWeights, name, idx, delta) -> ModelWeights:
    t = {k: v.copy() for k, v in w.tensors.items()}
    t[name][idx] += delta
    return ModelWeights(t, w.arch)


def _kink_pattern(w, hist, unit_gt):
    """Signs of every absolute-value argument in the loss."""
    u = logistic(forward(w, hist))
    ci = _integral(_gain2(u[:, 3])) - _integral(_gain2(unit_gt[:, 3]))
    return np.concatenate([np.sign(u - unit_gt).ravel(), np.sign(ci)])


def pick_weights(w: ModelWeights, rng, count: int):
    sizes = [(k, v.size) for k, v in w.tensors.items()]
    total = sum(s for _, s in sizes)
    out = []
    for flat in rng.choice(total, size=count, replace=False):
        for name, size in sizes:
            if flat < size:
                out.append((name, np.unravel_index(flat, w[name].shape)))
                break
            flat -= size
    return out


def gradient_checks(w, hist, gt, picks, h=1e-3) -> list[Check]:
    """Compare analytic and central-difference derivatives of the loss on one input.

    A check is flagged when the stencil ``[w - h, w + h]`` crosses a point
    where one of the loss's absolute values changes sign; the loss is not
    differentiable there and central differences say nothing about the
    gradient.
    """
    hist = np.asarray(hist)[None] if np.ndim(hist) == 2 else hist
    gt = np.atleast_2d(gt)
    unit_gt = normalize_params(gt)
    grads = backward(w, hist, gt)
    base = _kink_pattern(w, hist, unit_gt)
    out = []
    for name, idx in picks:
        plus, minus = _perturbed(w, name, idx, h), _perturbed(w, name, idx, -h)
        numeric = (batch_loss(plus, hist, unit_gt) - batch_loss(minus, hist, unit_gt)) / (2 * h)
        kink = not (
            np.array_equal(_kink_pattern(plus, hist, unit_gt), base)
            and np.array_equal(_kink_pattern(minus, hist, unit_gt), base)
        )
        out.append(Check(name, idx, float(grads[name][idx]), float(numeric), kink))
    return out
