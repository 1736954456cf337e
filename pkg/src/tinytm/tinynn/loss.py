"""Output squashing and the MAE + curve-integral training loss."""

from __future__ import annotations

import math

import numpy as np

from ..tone_curve import (
    GAIN1_RANGE,
    GAIN2_RANGE,
    QUAD_T,
    QUAD_W,
    SIGMOID_END_RANGE,
    SIGMOID_START_RANGE,
    ToneCurveParams,
)
from .model import ModelWeights, backprop, forward

_LO = np.array(
    [SIGMOID_START_RANGE[0], SIGMOID_END_RANGE[0], GAIN1_RANGE[0], math.log(GAIN2_RANGE[0])]
)
_SPAN = np.array(
    [
        SIGMOID_START_RANGE[1] - SIGMOID_START_RANGE[0],
        SIGMOID_END_RANGE[1] - SIGMOID_END_RANGE[0],
        GAIN1_RANGE[1] - GAIN1_RANGE[0],
        math.log(GAIN2_RANGE[1]) - math.log(GAIN2_RANGE[0]),
    ]
)
LOG_GAIN2_SPAN = float(_SPAN[3])


def logistic(x):
    x = np.asarray(x, dtype=np.float64)
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def normalize_params(params) -> np.ndarray:
    """Map parameters to ``[0, 1]`` per range; gain2 is normalized in log domain.

    Accepts a ToneCurveParams or an ``(..., 4)`` array of raw parameter values.
    """
    if isinstance(params, ToneCurveParams):
        params = params.as_tuple()
    p = np.array(params, dtype=np.float64)
    p[..., 3] = np.log(p[..., 3])
    return (p - _LO) / _SPAN


def denormalize_params(unit) -> np.ndarray:
    u = np.asarray(unit, dtype=np.float64)
    p = _LO + u * _SPAN
    p[..., 3] = np.exp(p[..., 3])
    # exp/log round trips can step one ulp past the range ends
    lo = np.array([SIGMOID_START_RANGE[0], SIGMOID_END_RANGE[0], GAIN1_RANGE[0], GAIN2_RANGE[0]])
    hi = np.array([SIGMOID_START_RANGE[1], SIGMOID_END_RANGE[1], GAIN1_RANGE[1], GAIN2_RANGE[1]])
    return np.clip(p, lo, hi)


def raw_to_params(raw) -> ToneCurveParams:
    """Squash four raw outputs into the training ranges."""
    raw = np.asarray(raw, dtype=np.float64).reshape(4)
    return ToneCurveParams(*map(float, denormalize_params(logistic(raw))))


def _integral(g):
    """Vectorized normalized gain-curve integral over a batch of gains."""
    g = np.asarray(g, dtype=np.float64)[..., None]
    return (QUAD_T * (1.0 + g) / (g * QUAD_T + 1.0)) @ QUAD_W


def _integral_grad(g):
    g = np.asarray(g, dtype=np.float64)[..., None]
    return (QUAD_T * (1.0 - QUAD_T) / (g * QUAD_T + 1.0) ** 2) @ QUAD_W


def _gain2(unit3):
    return np.exp(_LO[3] + unit3 * _SPAN[3])


def unit_loss(unit_pred, unit_gt, cil_weight: float = 1.0):
    """Per-sample loss on normalized parameters, plus d(loss)/d(unit_pred)."""
    up = np.atleast_2d(np.asarray(unit_pred, dtype=np.float64))
    ug = np.atleast_2d(np.asarray(unit_gt, dtype=np.float64))
    diff = up - ug
    mae = np.abs(diff).mean(axis=1)
    gp, gg = _gain2(up[:, 3]), _gain2(ug[:, 3])
    ci = _integral(gp) - _integral(gg)
    per_sample = mae + cil_weight * np.abs(ci)
    grad = np.sign(diff) / 4.0
    grad[:, 3] += cil_weight * np.sign(ci) * _integral_grad(gp) * gp * _SPAN[3]
    return per_sample, grad


def loss(pred: ToneCurveParams, gt: ToneCurveParams, cil_weight: float = 1.0) -> float:
    """Mean absolute error of normalized parameters plus weighted curve-integral error."""
    per_sample, _ = unit_loss(normalize_params(pred), normalize_params(gt), cil_weight)
    return float(per_sample[0])


def _targets(gts) -> np.ndarray:
    if isinstance(gts, ToneCurveParams):
        gts = [gts.as_tuple()]
    return np.atleast_2d(normalize_params(np.asarray(gts, dtype=np.float64)))


def batch_loss_and_grad(w: ModelWeights, hists, unit_targets, cil_weight: float = 1.0):
    """Mean loss over a batch and its gradient for every weight tensor.

    ``unit_targets`` are ground-truth parameters already normalized to [0, 1].
    """
    raw, cache = forward(w, hists, return_cache=True)
    unit = logistic(raw)
    per_sample, g_unit = unit_loss(unit, unit_targets, cil_weight)
    n = raw.shape[0]
    g_raw = g_unit * unit * (1.0 - unit) / n
    return float(per_sample.mean()), backprop(w, cache, g_raw)


def batch_loss(w: ModelWeights, hists, unit_targets, cil_weight: float = 1.0) -> float:
    unit = logistic(forward(w, hists))
    per_sample, _ = unit_loss(unit, unit_targets, cil_weight)
    return float(per_sample.mean())


def backward(w: ModelWeights, hists, gts, cil_weight: float = 1.0) -> dict[str, np.ndarray]:
    """Exact gradient of the mean loss for histograms ``hists`` and parameters ``gts``."""
    return batch_loss_and_grad(w, hists, _targets(gts), cil_weight)[1]


def predict(w: ModelWeights, hists) -> ToneCurveParams:
    return raw_to_params(forward(w, hists)[0])
