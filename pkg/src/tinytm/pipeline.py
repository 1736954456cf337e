"""Inference: histograms -> network -> parameters -> 49-knot curve -> 12-bit -> sRGB."""

from __future__ import annotations

import numpy as np

from . import srgb
from .histogram import histogram_pair, rgb_to_luminance
from .raster import HdrImage
from .simulate import TRAIN_BITS
from .tinynn.loss import raw_to_params
from .tinynn.model import ModelWeights, forward
from .tone_curve import PwlCurve, ToneCurveParams, eval_pwl, sample_curve

OUT_BITS = 12
M12 = (1 << OUT_BITS) - 1

_ENCODE_LUT = srgb.round_half_up(srgb.oetf(np.arange(M12 + 1) / M12) * 255).astype(np.uint8)


def predict_params(img: HdrImage, w: ModelWeights) -> ToneCurveParams:
    """Network estimate of the tone-curve parameters for ``img``.

    The linear histogram is taken at the image's own bit depth; the log
    histogram after converting luminance to the training bit width.
    """
    hist = histogram_pair(rgb_to_luminance(img), log_bits=TRAIN_BITS)
    return raw_to_params(forward(w, hist)[0])


def curve_for(img: HdrImage, params: ToneCurveParams) -> PwlCurve:
    return sample_curve(params, img.max_value, M12)


def apply_tonemap(img: HdrImage, curve: PwlCurve) -> HdrImage:
    """Map every channel through ``curve`` and round half up to 12 bits."""
    if curve.m_in != img.max_value or curve.m_out != M12:
        raise ValueError(
            f"curve maps [0, {curve.m_in}] -> [0, {curve.m_out}], image needs "
            f"[0, {img.max_value}] -> [0, {M12}]"
        )
    out = srgb.round_half_up(eval_pwl(curve, img.pixels.astype(np.float64)))
    return HdrImage(np.clip(out, 0, M12).astype(np.uint32), OUT_BITS)


def encode_srgb8(img: HdrImage) -> np.ndarray:
    """12-bit linear to 8-bit sRGB via a 4096-entry table."""
    if img.bit_depth != OUT_BITS:
        raise ValueError(f"expected a {OUT_BITS}-bit image, got {img.bit_depth} bits")
    return _ENCODE_LUT[img.pixels]


def tonemap_with(img: HdrImage, params: ToneCurveParams) -> np.ndarray:
    return encode_srgb8(apply_tonemap(img, curve_for(img, params)))


def tonemap(img: HdrImage, w: ModelWeights) -> np.ndarray:
    return tonemap_with(img, predict_params(img, w))
