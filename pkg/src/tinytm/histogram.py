"""Luminance conversion and the two 256-bin histograms fed to the network."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .raster import HdrImage, LumaImage

NUM_BINS = 256


@dataclass(frozen=True)
class HistogramPair:
    """Normalized linear and logarithmic luminance histograms."""

    linear: np.ndarray
    log: np.ndarray

    def __post_init__(self):
        for name in ("linear", "log"):
            h = np.asarray(getattr(self, name), dtype=np.float64)
            if h.shape != (NUM_BINS,):
                raise ValueError(f"{name} histogram must have {NUM_BINS} bins")
            if np.any(h < 0):
                raise ValueError(f"{name} histogram has negative bins")
            if abs(h.sum() - 1.0) > 1e-9:
                raise ValueError(f"{name} histogram is not normalized (sum={h.sum()})")
            object.__setattr__(self, name, h)

    def stacked(self) -> np.ndarray:
        """``(2, 256)`` array, linear channel first."""
        return np.stack([self.linear, self.log])


def rgb_to_luminance(img: HdrImage) -> LumaImage:
    """Luma with weights 1/4, 1/2, 1/4, rounded half up in integer arithmetic."""
    px = np.asarray(img.pixels)
    if px.ndim != 3 or px.shape[2] != 3:
        raise ValueError(f"expected 3 channels, got shape {px.shape}")
    px = px.astype(np.uint64)
    luma = (px[..., 0] + 2 * px[..., 1] + px[..., 2] + 2) >> 2
    return LumaImage(luma, img.bit_depth)


def bitwidth_convert(img: LumaImage, target_bits: int) -> LumaImage:
    """Shift samples so the image uses ``target_bits`` bits (truncating when narrowing)."""
    if not 1 <= target_bits <= 32:
        raise ValueError(f"target_bits must be in [1, 32], got {target_bits}")
    shift = target_bits - img.bit_depth
    px = img.pixels.astype(np.uint64)
    if shift > 0:
        px = px << np.uint64(shift)
    elif shift < 0:
        px = px >> np.uint64(-shift)
    return LumaImage(px, target_bits)


def linear_bins(values: np.ndarray, bit_depth: int) -> np.ndarray:
    if bit_depth < 8:
        raise ValueError("linear histogram needs at least 8 bits")
    return np.asarray(values, dtype=np.uint64) >> np.uint64(bit_depth - 8)


def log_bins(values: np.ndarray, bit_depth: int) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    bins = np.floor(NUM_BINS * np.log2(v + 1.0) / bit_depth)
    return np.minimum(bins, NUM_BINS - 1).astype(np.int64)


def linear_histogram(img: LumaImage) -> np.ndarray:
    """256 counts binned by the top eight bits of each sample."""
    bins = linear_bins(img.pixels.ravel(), img.bit_depth)
    return np.bincount(bins.astype(np.int64), minlength=NUM_BINS)


def log_histogram(img: LumaImage) -> np.ndarray:
    """256 counts binned uniformly in ``log2(v + 1)`` over the image's bit depth."""
    bins = log_bins(img.pixels.ravel(), img.bit_depth)
    return np.bincount(bins, minlength=NUM_BINS)


def normalize(counts) -> np.ndarray:
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        raise ValueError("cannot normalize an empty histogram")
    return counts / total


def histogram_pair(luma: LumaImage, log_bits: int | None = None) -> HistogramPair:
    """Both normalized histograms of ``luma``.

    The log path is computed after converting to ``log_bits`` bits so that
    its bin layout matches the bit width the network was trained at.
    """
    log_src = luma if log_bits is None else bitwidth_convert(luma, log_bits)
    return HistogramPair(
        normalize(linear_histogram(luma)),
        normalize(log_histogram(log_src)),
    )
