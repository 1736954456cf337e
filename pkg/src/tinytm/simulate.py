"""Synthesize training pairs from ordinary 8-bit sRGB images.

An 8-bit image is linearized into 26-bit code values, darkened with the
inverse of a randomly drawn tone curve, and reduced to its two luminance
histograms. The drawn curve parameters are the regression target.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import srgb
from .histogram import HistogramPair, histogram_pair, rgb_to_luminance
from .imageio import UnsupportedImageError, read_png8, write_raw
from .raster import HdrImage
from .tone_curve import (
    GAIN1_RANGE,
    GAIN2_RANGE,
    SIGMOID_END_RANGE,
    SIGMOID_START_RANGE,
    ToneCurveParams,
    eval_pwl,
    invert_curve,
    sample_curve,
)

log = logging.getLogger(__name__)

TRAIN_BITS = 26
M26 = (1 << TRAIN_BITS) - 1
DATASET_HEADER = "# tinytm dataset v1"

_DECODE_LUT = srgb.round_half_up(srgb.eotf(np.arange(256) / 255.0) * M26).astype(np.uint32)


class DegenerateImageError(ValueError):
    """Image carries no usable content (all black)."""


class DatasetFormatError(ValueError):
    def __init__(self, line_no: int, msg: str):
        super().__init__(f"line {line_no}: {msg}")
        self.line_no = line_no


@dataclass(frozen=True)
class TrainSample:
    hist: HistogramPair
    gt: ToneCurveParams


def _check_rgb8(img) -> np.ndarray:
    arr = np.asarray(img)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) image, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        raise TypeError(f"expected uint8 samples, got {arr.dtype}")
    return arr


def srgb_to_linear26(img) -> HdrImage:
    """Decode 8-bit sRGB to linear light in 26-bit code values."""
    return HdrImage(_DECODE_LUT[_check_rgb8(img)], TRAIN_BITS)


def sample_random_params(rng: np.random.Generator) -> ToneCurveParams:
    """Uniform draws for the first three parameters; gain2 is log-uniform."""
    ss = rng.uniform(*SIGMOID_START_RANGE)
    se = rng.uniform(*SIGMOID_END_RANGE)
    g1 = rng.uniform(*GAIN1_RANGE)
    lo, hi = (math.log(v) for v in GAIN2_RANGE)
    g2 = math.exp(rng.uniform(lo, hi))
    return ToneCurveParams(ss, se, g1, min(max(g2, GAIN2_RANGE[0]), GAIN2_RANGE[1]))


def degrade(img, params: ToneCurveParams) -> HdrImage:
    """Linear 26-bit image that ``params``' tone curve maps back onto ``img``."""
    arr = _check_rgb8(img)
    inverse = invert_curve(sample_curve(params, M26, M26))
    # only 256 distinct input levels exist, so invert those and index
    levels = srgb.round_half_up(eval_pwl(inverse, _DECODE_LUT.astype(np.float64)))
    levels = np.clip(levels, 0, M26).astype(np.uint32)
    return HdrImage(levels[arr], TRAIN_BITS)


def simulate_sample(img, params: ToneCurveParams) -> TrainSample:
    arr = _check_rgb8(img)
    if not arr.any():
        raise DegenerateImageError("image is entirely black")
    hist = histogram_pair(rgb_to_luminance(degrade(arr, params)))
    return TrainSample(hist, params)


def format_sample(sample: TrainSample) -> str:
    vals = [*sample.hist.linear, *sample.hist.log, *sample.gt.as_tuple()]
    return " ".join(f"{v:.9g}" for v in vals)


@dataclass
class DatasetSummary:
    samples: int = 0
    skipped: int = 0
    skipped_sources: list = field(default_factory=list)


def _source_name(src, index: int) -> str:
    return str(src) if isinstance(src, (str, Path)) else f"image[{index}]"


def iter_samples(
    sources: Sequence, curves_per_image: int, seed: int, summary: DatasetSummary
):
    """Yield ``(source_index, curve_index, image, TrainSample)`` in input order.

    Each source gets its own generator seeded from ``(seed, index)``, so the
    sequence does not depend on which sources were skipped.
    """
    if curves_per_image < 1:
        raise ValueError("curves_per_image must be at least 1")
    for i, src in enumerate(sources):
        name = _source_name(src, i)
        try:
            img = read_png8(src) if isinstance(src, (str, Path)) else _check_rgb8(src)
            if not img.any():
                raise DegenerateImageError("image is entirely black")
        except (OSError, UnsupportedImageError, DegenerateImageError) as exc:
            log.warning("skipping %s: %s", name, exc)
            summary.skipped += 1
            summary.skipped_sources.append(name)
            continue
        rng = np.random.default_rng([seed, i])
        for j in range(curves_per_image):
            params = sample_random_params(rng)
            yield i, j, img, simulate_sample(img, params)


def build_dataset(
    sources: Iterable,
    out_path,
    curves_per_image: int,
    seed: int,
    emit_hdr_dir=None,
) -> DatasetSummary:
    """Write ``curves_per_image`` samples per readable source to ``out_path``."""
    sources = list(sources)
    if not sources:
        raise ValueError("empty corpus")
    summary = DatasetSummary()
    if emit_hdr_dir is not None:
        emit_hdr_dir = Path(emit_hdr_dir)
        emit_hdr_dir.mkdir(parents=True, exist_ok=True)
    lines = [
        f"{DATASET_HEADER}: 256 linear bins, 256 log bins, "
        "sigmoid_start sigmoid_end gain1 gain2",
        f"# seed={seed} curves_per_image={curves_per_image}",
    ]
    for i, j, img, sample in iter_samples(sources, curves_per_image, seed, summary):
        lines.append(format_sample(sample))
        summary.samples += 1
        if emit_hdr_dir is not None:
            stem = Path(sources[i]).stem if isinstance(sources[i], (str, Path)) else f"image{i:05d}"
            write_raw(degrade(img, sample.gt), emit_hdr_dir / f"{stem}_{j}.raw")
    lines.append(f"# samples={summary.samples} skipped={summary.skipped}")
    Path(out_path).write_text("\n".join(lines) + "\n")
    return summary


@dataclass
class Dataset:
    """Training samples as arrays: ``hists`` is (N, 2, 256), ``params`` is (N, 4)."""

    hists: np.ndarray
    params: np.ndarray

    def __len__(self) -> int:
        return len(self.params)

    def __getitem__(self, idx) -> "Dataset":
        return Dataset(self.hists[idx], self.params[idx])

    def sample(self, i: int) -> TrainSample:
        h = self.hists[i]
        return TrainSample(HistogramPair(h[0], h[1]), ToneCurveParams(*map(float, self.params[i])))

    @classmethod
    def from_samples(cls, samples: Iterable[TrainSample]) -> "Dataset":
        samples = list(samples)
        hists = np.array([s.hist.stacked() for s in samples]).reshape(-1, 2, 256)
        params = np.array([s.gt.as_tuple() for s in samples], dtype=np.float64).reshape(-1, 4)
        return cls(hists, params)


def parse_dataset(text: str) -> Dataset:
    hists, params = [], []
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            vals = np.array([float(tok) for tok in line.split()])
        except ValueError as exc:
            raise DatasetFormatError(line_no, f"unparseable number ({exc})") from None
        if vals.size != 516:
            raise DatasetFormatError(line_no, f"expected 516 values, found {vals.size}")
        if not np.all(np.isfinite(vals)):
            raise DatasetFormatError(line_no, "non-finite value")
        h = vals[:512].reshape(2, 256)
        if np.any(h < 0):
            raise DatasetFormatError(line_no, "negative histogram bin")
        sums = h.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > 1e-6):
            raise DatasetFormatError(line_no, f"histogram sums {sums.tolist()} are not 1")
        p = ToneCurveParams(*vals[512:])
        if not p.in_range():
            raise DatasetFormatError(line_no, f"parameters {p.as_tuple()} outside training ranges")
        # undo the 9-digit print rounding
        hists.append(h / sums[:, None])
        params.append(vals[512:])
    return Dataset(
        np.array(hists, dtype=np.float64).reshape(-1, 2, 256),
        np.array(params, dtype=np.float64).reshape(-1, 4),
    )


def load_dataset(path) -> Dataset:
    return parse_dataset(Path(path).read_text())
