"""PSNR evaluation of the full pipeline and the compute budget breakdown."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .imageio import UnsupportedImageError, read_png8
from .pipeline import apply_tonemap, curve_for, encode_srgb8, predict_params
from .simulate import M26, DegenerateImageError, _check_rgb8, degrade, sample_random_params
from .tinynn.model import REFERENCE, ModelWeights, count_flops, count_params, layer_flops
from .tone_curve import (
    NUM_KNOTS,
    OpCounter,
    ToneCurveParams,
    eval_pwl_counted,
    sample_curve,
)

log = logging.getLogger(__name__)

INF_PSNR = math.inf

# Per-pixel costs of each stage in the streaming implementation.
#   grayscale: R + 2G + B as 3 multiplies (the 2G a shift) and 2 adds
#   linear hist: one shift to the bin index, one increment
#   log hist: leading-one detect, mantissa shift, 8-bit table lookup, offset
#     add, clamp, and the increment, at 10 integer operations
#   apply: ceil(log2 49) = 6 knot comparisons plus 6 interpolation operations
PER_PIXEL_FLOPS = {"grayscale": 5, "linear_hist": 2, "log_hist": 10, "apply_curve": 12}

# Per-knot cost of evaluating the blended curve once: two gain curves at
# 5 operations each, the sigmoid argument (3), exp + add + divide (3), the
# blend (4), the monotone running max (1), and the rescale to m_out (2).
CURVE_FLOPS_PER_KNOT = 5 + 5 + 3 + 3 + 4 + 1 + 2


def psnr(a, b, bit_depth: int = 8) -> float:
    """Peak signal-to-noise ratio in dB; identical inputs give ``math.inf``."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ValueError("cannot compare empty images")
    peak = float((1 << bit_depth) - 1)
    mse = np.mean((a.astype(np.float64) - b.astype(np.float64)) ** 2)
    if mse == 0:
        return INF_PSNR
    return 10.0 * math.log10(peak * peak / mse)


@dataclass
class EvalReport:
    names: list = field(default_factory=list)
    psnrs: list = field(default_factory=list)
    skipped: int = 0
    budget: dict = field(default_factory=dict)
    bit_depth: int = 8

    @property
    def finite(self) -> np.ndarray:
        return np.array([p for p in self.psnrs if math.isfinite(p)], dtype=np.float64)

    @property
    def count(self) -> int:
        return len(self.psnrs)

    @property
    def exact_matches(self) -> int:
        return sum(1 for p in self.psnrs if not math.isfinite(p))

    @property
    def mean(self) -> float:
        f = self.finite
        return float(f.mean()) if f.size else INF_PSNR

    @property
    def std(self) -> float:
        f = self.finite
        return float(f.std()) if f.size else 0.0

    @property
    def minimum(self) -> float:
        return min(self.psnrs) if self.psnrs else INF_PSNR

    def summary(self) -> dict:
        return {
            "count": self.count,
            "exact_matches": self.exact_matches,
            "skipped": self.skipped,
            "mean_psnr_db": _fmt(self.mean),
            "std_psnr_db": _fmt(self.std),
            "min_psnr_db": _fmt(self.minimum),
            "bit_depth": self.bit_depth,
        }

    def text(self) -> str:
        lines = ["# image psnr_db"]
        lines += [f"{n} {_fmt(p)}" for n, p in zip(self.names, self.psnrs)]
        lines.append(
            f"# mean={_fmt(self.mean)} std={_fmt(self.std)} count={self.count} "
            f"exact={self.exact_matches} skipped={self.skipped}"
        )
        for k, v in self.budget.items():
            lines.append(f"# budget {k}={v}")
        return "\n".join(lines) + "\n"

    def kv(self) -> str:
        items = dict(self.summary())
        items.update({f"budget.{k}": v for k, v in self.budget.items()})
        items.update({f"psnr.{n}": _fmt(p) for n, p in zip(self.names, self.psnrs)})
        return "".join(f"{k}={v}\n" for k, v in items.items())

    def write(self, path) -> None:
        path = Path(path)
        path.write_text(self.text())
        Path(str(path) + ".kv").write_text(self.kv())


def _fmt(v: float) -> str:
    return "inf" if math.isinf(v) else f"{v:.4f}"


def _load(src):
    if isinstance(src, (str, Path)):
        return Path(src).name, read_png8(src)
    return None, _check_rgb8(src)


def evaluate(
    corpus: Sequence,
    w: ModelWeights | None,
    seed: int,
    oracle: bool = False,
    linear12: bool = False,
) -> EvalReport:
    """PSNR of predicted against ground-truth tone mapping on simulated inputs.

    Each image is degraded with a random curve drawn from ``(seed, index)``.
    By default the comparison is between the predicted-parameter and the
    ground-truth-parameter renderings. With ``oracle`` the ground-truth
    parameters stand in for the prediction and the rendering is compared to
    the source image itself, which measures the simulation round trip; that
    round trip is only lossless up to quantization for strictly increasing
    curves, so oracle mode redraws until it gets one.
    ``linear12`` compares the 12-bit linear outputs instead of 8-bit sRGB.
    """
    corpus = list(corpus)
    if not corpus:
        raise ValueError("empty corpus")
    if w is None and not oracle:
        raise ValueError("weights are required unless oracle=True")
    report = EvalReport(bit_depth=12 if linear12 else 8)
    for i, src in enumerate(corpus):
        try:
            name, img = _load(src)
            if not img.any():
                raise DegenerateImageError("image is entirely black")
        except (OSError, UnsupportedImageError, DegenerateImageError) as exc:
            log.warning("skipping %s: %s", src if isinstance(src, (str, Path)) else i, exc)
            report.skipped += 1
            continue
        name = name or f"image{i:05d}"
        rng = np.random.default_rng([seed, i])
        gt = sample_random_params(rng)
        while oracle and not is_strictly_increasing(gt):
            gt = sample_random_params(rng)
        hdr = degrade(img, gt)
        gt12 = apply_tonemap(hdr, curve_for(hdr, gt))
        if oracle:
            if linear12:
                raise ValueError("oracle mode compares against the 8-bit source")
            value = psnr(encode_srgb8(gt12), img, 8)
        else:
            pred12 = apply_tonemap(hdr, curve_for(hdr, predict_params(hdr, w)))
            if linear12:
                value = psnr(pred12.pixels, gt12.pixels, 12)
            else:
                value = psnr(encode_srgb8(pred12), encode_srgb8(gt12), 8)
        report.names.append(name)
        report.psnrs.append(value)
    report.budget = flops_report(w)
    return report


def is_strictly_increasing(params: ToneCurveParams) -> bool:
    """True when the 26-bit knot curve of ``params`` has no flat run."""
    return bool(np.all(np.diff(sample_curve(params, M26, M26).ys) > 0))


def curve_creation_flops() -> int:
    return NUM_KNOTS * CURVE_FLOPS_PER_KNOT


def apply_flops_measured() -> int:
    """Worst-case per-sample cost of the counted scalar lookup over a dense probe set."""
    curve = sample_curve(ToneCurveParams(-9.0, 11.0, 1.5, 244.9), 4095, 4095)
    worst = 0
    for x in range(4096):
        c = OpCounter()
        eval_pwl_counted(curve, float(x), c)
        worst = max(worst, c.flops)
    return worst


def flops_report(w: ModelWeights | None = None) -> dict:
    """Per-pixel and per-image compute breakdown.

    Network figures come from the layer counters of ``w``'s architecture
    (the shipped reference architecture when ``w`` is None).
    """
    arch = w.arch if w is not None else REFERENCE
    out = {f"per_pixel.{k}": v for k, v in PER_PIXEL_FLOPS.items()}
    out["per_pixel.apply_curve_measured"] = apply_flops_measured()
    out["per_pixel.total"] = sum(PER_PIXEL_FLOPS.values())
    out["per_image.network"] = count_flops(arch)
    out["per_image.curve_creation"] = curve_creation_flops()
    out["network.params"] = count_params(arch)
    for name, f in layer_flops(arch):
        out[f"network.layer.{name}"] = out.get(f"network.layer.{name}", 0) + f
    return out
