"""Integer raster containers shared by every stage of the pipeline."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class HdrImage:
    """Linear RGB image with integer samples in ``[0, 2**bit_depth - 1]``.

    ``pixels`` has shape ``(height, width, 3)``.
    """

    pixels: np.ndarray
    bit_depth: int

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError(f"expected (H, W, 3) pixels, got shape {px.shape}")
        if not 1 <= self.bit_depth <= 26:
            raise ValueError(f"bit_depth must be in [1, 26], got {self.bit_depth}")
        if px.dtype.kind not in "ui":
            raise TypeError(f"samples must be integers, got {px.dtype}")
        if px.size and (px.min() < 0 or px.max() > self.max_value):
            raise ValueError(
                f"sample out of range for {self.bit_depth}-bit image "
                f"(max allowed {self.max_value})"
            )
        object.__setattr__(self, "pixels", px.astype(np.uint32, copy=False))

    @property
    def max_value(self) -> int:
        return (1 << self.bit_depth) - 1

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class LumaImage:
    """Single-channel integer image, ``pixels`` of shape ``(height, width)``."""

    pixels: np.ndarray
    bit_depth: int

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2:
            raise ValueError(f"expected (H, W) pixels, got shape {px.shape}")
        if not 1 <= self.bit_depth <= 32:
            raise ValueError(f"bit_depth must be in [1, 32], got {self.bit_depth}")
        if px.dtype.kind not in "ui":
            raise TypeError(f"samples must be integers, got {px.dtype}")
        if px.size and (px.min() < 0 or int(px.max()) > self.max_value):
            raise ValueError(
                f"sample out of range for {self.bit_depth}-bit image "
                f"(max allowed {self.max_value})"
            )
        object.__setattr__(self, "pixels", px.astype(np.uint64, copy=False))

    @property
    def max_value(self) -> int:
        return (1 << self.bit_depth) - 1

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]
