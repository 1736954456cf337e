"""Histogram-driven global tone mapping with a tiny network.

A ~1k-parameter network reads the linear and logarithmic luminance
histograms of a linear HDR image and predicts the four parameters of a
blended Reinhard tone curve, which is sampled to a 49-knot lookup curve and
applied to every pixel.
"""

from .raster import HdrImage, LumaImage
from .tone_curve import PwlCurve, ToneCurveParams

__version__ = "0.1.0"

__all__ = ["HdrImage", "LumaImage", "PwlCurve", "ToneCurveParams", "__version__"]
