"""Standard piecewise sRGB transfer functions (IEC 61966-2-1)."""

import numpy as np


def eotf(v):
    """Encoded [0, 1] -> linear [0, 1]."""
    v = np.asarray(v, dtype=np.float64)
    return np.where(v <= 0.04045, v / 12.92, ((v + 0.055) / 1.055) ** 2.4)


def oetf(v):
    """Linear [0, 1] -> encoded [0, 1]."""
    v = np.asarray(v, dtype=np.float64)
    return np.where(
        v <= 0.0031308, v * 12.92, 1.055 * np.power(np.maximum(v, 0.0031308), 1 / 2.4) - 0.055
    )


def round_half_up(x):
    return np.floor(np.asarray(x, dtype=np.float64) + 0.5)
