"""Parametric tone curves and their 49-knot piecewise-linear form.

The curve family blends a low-gain and a high-gain white-preserving
Reinhard curve with a logistic weight that runs across the input range.
All curve math is double precision; quantization only happens when a
curve is applied to pixels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

NUM_KNOTS = 49

SIGMOID_START_RANGE = (-20.0, 2.0)
SIGMOID_END_RANGE = (2.0, 20.0)
GAIN1_RANGE = (0.0, 3.0)
GAIN2_RANGE = (3.0, 20000.0)

# Quadratically spaced abscissas on [0, 1]; uniform spacing misses the
# 1e-3 error budget once the gain passes ~100 because the curve bends
# sharply near zero.
QUAD_SAMPLES = 64
QUAD_T = np.linspace(0.0, 1.0, QUAD_SAMPLES) ** 2
_dt = np.diff(QUAD_T)
QUAD_W = np.zeros(QUAD_SAMPLES)
QUAD_W[:-1] += _dt / 2
QUAD_W[1:] += _dt / 2
del _dt


@dataclass(frozen=True)
class ToneCurveParams:
    sigmoid_start: float
    sigmoid_end: float
    gain1: float
    gain2: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.sigmoid_start, self.sigmoid_end, self.gain1, self.gain2)

    def in_range(self) -> bool:
        """True when every field lies inside its training range."""
        ranges = (SIGMOID_START_RANGE, SIGMOID_END_RANGE, GAIN1_RANGE, GAIN2_RANGE)
        return all(lo <= v <= hi for v, (lo, hi) in zip(self.as_tuple(), ranges))


@dataclass(frozen=True)
class PwlCurve:
    """Monotone piecewise-linear curve stored as 49 ``(x, y)`` knots."""

    xs: np.ndarray
    ys: np.ndarray
    m_in: float
    m_out: float

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=np.float64)
        ys = np.asarray(self.ys, dtype=np.float64)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)
        if xs.shape != (NUM_KNOTS,) or ys.shape != (NUM_KNOTS,):
            raise ValueError(f"curve needs exactly {NUM_KNOTS} knots")
        if not np.all(np.diff(xs) > 0):
            raise ValueError("knot abscissas must be strictly increasing")
        if xs[0] != 0 or xs[-1] != self.m_in:
            raise ValueError("knot abscissas must span [0, m_in]")
        if not np.all(np.diff(ys) >= 0):
            raise ValueError("knot ordinates must be non-decreasing")
        if ys[0] != 0 or ys[-1] != self.m_out:
            raise ValueError("curve must map 0 to 0 and m_in to m_out")

    def __eq__(self, other):
        if not isinstance(other, PwlCurve):
            return NotImplemented
        return (
            self.m_in == other.m_in
            and self.m_out == other.m_out
            and np.array_equal(self.xs, other.xs)
            and np.array_equal(self.ys, other.ys)
        )

    __hash__ = None


def _check_code_range(x, m):
    arr = np.asarray(x, dtype=np.float64)
    if np.any(arr < 0) or np.any(arr > m) or np.any(np.isnan(arr)):
        raise ValueError(f"code value outside [0, {m}]")
    return arr


def _logistic(t):
    t = np.asarray(t, dtype=np.float64)
    # split by sign so exp never overflows
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _scalar_or_array(result, x):
    return float(result) if np.ndim(x) == 0 else result


def reinhard_gain(x, gain, m):
    """White-preserving Reinhard curve: ``x*m*(1+g) / (g*x + m)``."""
    if m <= 0:
        raise ValueError("max code value must be positive")
    if gain < 0:
        raise ValueError(f"gain must be non-negative, got {gain}")
    xa = _check_code_range(x, m)
    out = xa * m * (1.0 + gain) / (gain * xa + m)
    return _scalar_or_array(out, x)


def sigmoid_weight(x, sigmoid_start, sigmoid_end, m):
    """Logistic weight whose argument runs linearly from start to end over [0, m]."""
    if not sigmoid_start < sigmoid_end:
        raise ValueError("sigmoid start must be below sigmoid end")
    xa = _check_code_range(x, m)
    out = _logistic(sigmoid_start + (sigmoid_end - sigmoid_start) * xa / m)
    return _scalar_or_array(out, x)


def blended_curve(x, params: ToneCurveParams, m):
    """Blend of the gain1 and gain2 curves; the weight multiplies the gain1 curve."""
    xa = _check_code_range(x, m)
    s = sigmoid_weight(xa, params.sigmoid_start, params.sigmoid_end, m)
    c1 = reinhard_gain(xa, params.gain1, m)
    c2 = reinhard_gain(xa, params.gain2, m)
    return _scalar_or_array(s * c1 + (1.0 - s) * c2, x)


def monotone_fix(samples):
    """Replace every dip with a flat run at the previous peak (running maximum)."""
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("need a non-empty 1-D list of samples")
    return np.maximum.accumulate(arr)


def knot_abscissas(m_in: int) -> np.ndarray:
    """Logarithmically spaced integer knot positions on ``[0, m_in]``.

    Knot ``k`` sits at ``round((m_in + 1) ** (k / 48)) - 1``; where rounding
    collides at the dark end each knot is pushed one code above its
    predecessor so the abscissas stay strictly increasing.
    """
    m_in = int(m_in)
    if m_in < NUM_KNOTS - 1:
        raise ValueError(f"m_in must be at least {NUM_KNOTS - 1} for integer knots")
    last = NUM_KNOTS - 1
    bits = math.log2(m_in + 1)
    xs = [0]
    for k in range(1, last):
        a = math.floor(2.0 ** (bits * k / last) + 0.5) - 1
        xs.append(max(a, xs[-1] + 1))
    xs.append(m_in)
    if xs[-2] >= m_in:
        raise ValueError(f"cannot place {NUM_KNOTS} distinct knots below {m_in}")
    return np.asarray(xs, dtype=np.float64)


def sample_curve(params: ToneCurveParams, m_in, m_out) -> PwlCurve:
    """Evaluate the blended curve at the knots, repair dips, rescale to ``m_out``."""
    if m_in <= 0 or m_out <= 0:
        raise ValueError("max code values must be positive")
    xs = knot_abscissas(m_in)
    ys = monotone_fix(blended_curve(xs, params, m_in))
    ys = np.clip(ys * m_out / m_in, 0.0, m_out)
    ys[0] = 0.0
    ys[-1] = m_out
    return PwlCurve(xs, ys, m_in=m_in, m_out=m_out)


def eval_pwl(curve: PwlCurve, x):
    """Piecewise-linear lookup; exact at the knots."""
    xa = _check_code_range(x, curve.m_in)
    return _scalar_or_array(np.interp(xa, curve.xs, curve.ys), x)


class OpCounter:
    """Tally of the scalar work done by :func:`eval_pwl_counted`."""

    def __init__(self):
        self.comparisons = 0
        self.arithmetic = 0
        self.interpolations = 0
        self.samples = 0

    @property
    def flops(self) -> int:
        return self.comparisons + self.arithmetic


def eval_pwl_counted(curve: PwlCurve, x: float, counter: OpCounter) -> float:
    """Scalar lookup by binary search over the knots, recording every operation.

    This is the per-sample reference path that a streaming ISP would run;
    the vectorized :func:`eval_pwl` must agree with it.
    """
    if not 0 <= x <= curve.m_in:
        raise ValueError(f"code value outside [0, {curve.m_in}]")
    xs, ys = curve.xs, curve.ys
    counter.samples += 1
    lo, hi = 0, NUM_KNOTS
    while hi - lo > 1:
        mid = (lo + hi) // 2
        counter.comparisons += 1
        if x < xs[mid]:
            hi = mid
        else:
            lo = mid
    if lo == NUM_KNOTS - 1:
        return float(ys[-1])
    x0, x1, y0, y1 = xs[lo], xs[lo + 1], ys[lo], ys[lo + 1]
    counter.interpolations += 1
    counter.arithmetic += 6  # three subtractions, one divide, one multiply, one add
    return float(y0 + (x - x0) / (x1 - x0) * (y1 - y0))


def _refill(xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split the widest segments at their midpoints until there are 49 knots.

    New knots lie on the existing segments, so the curve is unchanged.
    """
    xs, ys = list(xs), list(ys)
    while len(xs) < NUM_KNOTS:
        gaps = np.diff(xs)
        i = int(np.argmax(gaps))
        xs.insert(i + 1, (xs[i] + xs[i + 1]) / 2)
        ys.insert(i + 1, (ys[i] + ys[i + 1]) / 2)
    return np.asarray(xs), np.asarray(ys)


def invert_curve(curve: PwlCurve) -> PwlCurve:
    """Pseudo-inverse obtained by swapping the axes of every knot.

    A flat run of ordinates resolves to its smallest preimage, except a
    flat run at the white point, which keeps ``m_out -> m_in`` so white
    stays white. Knots dropped by the flat-run rule are replaced by
    midpoint knots so the result again has 49 knots.
    """
    new_x = curve.ys.copy()
    new_y = curve.xs.copy()
    keep = np.ones(NUM_KNOTS, dtype=bool)
    keep[1:] = new_x[1:] > new_x[:-1]
    top = new_x == new_x[-1]
    if top.sum() > 1:
        keep[top] = False
        keep[-1] = True
    new_x, new_y = _refill(new_x[keep], new_y[keep])
    new_x[-1] = curve.m_out
    new_y[-1] = curve.m_in
    return PwlCurve(new_x, new_y, m_in=curve.m_out, m_out=curve.m_in)


def gain_curve_integral(gain, m=1.0):
    """Normalized area under the gain curve, ``(1/m**2) * integral_0^m c(x) dx``.

    Trapezoid rule over 64 quadratically spaced samples.
    """
    if gain < 0:
        raise ValueError(f"gain must be non-negative, got {gain}")
    if m <= 0:
        raise ValueError("max code value must be positive")
    # c(m*t)/m depends on t only, so m drops out after normalization
    c = QUAD_T * (1.0 + gain) / (gain * QUAD_T + 1.0)
    return float(QUAD_W @ c)


def gain_curve_integral_grad(gain):
    """Derivative of :func:`gain_curve_integral` with respect to the gain."""
    t = QUAD_T
    return float(QUAD_W @ (t * (1.0 - t) / (gain * t + 1.0) ** 2))

