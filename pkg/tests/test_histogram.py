import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from tinytm.histogram import (
    HistogramPair,
    bitwidth_convert,
    histogram_pair,
    linear_bins,
    linear_histogram,
    log_bins,
    log_histogram,
    normalize,
    rgb_to_luminance,
)
from tinytm.raster import HdrImage, LumaImage

M26 = 2**26 - 1


def luma(values, bits=26):
    return LumaImage(np.asarray(values, dtype=np.uint64).reshape(1, -1), bits)


def rgb(triples, bits=26):
    return HdrImage(np.asarray(triples, dtype=np.uint32).reshape(1, -1, 3), bits)


class TestLuminance:
    def test_weighted_sum(self):
        assert rgb_to_luminance(rgb([(100, 200, 100)], 8)).pixels[0, 0] == 150

    @pytest.mark.parametrize("v", [0, 1, 77, 255])
    def test_gray_passthrough(self, v):
        assert rgb_to_luminance(rgb([(v, v, v)], 8)).pixels[0, 0] == v

    def test_full_scale_no_overflow(self):
        out = rgb_to_luminance(rgb([(M26, M26, M26)]))
        assert out.pixels[0, 0] == M26 and out.bit_depth == 26

    def test_round_half_up(self):
        # (1 + 2*0 + 1) / 4 = 0.5 rounds up; (1 + 0 + 0) / 4 = 0.25 rounds down
        out = rgb_to_luminance(rgb([(1, 0, 1), (1, 0, 0), (3, 0, 0)], 8))
        assert out.pixels[0].tolist() == [1, 0, 1]

    def test_channel_count_error(self):
        class Fake:
            pixels = np.zeros((2, 2, 4), np.uint32)
            bit_depth = 8

        with pytest.raises(ValueError):
            rgb_to_luminance(Fake())

    @given(hnp.arrays(np.uint32, (6, 3), elements=st.integers(0, M26)))
    def test_bounded_by_channels(self, px):
        out = rgb_to_luminance(HdrImage(px.reshape(1, 6, 3), 26)).pixels[0]
        assert np.all(out >= px.min(axis=1)) and np.all(out <= px.max(axis=1))


class TestBitwidth:
    def test_identity(self):
        img = luma([0, 5, M26])
        assert np.array_equal(bitwidth_convert(img, 26).pixels, img.pixels)

    def test_expand(self):
        out = bitwidth_convert(luma([255], 8), 26)
        assert out.pixels[0, 0] == 255 * 2**18 and out.bit_depth == 26

    def test_narrow_floors(self):
        assert bitwidth_convert(luma([M26]), 12).pixels[0, 0] == 2**12 - 1

    def test_bad_target(self):
        with pytest.raises(ValueError):
            bitwidth_convert(luma([1]), 33)


class TestLinearHistogram:
    def test_first_bin_upper_edge(self):
        h = linear_histogram(luma([2**18 - 1]))
        assert h[0] == 1 and h.sum() == 1

    def test_second_bin_lower_edge(self):
        assert linear_histogram(luma([2**18]))[1] == 1

    def test_max_in_last_bin(self):
        assert linear_histogram(luma([M26]))[255] == 1

    def test_needs_eight_bits(self):
        with pytest.raises(ValueError):
            linear_histogram(luma([1], 6))


class TestLogHistogram:
    def test_zero(self):
        assert log_histogram(luma([0]))[0] == 1

    def test_max_clamped(self):
        assert log_histogram(luma([M26]))[255] == 1

    def test_dark_value(self):
        expected = math.floor(256 * math.log2(31) / 26)
        assert expected == 48
        assert log_histogram(luma([30]))[48] == 1

    def test_matches_scalar_binning(self):
        rng = np.random.default_rng(0)
        vals = np.concatenate([rng.integers(0, 2**26, 5000), 2 ** np.arange(26) - 1])
        want = [min(255, math.floor(256 * math.log2(v + 1) / 26)) for v in vals.tolist()]
        assert log_bins(vals, 26).tolist() == want


@given(st.integers(0, M26), st.integers(0, M26))
def test_bins_monotone(v, w):
    lo, hi = np.array([min(v, w)]), np.array([max(v, w)])
    assert linear_bins(lo, 26)[0] <= linear_bins(hi, 26)[0]
    assert log_bins(lo, 26)[0] <= log_bins(hi, 26)[0]


class TestNormalize:
    def test_single_bin(self):
        counts = np.zeros(256)
        counts[0] = 17
        out = normalize(counts)
        assert out[0] == 1 and out[1:].sum() == 0

    def test_uniform(self):
        np.testing.assert_allclose(normalize(np.full(256, 3)), 1 / 256)

    def test_empty(self):
        with pytest.raises(ValueError):
            normalize(np.zeros(256))

    @pytest.mark.parametrize("k", [2, 3])
    def test_resolution_invariance(self, k):
        rng = np.random.default_rng(k)
        px = rng.integers(0, 2**26, (9, 13, 3)).astype(np.uint32)
        big = np.repeat(np.repeat(px, k, axis=0), k, axis=1)
        a = histogram_pair(rgb_to_luminance(HdrImage(px, 26)))
        b = histogram_pair(rgb_to_luminance(HdrImage(big, 26)))
        np.testing.assert_array_equal(a.linear, b.linear)
        np.testing.assert_array_equal(a.log, b.log)


def test_counts_conserved():
    rng = np.random.default_rng(4)
    img = LumaImage(rng.integers(0, 2**20, (31, 17)), 20)
    assert linear_histogram(img).sum() == 31 * 17
    assert log_histogram(img).sum() == 31 * 17


def test_histogram_pair_validation():
    with pytest.raises(ValueError):
        HistogramPair(np.ones(256), np.full(256, 1 / 256))
    with pytest.raises(ValueError):
        HistogramPair(np.full(255, 1 / 255), np.full(256, 1 / 256))
