"""Color conversions and photometric adjustments."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diffcv.autodiff import ShapeError, gradcheck, tensor
from diffcv.color import (
    GRAY_WEIGHTS,
    ColorSpace,
    adjust,
    convert,
    rgb_to_hsv,
)


def rgb(values):
    return tensor(np.asarray(values, dtype=float).reshape(1, 3, 1, 1))


def away_from_singular(rng, shape=(2, 3, 4, 4)):
    """Random RGB with distinct channels and saturation/value bounded away from 0."""
    x = rng.uniform(0.15, 0.95, size=shape)
    x[:, 0] += 0.02  # keep channels from tying exactly
    return np.clip(x, 0, 1)


class TestConvert:
    def test_gray_extremes(self):
        assert convert(rgb([0, 0, 0]), "rgb", "gray").item() == 0.0
        assert convert(rgb([1, 1, 1]), "rgb", "gray").item() == pytest.approx(1.0, abs=1e-15)

    def test_gray_red(self):
        assert convert(rgb([1, 0, 0]), "rgb", "gray").item() == pytest.approx(0.299, abs=1e-15)

    def test_gray_weights_sum_to_one(self):
        assert sum(GRAY_WEIGHTS) == pytest.approx(1.0, abs=1e-15)

    def test_bgr_is_involution(self, rng):
        x = rng.random((2, 3, 4, 5))
        once = convert(tensor(x), "rgb", "bgr").data
        np.testing.assert_array_equal(once, x[:, ::-1])
        np.testing.assert_array_equal(convert(tensor(once), "bgr", "rgb").data, x)

    def test_channel_mismatch(self):
        with pytest.raises(ShapeError):
            convert(tensor(np.ones((1, 1, 2, 2))), "rgb", "hsv")

    def test_all_pairs_route_through_rgb(self, rng):
        x = away_from_singular(rng)
        for dst in ColorSpace:
            if dst is ColorSpace.GRAY:
                continue
            y = convert(tensor(x), "rgb", dst)
            assert y.shape[1] == dst.channels
            back = convert(y, dst, "rgb").data
            np.testing.assert_allclose(back, x, atol=1e-10)

    def test_hsv_hue_range(self, rng):
        h = rgb_to_hsv(tensor(rng.random((3, 3, 8, 8)))).data[:, 0]
        assert h.min() >= 0 and h.max() < 2 * math.pi

    def test_hsv_round_trip(self, rng):
        x = away_from_singular(rng, (4, 3, 8, 8))
        back = convert(convert(tensor(x), "rgb", "hsv"), "hsv", "rgb").data
        assert np.abs(back - x).max() < 1e-5

    @pytest.mark.parametrize("dst", ["gray", "bgr", "hsv", "ycbcr"])
    def test_gradcheck(self, dst, rng):
        for _ in range(5):
            gradcheck(lambda t: convert(t, "rgb", dst) ** 2, [away_from_singular(rng, (1, 3, 3, 3))])

    @pytest.mark.parametrize("src", ["hsv", "ycbcr"])
    def test_inverse_gradcheck(self, src, rng):
        for _ in range(5):
            y = convert(tensor(away_from_singular(rng, (1, 3, 3, 3))), "rgb", src).data
            gradcheck(lambda t: convert(t, src, "rgb") ** 2, [y])


class TestAdjust:
    def test_brightness_zero_identity(self, rng):
        x = rng.random((1, 3, 4, 4))
        np.testing.assert_array_equal(adjust(tensor(x), "brightness", 0.0).data, x)

    def test_contrast_one_identity(self, rng):
        x = rng.random((1, 3, 4, 4))
        np.testing.assert_array_equal(adjust(tensor(x), "contrast", 1.0).data, x)

    def test_hue_full_turn(self, rng):
        x = rng.random((2, 3, 6, 6))
        np.testing.assert_allclose(adjust(tensor(x), "hue", 2 * math.pi).data, x, atol=1e-6)

    def test_outputs_in_unit_range(self, rng):
        x = rng.random((1, 3, 5, 5))
        for what, amount in [("brightness", 0.4), ("brightness", -0.6), ("contrast", 2.5), ("saturation", 3.0), ("hue", 1.0)]:
            y = adjust(tensor(x), what, amount).data
            assert y.min() >= -1e-12 and y.max() <= 1 + 1e-12

    def test_saturation_zero_gives_gray(self, rng):
        y = adjust(tensor(rng.random((1, 3, 4, 4))), "saturation", 0.0).data
        np.testing.assert_allclose(y[:, 0], y[:, 1], atol=1e-12)
        np.testing.assert_allclose(y[:, 1], y[:, 2], atol=1e-12)

    def test_non_rgb_rejected(self):
        with pytest.raises(ShapeError):
            adjust(tensor(np.ones((1, 1, 2, 2))), "brightness", 0.1)

    def test_unknown_adjustment(self):
        with pytest.raises(ValueError):
            adjust(tensor(np.ones((1, 3, 2, 2))), "gamma", 0.1)

    @pytest.mark.parametrize("what,amount", [("brightness", 0.05), ("contrast", 1.1), ("saturation", 0.7), ("hue", 0.4)])
    def test_gradcheck(self, what, amount, rng):
        for _ in range(5):
            x = rng.uniform(0.2, 0.8, size=(1, 3, 3, 3))
            x[:, 0] += 0.03
            gradcheck(lambda t: adjust(t, what, amount) ** 2, [x])


class TestColorProperties:
    @settings(max_examples=50, deadline=None)
    @given(st.floats(0, 1), st.integers(1, 3), st.integers(1, 4))
    def test_gray_preserves_constant_images(self, value, n, size):
        x = np.full((n, 3, size, size), value)
        np.testing.assert_allclose(convert(tensor(x), "rgb", "gray").data, value, atol=1e-15)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_batch_equivariance(self, seed):
        x = np.random.default_rng(seed).random((3, 3, 4, 4))
        for dst in ("hsv", "ycbcr", "gray"):
            full = convert(tensor(x), "rgb", dst).data
            for i in range(3):
                np.testing.assert_array_equal(full[i], convert(tensor(x[i : i + 1]), "rgb", dst).data[0])
