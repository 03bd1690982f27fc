"""Kernel builders, blurs, derivatives, Sobel edges and block extraction."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from diffcv.autodiff import ShapeError, gradcheck, set_num_threads, tensor
from diffcv.filters import (
    Kernel2d,
    blur,
    box_blur,
    extract_blocks,
    gaussian_blur,
    laplacian,
    make_box_kernel,
    make_gaussian_kernel,
    make_laplace_kernel,
    make_sobel_kernel,
    sobel_edges,
    spatial_gradient,
)


class TestKernels:
    def test_gaussian_ksize_one(self):
        np.testing.assert_array_equal(make_gaussian_kernel(1, 0.7).weights.data, [[1.0]])

    @pytest.mark.parametrize("ksize,sigma", [(3, 0.5), (5, 1.0), (7, 2.3), (9, 0.8)])
    def test_gaussian_sum_and_symmetry(self, ksize, sigma):
        w = make_gaussian_kernel(ksize, sigma).weights.data
        assert w.sum() == pytest.approx(1.0, abs=1e-14)
        np.testing.assert_allclose(w, w[::-1, ::-1], atol=1e-16)

    def test_gaussian_center_direct_evaluation(self):
        vals = [math.exp(-(u * u + v * v) / (2 * 0.8**2)) for u in (-1, 0, 1) for v in (-1, 0, 1)]
        w = make_gaussian_kernel(3, 0.8).weights.data
        assert w[1, 1] == pytest.approx(1.0 / sum(vals), rel=1e-14)

    @pytest.mark.parametrize("ksize", [0, 2, -3, 4])
    def test_bad_ksize(self, ksize):
        with pytest.raises(ValueError):
            make_gaussian_kernel(ksize, 1.0)

    def test_bad_sigma(self):
        with pytest.raises(ValueError):
            make_gaussian_kernel(3, 0.0)

    def test_gaussian_differentiable_in_sigma(self):
        gradcheck(lambda s: make_gaussian_kernel(5, s).weights ** 2, [np.array(1.3)])

    def test_zero_sum_kinds(self):
        for k in (make_laplace_kernel(), make_sobel_kernel("x"), make_sobel_kernel("y")):
            assert k.weights.data.sum() == 0.0
        np.testing.assert_array_equal(make_sobel_kernel("x").weights.data, oracles.SOBEL_X)
        np.testing.assert_array_equal(make_laplace_kernel().weights.data, [[0, 1, 0], [1, -4, 1], [0, 1, 0]])

    def test_invariant_violation_rejected(self):
        bad = Kernel2d(tensor(np.ones((3, 3))), "box")
        with pytest.raises(ValueError):
            blur(tensor(np.ones((1, 1, 4, 4))), bad)


class TestBlur:
    def test_box_one_identity(self, rng):
        x = rng.random((2, 2, 5, 5))
        np.testing.assert_array_equal(blur(tensor(x), make_box_kernel(1)).data, x)

    def test_gaussian_constant(self):
        out = gaussian_blur(tensor(np.full((1, 3, 7, 7), 0.3)), 5, 1.2).data
        np.testing.assert_allclose(out, 0.3, atol=1e-15)

    def test_box_on_ramp_matches_nested_loop(self):
        ramp = np.tile(np.arange(8.0) / 8, (6, 1))
        out = box_blur(tensor(ramp[None, None]), 3).data[0, 0]
        np.testing.assert_allclose(out, oracles.box_blur(ramp, 3), atol=1e-15)

    @pytest.mark.parametrize("ksize", [3, 5])
    def test_box_oracle_random(self, ksize, rng):
        x = rng.random((16, 16))
        np.testing.assert_allclose(box_blur(tensor(x[None, None]), ksize).data[0, 0], oracles.box_blur(x, ksize), atol=1e-9)

    @pytest.mark.parametrize("ksize,sigma", [(3, 0.8), (5, 1.5)])
    def test_gaussian_oracle_random(self, ksize, sigma, rng):
        x = rng.random((16, 16))
        ref = oracles.correlate2d(x, oracles.gaussian_kernel(ksize, sigma))
        np.testing.assert_allclose(gaussian_blur(tensor(x[None, None]), ksize, sigma).data[0, 0], ref, atol=1e-9)

    def test_laplacian_of_quadratic(self):
        y, x = np.mgrid[0:9, 0:9].astype(float)
        out = laplacian(tensor((x * x + 2 * y * y)[None, None])).data[0, 0]
        np.testing.assert_allclose(out[1:-1, 1:-1], 6.0, atol=1e-12)

    @pytest.mark.parametrize("fn", [lambda t: gaussian_blur(t, 5, 1.0), lambda t: box_blur(t, 3), laplacian])
    def test_gradcheck(self, fn, rng):
        for _ in range(5):
            gradcheck(lambda t: fn(t) ** 2, [rng.random((1, 2, 5, 6))])


class TestSpatialGradient:
    def test_constant_zero(self):
        for order in (1, 2):
            np.testing.assert_array_equal(spatial_gradient(tensor(np.full((1, 1, 6, 6), 0.4)), order).data, 0.0)

    def test_shapes(self):
        x = tensor(np.zeros((2, 3, 5, 6)))
        assert spatial_gradient(x, 1).shape == (2, 3, 2, 5, 6)
        assert spatial_gradient(x, 2).shape == (2, 3, 3, 5, 6)

    def test_horizontal_ramp(self):
        W = 8
        img = np.tile(np.arange(W, dtype=float) / W, (7, 1))
        g = spatial_gradient(tensor(img[None, None]), 1).data[0, 0]
        ref_dx = oracles.correlate2d(img, oracles.SOBEL_X)
        np.testing.assert_allclose(g[0], ref_dx, atol=1e-14)
        np.testing.assert_allclose(g[0][1:-1, 1:-1], 8.0 / W, atol=1e-14)
        np.testing.assert_allclose(g[1], 0.0, atol=1e-14)

    def test_quadratic_second_derivative(self):
        img = np.tile(np.arange(9, dtype=float) ** 2, (7, 1))
        dxx = spatial_gradient(tensor(img[None, None]), 2).data[0, 0, 0]
        ref = oracles.correlate2d(img, np.outer([1, 2, 1], [1, -2, 1]))
        np.testing.assert_allclose(dxx, ref, atol=1e-12)
        interior = dxx[1:-1, 1:-1]
        assert np.all(interior > 0)
        np.testing.assert_allclose(interior, interior[0, 0], atol=1e-12)

    def test_bad_order(self):
        with pytest.raises(ValueError):
            spatial_gradient(tensor(np.zeros((1, 1, 3, 3))), 3)

    @pytest.mark.parametrize("order", [1, 2])
    def test_gradcheck(self, order, rng):
        for _ in range(5):
            gradcheck(lambda t: spatial_gradient(t, order) ** 2, [rng.random((1, 1, 5, 5))])


class TestSobelEdges:
    def test_constant_is_sqrt_eps(self):
        out = sobel_edges(tensor(np.full((1, 1, 5, 5), 0.5))).data
        np.testing.assert_allclose(out, 1e-6, rtol=1e-12)

    def test_vertical_step_peaks_on_edge(self):
        img = np.zeros((9, 10))
        img[:, 5:] = 1.0
        out = sobel_edges(tensor(img[None, None])).data[0, 0]
        ref = oracles.sobel_edges(img)
        np.testing.assert_allclose(out, ref, atol=1e-12)
        cols = out[4].argsort()[-2:]
        assert set(cols) == {4, 5}

    def test_composition_bitwise(self, rng):
        x = rng.random((2, 3, 6, 6))
        g = spatial_gradient(tensor(x), 1).data
        ref = np.sqrt(g[:, :, 0] ** 2 + g[:, :, 1] ** 2 + 1e-12)
        np.testing.assert_array_equal(sobel_edges(tensor(x)).data, ref)

    def test_oracle_random(self, rng):
        x = rng.random((16, 16))
        np.testing.assert_allclose(sobel_edges(tensor(x[None, None])).data[0, 0], oracles.sobel_edges(x), atol=1e-9)

    def test_f32_eps(self):
        out = sobel_edges(tensor(np.zeros((1, 1, 3, 3), dtype=np.float32)))
        assert out.dtype == np.float32
        np.testing.assert_allclose(out.data, 1e-3, rtol=1e-5)

    def test_gradcheck_including_flat_pixels(self, rng):
        for _ in range(5):
            x = rng.random((1, 2, 5, 5))
            x[0, 0, :2, :2] = 0.5  # zero-gradient region stays finite
            gradcheck(lambda t: sobel_edges(t), [x])

    @pytest.mark.parametrize("shape", [(2, 3, 7, 9), (1, 1, 1, 5), (3, 2, 4, 1), (1, 1, 2, 2)])
    def test_written_backward_matches_composed_graph(self, shape, rng):
        x = rng.random(shape)
        w = rng.normal(size=shape)
        fused = tensor(x, requires_grad=True)
        (sobel_edges(fused) * w).sum().backward()
        comp = tensor(x, requires_grad=True)
        g = spatial_gradient(comp, 1)
        gx, gy = g[:, :, 0], g[:, :, 1]
        ((gx * gx + gy * gy + 1e-12) ** 0.5 * w).sum().backward()
        np.testing.assert_allclose(fused.grad, comp.grad, atol=1e-12)
        gradcheck(lambda t: (sobel_edges(t) * w).sum(), [x])

    def test_thread_split_bitwise(self, rng):
        x = rng.random((5, 3, 8, 8)).astype(np.float32)
        single = sobel_edges(tensor(x)).data
        set_num_threads(3)
        try:
            split = sobel_edges(tensor(x)).data
        finally:
            set_num_threads(1)
        np.testing.assert_array_equal(split, single)


class TestExtractBlocks:
    def test_whole_image(self, rng):
        x = rng.random((2, 3, 4, 5))
        out = extract_blocks(tensor(x), (4, 5), (3, 3)).data
        assert out.shape == (2, 1, 3, 4, 5)
        np.testing.assert_array_equal(out[:, 0], x)

    def test_quadrants(self):
        x = np.arange(16.0).reshape(1, 1, 4, 4)
        out = extract_blocks(tensor(x), (2, 2), (2, 2)).data
        assert out.shape[1] == 4
        np.testing.assert_array_equal(out[0, 1, 0], [[2, 3], [6, 7]])
        np.testing.assert_array_equal(out[0, 2, 0], [[8, 9], [12, 13]])

    def test_overlapping_matches_slicing(self, rng):
        x = rng.random((1, 2, 3, 3))
        out = extract_blocks(tensor(x), (2, 2), (1, 1)).data
        manual = [x[0, :, i : i + 2, j : j + 2] for i in range(2) for j in range(2)]
        np.testing.assert_array_equal(out[0], np.stack(manual))

    def test_block_too_large(self):
        with pytest.raises(ShapeError):
            extract_blocks(tensor(np.zeros((1, 1, 3, 3))), (4, 2), (1, 1))

    def test_gradcheck(self, rng):
        gradcheck(lambda t: extract_blocks(t, (2, 3), (1, 2)) ** 2, [rng.random((1, 1, 4, 5))])


class TestFilterProperties:
    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.sampled_from([3, 5, 7]), st.floats(0.3, 3.0))
    def test_gaussian_blur_is_monotone(self, seed, ksize, sigma):
        x = np.random.default_rng(seed).random((1, 2, 9, 8))
        y = gaussian_blur(tensor(x), ksize, sigma).data
        lo = x.min(axis=(2, 3), keepdims=True)
        hi = x.max(axis=(2, 3), keepdims=True)
        assert np.all(y >= lo - 1e-12) and np.all(y <= hi + 1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.floats(-3, 3), st.floats(-3, 3), st.sampled_from([1, 2]))
    def test_spatial_gradient_is_linear(self, seed, a, b, order):
        rng = np.random.default_rng(seed)
        I, J = rng.random((2, 1, 2, 6, 6))
        lhs = spatial_gradient(tensor(a * I + b * J), order).data
        rhs = a * spatial_gradient(tensor(I), order).data + b * spatial_gradient(tensor(J), order).data
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_batch_equivariance_bitwise(self, seed):
        x = np.random.default_rng(seed).random((3, 2, 7, 6))
        fns = [
            lambda t: gaussian_blur(t, 5, 1.1),
            lambda t: box_blur(t, 3),
            laplacian,
            lambda t: spatial_gradient(t, 2),
            sobel_edges,
            lambda t: extract_blocks(t, (3, 3), (2, 2)),
        ]
        for fn in fns:
            full = fn(tensor(x)).data
            for i in range(3):
                np.testing.assert_array_equal(full[i], fn(tensor(x[i : i + 1])).data[0])
