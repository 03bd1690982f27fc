"""Scale space, detector responses, soft NMS, orientation, SIFT, matching and RANSAC."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from diffcv.autodiff import ShapeError, Tensor, grad, gradcheck, tensor
from diffcv.features import (
    DESCRIPTOR_SIZE,
    DetectorConfig,
    ScaleSpace,
    build_scale_space,
    consistent_matches,
    detect_and_describe,
    detector_response,
    dlt_homography,
    dominant_orientation,
    extract_patches,
    local_maxima_3d,
    match_descriptors,
    patch_grid,
    ransac_homography,
    reprojection_error,
    scale_space_responses,
    sift_describe,
    soft_nms_select,
    softargmax1d,
    softargmax2d,
)
from diffcv.features.scale_space import level0_to_octave, octave_to_level0
from diffcv.filters import gaussian_blur
from diffcv.losses import descriptor_distance


def blob(h=31, w=31, cy=15, cx=15, sigma=3.0):
    y, x = np.mgrid[0:h, 0:w].astype(float)
    return np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * sigma**2))[None, None]


def textured(seed, h=64, w=64, sigma=1.5):
    x = np.random.default_rng(seed).random((1, 1, h, w))
    return gaussian_blur(tensor(x), 7, sigma).data


def fake_space(s=3, sigma0=1.6) -> ScaleSpace:
    return ScaleSpace(octaves=[], levels_per_octave=s, sigma0=sigma0)


def circ_diff(a, b):
    return (a - b + math.pi) % (2 * math.pi) - math.pi


class TestSoftargmax:
    def test_uniform_patch_gives_centre(self):
        out = softargmax2d(tensor(np.zeros((2, 5, 7))), 0.3).data
        np.testing.assert_array_equal(out, [[3.0, 2.0], [3.0, 2.0]])

    def test_one_hot_low_temperature(self):
        p = np.zeros((4, 6))
        p[1, 4] = 1.0
        np.testing.assert_allclose(softargmax2d(tensor(p), 1e-3).data, [4.0, 1.0], atol=1e-6)

    def test_hand_evaluated_row(self):
        e = np.exp([0.0, 1.0, 2.0])
        expected = (e * [0, 1, 2]).sum() / e.sum()
        out = softargmax2d(tensor([[0.0, 1.0, 2.0]]), 1.0).data
        assert out[0] == pytest.approx(expected, abs=1e-15)
        assert out[1] == 0.0
        assert softargmax1d(tensor([0.0, 1.0, 2.0]), 1.0).item() == pytest.approx(expected, abs=1e-15)

    def test_bad_temperature(self):
        with pytest.raises(ValueError):
            softargmax2d(tensor(np.zeros((3, 3))), 0.0)

    def test_gradcheck(self, rng):
        for _ in range(5):
            gradcheck(lambda p: softargmax2d(p, 0.5) ** 2, [rng.normal(size=(2, 3, 4))])
            gradcheck(lambda v: softargmax1d(v, 0.7) ** 2, [rng.normal(size=(3, 5))])


class TestScaleSpace:
    def test_structure(self, rng):
        space = build_scale_space(tensor(rng.random((1, 1, 80, 100))), 3, 1.6, min_size=32)
        assert [o.factor for o in space.octaves] == [1, 2]
        for o in space.octaves:
            assert len(o.images) == 6
            assert all(b > a for a, b in zip(o.sigmas, o.sigmas[1:]))
        h, w = space.octaves[0].images[0].shape[-2:]
        assert space.octaves[1].images[0].shape[-2:] == (h // 2, w // 2)

    def test_too_small(self):
        with pytest.raises(ValueError):
            build_scale_space(tensor(np.zeros((1, 1, 20, 20))), min_size=32)

    def test_coordinate_maps_are_inverse(self, rng):
        xy = rng.uniform(0, 50, size=(5, 2))
        np.testing.assert_allclose(level0_to_octave(octave_to_level0(xy, 4), 4), xy, atol=1e-12)
        # pixel 0 of octave 1 covers level-0 pixels 0 and 1
        assert octave_to_level0(np.array(0.0), 2) == 0.5


class TestDetectorResponse:
    @pytest.mark.parametrize("kind", ["harris", "hessian", "dog"])
    def test_constant_gives_zero(self, kind):
        out = detector_response(tensor(np.full((2, 1, 12, 12), 0.3)), kind).data
        np.testing.assert_allclose(out, 0.0, atol=1e-15)

    def test_requires_single_channel(self):
        with pytest.raises(ShapeError):
            detector_response(tensor(np.zeros((1, 3, 8, 8))), "hessian")

    def test_hessian_peaks_at_blob_centre(self):
        r = detector_response(tensor(blob(cy=14, cx=17)), "hessian").data[0, 0]
        assert np.unravel_index(np.argmax(r), r.shape) == (14, 17)

    @pytest.mark.parametrize("kind,power", [("hessian", 2), ("harris", 4), ("dog", 1)])
    def test_homogeneity(self, kind, power, rng):
        x = textured(1, 24, 24)
        a = detector_response(tensor(x), kind).data
        b = detector_response(tensor(2 * x), kind).data
        np.testing.assert_allclose(b, 2**power * a, rtol=1e-12, atol=1e-15)

    @pytest.mark.parametrize("kind", ["harris", "hessian", "dog"])
    def test_translation_equivariance(self, kind):
        x = textured(2, 40, 40)
        shifted = np.roll(x, (3, -2), axis=(2, 3))
        a = detector_response(tensor(x), kind).data[0, 0]
        b = detector_response(tensor(shifted), kind).data[0, 0]
        m = 12  # stay clear of the wrapped border and filter support
        np.testing.assert_allclose(b[m + 3 : -m, m : -m - 2], a[m : -m - 3, m + 2 : -m], atol=1e-14)

    @pytest.mark.parametrize("kind", ["harris", "hessian", "dog"])
    def test_gradcheck(self, kind, rng):
        for _ in range(5):
            gradcheck(lambda t: detector_response(t, kind) * 10.0, [rng.random((1, 1, 7, 7))])

    def test_batch_equivariance_bitwise(self):
        x = np.concatenate([textured(s, 20, 20) for s in range(3)])
        for kind in ("harris", "hessian", "dog"):
            full = detector_response(tensor(x), kind).data
            for i in range(3):
                np.testing.assert_array_equal(full[i], detector_response(tensor(x[i : i + 1]), kind).data[0])


class TestLocalMaxima:
    def test_plateau_keeps_first_row_major(self):
        r = np.zeros((3, 7, 7))
        r[1, 3, 3] = r[1, 3, 4] = 1.0
        m = local_maxima_3d(r, border=1)
        assert list(zip(*np.nonzero(m))) == [(1, 3, 3)]

    def test_threshold_and_border(self):
        r = np.zeros((3, 7, 7))
        r[1, 0, 3] = 5.0  # on the border
        r[1, 3, 3] = 0.1
        assert not local_maxima_3d(r, border=1, threshold=0.2).any()
        assert local_maxima_3d(r, border=1, threshold=0.0).sum() == 1


class TestSoftNMS:
    def impulse_volume(self, cells, h=12, w=14):
        v = np.zeros((1, 3, h, w))
        for lv, y, x, val in cells:
            v[0, lv, y, x] = val
        return v

    def test_single_impulse(self):
        resp = [tensor(self.impulse_volume([(1, 5, 6, 1.0)]))]
        det = soft_nms_select(resp, fake_space(), k=1)
        np.testing.assert_array_equal(det.xy.data, [[6.0, 5.0]])
        assert det.scale.data[0] == pytest.approx(1.6 * 2 ** (1 / 3), rel=1e-14)
        assert not det.truncated

    def test_two_equal_impulses_row_major(self):
        resp = [tensor(self.impulse_volume([(1, 8, 3, 1.0), (1, 3, 10, 1.0)]))]
        det = soft_nms_select(resp, fake_space(), k=2)
        np.testing.assert_array_equal(det.xy.data, [[10.0, 3.0], [3.0, 8.0]])

    def test_asymmetric_neighbour_matches_scalar_oracle(self):
        v = self.impulse_volume([(1, 5, 6, 1.0)])
        v[0, 1, 5, 7] = 0.6
        v[0, 1, 4, 6] = 0.3
        T = 0.5
        det = soft_nms_select([tensor(v)], fake_space(), k=1, temperature=T)
        win = v[0, 1, 4:7, 5:8] / v[0, 1, 5, 6]
        wts = np.exp(win / T)
        wts /= wts.sum()
        ex = sum(wts[i, j] * (j - 1) for i in range(3) for j in range(3))
        ey = sum(wts[i, j] * (i - 1) for i in range(3) for j in range(3))
        np.testing.assert_allclose(det.xy.data[0], [6 + ex, 5 + ey], atol=1e-14)
        assert ex > 0

    def test_fewer_maxima_than_requested(self):
        det = soft_nms_select([tensor(self.impulse_volume([(1, 5, 6, 1.0)]))], fake_space(), k=5)
        assert len(det) == 1 and det.truncated and det.requested == 5

    def test_sorted_by_response(self, rng):
        space = build_scale_space(tensor(textured(3, 64, 64)))
        det = soft_nms_select(scale_space_responses(space, "hessian"), space, k=30)
        r = det.response.data
        assert np.all(np.diff(r) <= 0)

    def test_low_temperature_converges_to_cells(self, rng):
        v = rng.random((1, 3, 20, 20))
        det = soft_nms_select([tensor(v)], fake_space(), k=10, temperature=1e-3)
        cells = np.stack([np.nonzero(local_maxima_3d(v[0], 1))[2], np.nonzero(local_maxima_3d(v[0], 1))[1]], axis=1)
        for p in det.xy.data:
            assert np.min(np.abs(cells - p).max(axis=1)) < 0.01

    def test_coordinates_differentiable_wrt_responses(self, rng):
        base = rng.random((1, 3, 9, 9))
        base[0, 1, 4, 4] = 2.0

        def f(v):
            det = soft_nms_select([v], fake_space(), k=1, temperature=0.5)
            return det.xy.sum() + det.scale.sum()

        gradcheck(f, [base])


class TestOrientation:
    def ramp(self, angle=0.0, p=32):
        y, x = np.mgrid[0:p, 0:p].astype(float)
        return (np.cos(angle) * x + np.sin(angle) * y)[None, None] / p

    def test_horizontal_ramp_is_zero(self):
        theta = dominant_orientation(tensor(self.ramp())).data[0]
        assert abs(circ_diff(theta, 0.0)) < 1e-2

    def test_constant_patch_is_zero(self):
        assert dominant_orientation(tensor(np.full((1, 1, 32, 32), 0.5))).data[0] == 0.0

    def test_range(self, rng):
        p = np.concatenate([textured(s, 32, 32) for s in range(6)])
        th = dominant_orientation(tensor(p)).data
        assert np.all(th >= 0) and np.all(th < 2 * math.pi)

    def test_rotation_by_quarter_turn(self):
        for s in range(5):
            p = textured(10 + s, 32, 32, sigma=2.0)
            a = dominant_orientation(tensor(p)).data[0]
            b = dominant_orientation(tensor(np.rot90(p, axes=(2, 3)).copy())).data[0]
            # a counter-clockwise array rotation turns y-down gradients by -pi/2
            assert abs(circ_diff(b - a, -math.pi / 2)) < 0.05

    def test_gradcheck(self, rng):
        for _ in range(5):
            gradcheck(lambda t: dominant_orientation(t, 0.5), [textured(int(rng.integers(1 << 30)), 10, 10)])


class TestSift:
    def test_norm_and_bounds(self):
        p = np.concatenate([textured(s, 32, 32) for s in range(8)])
        d = sift_describe(tensor(p)).data
        assert d.shape == (8, DESCRIPTOR_SIZE)
        np.testing.assert_allclose(np.linalg.norm(d, axis=1), 1.0, atol=1e-12)
        assert d.min() >= 0

    def test_clamp_bound_exact(self):
        p = np.concatenate([textured(s, 32, 32) for s in range(8)])
        t = tensor(p)
        raw = sift_describe(t, clamp_at=10.0).data  # no clamping: plain unit vectors
        clamped = np.minimum(raw, 0.2)
        expected = clamped / np.linalg.norm(clamped, axis=1, keepdims=True)
        np.testing.assert_allclose(sift_describe(t).data, expected, atol=1e-12)

    def test_constant_patch_uniform(self):
        d = sift_describe(tensor(np.full((2, 1, 32, 32), 0.4))).data
        np.testing.assert_allclose(d, 1 / math.sqrt(128), rtol=1e-15)

    def test_affine_intensity_invariance(self):
        p = textured(4, 32, 32)
        a = sift_describe(tensor(p)).data
        for scale, offset in [(2.0, 0.1), (0.3, -0.5), (7.0, 3.0)]:
            np.testing.assert_allclose(sift_describe(tensor(scale * p + offset)).data, a, atol=1e-5)

    def test_deterministic(self):
        p = np.concatenate([textured(s, 32, 32) for s in range(3)])
        np.testing.assert_array_equal(sift_describe(tensor(p)).data, sift_describe(tensor(p.copy())).data)

    def test_wrong_size(self):
        with pytest.raises(ShapeError):
            sift_describe(tensor(np.zeros((1, 1, 16, 16))))
        with pytest.raises(ShapeError):
            sift_describe(tensor(np.zeros((1, 1, 32, 30))))

    def test_gradcheck(self):
        for s in range(5):
            p = textured(20 + s, 32, 32, sigma=1.0)
            d = sift_describe(tensor(p)).data
            w = np.random.default_rng(s).normal(size=d.shape)
            # stay away from the clamp kink: no entry sits near 0.2 before renormalization
            raw = sift_describe(tensor(p), clamp_at=10.0).data
            assert np.min(np.abs(raw - 0.2)) > 1e-4
            gradcheck(lambda t: sift_describe(t) * w, [p], rtol=1e-3)

    def test_layout_is_cell_major(self):
        # gradient energy only in the top-left corner lands in cell 0 (entries 0..7)
        p = np.zeros((1, 1, 32, 32))
        p[0, 0, 2:6, 2:6] = np.arange(4)[None, :]
        d = sift_describe(tensor(p)).data[0].reshape(16, 8)
        assert np.argmax(d.sum(axis=1)) == 0


class TestPatches:
    def test_centre_pixel_of_identity_patch(self, rng):
        img = textured(5, 64, 64)
        space = build_scale_space(tensor(img), max_octaves=1)
        # scale chosen so the 32-sample patch spans 32 pixels at unit spacing
        scale = np.array([32 / 12.0])
        xy = np.array([[30.5, 20.5]])
        patches = extract_patches(space, xy, scale, np.array([0]), np.array([0]))
        ref = space.octaves[0].images[0].data[0, 0, 5:37, 15:47]
        np.testing.assert_allclose(patches.data[0, 0], ref, atol=1e-12)

    def test_orientation_rotates_samples(self):
        xy, sc = np.array([[20.0, 20.0]]), np.array([2.0])
        g_up = patch_grid(xy, sc, None, 1, 40, 40).data[0]
        g_rot = patch_grid(xy, sc, np.array([math.pi / 2]), 1, 40, 40).data[0]
        centre = (2 * 20.0 + 1) / 40 - 1
        up, rot = g_up - centre, g_rot - centre
        # a quarter turn maps the patch offset (dx, dy) to (-dy, dx)
        np.testing.assert_allclose(rot[..., 0], -up[..., 1], atol=1e-12)
        np.testing.assert_allclose(rot[..., 1], up[..., 0], atol=1e-12)

    def test_gradcheck_wrt_location_and_scale(self):
        img = textured(6, 48, 48, sigma=2.0)
        space = build_scale_space(tensor(img), max_octaves=1)

        def f(xy, sc):
            return extract_patches(space, xy, sc, np.array([0, 0]), np.array([1, 1]), size=8) ** 2

        gradcheck(f, [np.array([[20.3, 22.7], [25.1, 18.4]]), np.array([1.7, 2.2])])


class TestMatching:
    def test_identity_on_orthonormal_set(self):
        d = np.eye(6)
        m = match_descriptors(d, d, "mnn")
        np.testing.assert_array_equal(m, np.c_[np.arange(6), np.arange(6), np.zeros(6)])

    def test_tie_resolves_to_lower_index(self):
        da = np.array([[0.0, 0.0]])
        db = np.array([[1.0, 0.0], [0.0, 1.0]])
        m = match_descriptors(da, db, "mnn")
        assert m[0, 1] == 0

    @pytest.mark.parametrize("policy,ratio", [("mnn", None), ("snn_ratio", 0.8), ("snn_ratio", 0.95)])
    def test_brute_force_oracle(self, policy, ratio, rng):
        for _ in range(20):
            da, db = rng.random((5, 4)), rng.random((5, 4))
            got = match_descriptors(da, db, policy, ratio or 0.8)
            ref = oracles.match_mnn_ratio(da, db, ratio)
            assert [(int(i), int(j)) for i, j, _ in got] == [(i, j) for i, j, _ in ref]
            np.testing.assert_allclose(got[:, 2], [r[2] for r in ref], atol=1e-12)

    def test_oracle_on_16(self, rng):
        da, db = rng.random((16, 16)), rng.random((16, 16))
        got = match_descriptors(da, db, "mnn")
        ref = oracles.match_mnn_ratio(da, db, None)
        np.testing.assert_allclose(got, np.array(ref, dtype=float).reshape(-1, 3), atol=1e-9)

    def test_empty(self):
        assert match_descriptors(np.zeros((0, 4)), np.ones((3, 4))).shape == (0, 3)

    def test_consistency_mask(self):
        H = np.array([[1.0, 0, 5], [0, 1, -2], [0, 0, 1]])
        xy_b = np.array([[10.0, 10.0], [20.0, 5.0]])
        xy_a = np.array([[15.0, 8.0], [40.0, 40.0]])
        m = np.array([[0, 0, 0.1], [1, 1, 0.2]])
        np.testing.assert_array_equal(consistent_matches(m, xy_a, xy_b, H, 3.0), [True, False])


def random_h(rng):
    H = np.eye(3) + rng.normal(scale=[[0.05, 0.05, 5], [0.05, 0.05, 5], [1e-4, 1e-4, 0]], size=(3, 3))
    return H / H[2, 2]


class TestRansac:
    def test_exact_correspondences(self, rng):
        H = random_h(rng)
        src = rng.uniform(0, 200, size=(10, 2))
        dst = np.c_[src, np.ones(10)] @ H.T
        dst = dst[:, :2] / dst[:, 2:]
        H_est, inl = ransac_homography(src, dst, iters=200)
        assert inl.all()
        assert reprojection_error(H_est, src, dst).max() < 1e-6
        np.testing.assert_allclose(H_est / H_est[2, 2], H, atol=1e-6)

    def test_half_outliers(self, rng):
        for trial in range(5):
            H = random_h(rng)
            n = 60
            src = rng.uniform(0, 300, size=(n, 2))
            dst = np.c_[src, np.ones(n)] @ H.T
            dst = dst[:, :2] / dst[:, 2:] + rng.normal(scale=0.3, size=(n, 2))
            out = rng.permutation(n)[: n // 2]
            for i in out:  # gross outliers: at least 20 px from the true mapping
                while True:
                    dst[i] = rng.uniform(0, 300, size=2)
                    if reprojection_error(H, src[i : i + 1], dst[i : i + 1])[0] > 20:
                        break
            truth = np.ones(n, dtype=bool)
            truth[out] = False
            _, inl = ransac_homography(src, dst, iters=1000, seed=trial)
            np.testing.assert_array_equal(inl, truth)

    def test_too_few(self):
        with pytest.raises(ValueError):
            ransac_homography(np.zeros((3, 2)), np.zeros((3, 2)))

    def test_collinear_samples_are_redrawn(self, rng):
        H = random_h(rng)
        line = np.c_[np.linspace(0, 100, 6), np.linspace(0, 50, 6)]
        src = np.r_[line, rng.uniform(0, 100, size=(4, 2))]
        dst = np.c_[src, np.ones(10)] @ H.T
        dst = dst[:, :2] / dst[:, 2:]
        H_est, inl = ransac_homography(src, dst, iters=50)
        assert inl.all() and reprojection_error(H_est, src, dst).max() < 1e-6

    def test_seeded(self, rng):
        src = rng.uniform(0, 100, size=(30, 2))
        dst = rng.uniform(0, 100, size=(30, 2))
        a = ransac_homography(src, dst, seed=3)
        b = ransac_homography(src, dst, seed=3)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])

    def test_dlt_minimal(self, rng):
        H = random_h(rng)
        src = np.array([[0.0, 0], [10, 0], [10, 10], [0, 10]])
        dst = np.c_[src, np.ones(4)] @ H.T
        dst = dst[:, :2] / dst[:, 2:]
        est = dlt_homography(src, dst)
        np.testing.assert_allclose(est / est[2, 2], H, atol=1e-9)


class TestPipeline:
    def test_detect_and_describe_invariants(self):
        img = textured(7, 96, 96, sigma=1.2)
        feats = detect_and_describe(tensor(img), 50)
        assert 0 < len(feats) <= 50
        xy = feats.xy.data
        assert np.all(xy >= -0.5) and np.all(xy[:, 0] <= 95.5) and np.all(xy[:, 1] <= 95.5)
        assert np.all(feats.scale.data > 0)
        ori = feats.orientation.data
        assert np.all(ori >= 0) and np.all(ori < 2 * math.pi)
        np.testing.assert_allclose(np.linalg.norm(feats.desc.data, axis=1), 1.0, atol=1e-6)
        f0 = feats[0]
        assert f0.response == pytest.approx(feats.response.data.max())
        assert len(feats.to_list()) == len(feats)

    def test_requires_single_image(self):
        with pytest.raises(ValueError):
            detect_and_describe(tensor(np.zeros((2, 1, 64, 64))), 10)

    @pytest.mark.parametrize("upright", [True, False])
    def test_descriptor_distance_gradient_reaches_pixels(self, upright):
        a = textured(8, 64, 64, sigma=1.2)
        b = textured(9, 64, 64, sigma=1.2)
        ta, tb = tensor(a, requires_grad=True), tensor(b, requires_grad=True)
        cfg = DetectorConfig(upright=upright)
        fa, fb = detect_and_describe(ta, 20, cfg), detect_and_describe(tb, 20, cfg)
        n = min(len(fa), len(fb))
        loss = descriptor_distance(fa.desc[:n], fb.desc[:n]).mean()
        ga, gb = grad(loss, [ta, tb])
        for g in (ga, gb):
            assert np.all(np.isfinite(g)) and np.abs(g).max() > 0

    def test_float32_pipeline(self):
        img = textured(11, 64, 64).astype(np.float32)
        feats = detect_and_describe(Tensor(img), 20, DetectorConfig(upright=True))
        assert feats.desc.dtype == np.float32 and len(feats) > 0


class TestFeatureProperties:
    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.floats(0.05, 20.0), st.floats(-5.0, 5.0))
    def test_descriptor_unit_norm_and_affine_invariant(self, seed, scale, offset):
        p = textured(seed, 32, 32)
        d = sift_describe(tensor(p)).data
        np.testing.assert_allclose(np.linalg.norm(d), 1.0, atol=1e-12)
        np.testing.assert_allclose(sift_describe(tensor(scale * p + offset)).data, d, atol=1e-5)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.integers(1, 12), st.integers(1, 12))
    def test_matcher_equals_brute_force(self, seed, ka, kb):
        rng = np.random.default_rng(seed)
        da, db = rng.random((ka, 3)), rng.random((kb, 3))
        got = match_descriptors(da, db, "snn_ratio", 0.8)
        ref = oracles.match_mnn_ratio(da, db, 0.8)
        assert [(int(i), int(j)) for i, j, _ in got] == [(i, j) for i, j, _ in ref]
