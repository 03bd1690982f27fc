"""Angle, coordinate and rotation-representation conversions.

Quaternions are (w, x, y, z). Axis-angle vectors encode the rotation angle
as their norm (Rodrigues vector).
"""

from __future__ import annotations

import math

import numpy as np

from ..autodiff import Tensor, atan2, cat, sqrt, stack, where
from ..autodiff.tensor import ShapeError, as_tensor, reduce_sum

W_EPS = 1e-8
_TAYLOR_ANGLE = 1e-4


def rad2deg(x):
    return as_tensor(x) * (180.0 / math.pi)


def deg2rad(x):
    return as_tensor(x) * (math.pi / 180.0)


def angle_convert(x, direction: str) -> Tensor:
    if direction == "rad2deg":
        return rad2deg(x)
    if direction == "deg2rad":
        return deg2rad(x)
    raise ValueError(f"unknown direction {direction!r}")


def to_homogeneous(pts: Tensor) -> Tensor:
    pts = as_tensor(pts)
    ones = Tensor(np.ones(pts.shape[:-1] + (1,), dtype=pts.dtype))
    return cat([pts, ones], axis=-1)


def homogeneous_valid(pts, eps: float = W_EPS) -> np.ndarray:
    d = pts.data if isinstance(pts, Tensor) else np.asarray(pts)
    return np.abs(d[..., -1]) > eps


def from_homogeneous(pts: Tensor, eps: float = W_EPS, return_mask: bool = False):
    """Divide by the last coordinate.

    Points with ``|w| <= eps`` are flagged invalid in the returned mask and
    divided by 1 instead, which keeps the result finite and differentiable.
    """
    pts = as_tensor(pts)
    ok = homogeneous_valid(pts, eps)
    w = where(ok[..., None], pts[..., -1:], 1.0)
    out = pts[..., :-1] / w
    return (out, ok) if return_mask else out


def homogeneous_convert(pts, direction: str):
    if direction == "to_homogeneous":
        return to_homogeneous(pts)
    if direction == "from_homogeneous":
        return from_homogeneous(pts)
    raise ValueError(f"unknown direction {direction!r}")


def normalize_pixel_coordinates(pix, height: int, width: int) -> Tensor:
    """Pixel centres (0 .. W-1) to [-1, 1] where the outer pixel edges sit at +-1."""
    pix = as_tensor(pix)
    scale = np.array([2.0 / width, 2.0 / height], dtype=pix.dtype)
    offset = np.array([1.0 / width - 1.0, 1.0 / height - 1.0], dtype=pix.dtype)
    return pix * scale + offset


def denormalize_pixel_coordinates(pts, height: int, width: int) -> Tensor:
    pts = as_tensor(pts)
    scale = np.array([width / 2.0, height / 2.0], dtype=pts.dtype)
    return (pts + 1.0) * scale - 0.5


# -- rotations ---------------------------------------------------------------------


def _skew_parts(v: Tensor):
    x, y, z = v[..., 0], v[..., 1], v[..., 2]
    return x, y, z


def _mat3(entries) -> Tensor:
    """Assemble (..., 3, 3) from nine (...)-shaped tensors in row-major order."""
    m = stack(entries, axis=-1)
    return m.reshape(m.shape[:-1] + (3, 3))


def axis_angle_to_rotation_matrix(aa) -> Tensor:
    """Rodrigues formula; below 1e-4 rad a second-order expansion is used."""
    aa = as_tensor(aa)
    if aa.shape[-1] != 3:
        raise ShapeError(f"axis-angle must end in 3, got {aa.shape}")
    x, y, z = _skew_parts(aa)
    theta2 = x * x + y * y + z * z
    small = theta2.data < _TAYLOR_ANGLE**2
    safe2 = where(small, 1.0, theta2)
    theta = sqrt(safe2)
    a = where(small, 1.0 - theta2 / 6.0, theta.sin() / theta)
    b = where(small, 0.5 - theta2 / 24.0, (1.0 - theta.cos()) / safe2)
    zero = x * 0.0
    k = _mat3([zero, -z, y, z, zero, -x, -y, x, zero])
    eye = Tensor(np.eye(3, dtype=aa.dtype))
    a = a[..., None, None]
    b = b[..., None, None]
    return eye + a * k + b * (k @ k)


def quaternion_to_rotation_matrix(q, tol: float = 1e-6) -> Tensor:
    q = as_tensor(q)
    if q.shape[-1] != 4:
        raise ShapeError(f"quaternion must end in 4, got {q.shape}")
    norm = np.linalg.norm(q.data, axis=-1)
    if np.any(np.abs(norm - 1.0) > tol):
        raise ValueError("quaternion is not unit-norm within tolerance")
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    return _mat3(
        [
            1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
            2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x),
            2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y),
        ]
    )


def rotation_matrix_to_quaternion(R, eps: float = 1e-12) -> Tensor:
    """Shepperd's method; the returned quaternion has w >= 0."""
    R = as_tensor(R)
    if R.shape[-2:] != (3, 3):
        raise ShapeError(f"rotation matrix must end in 3x3, got {R.shape}")
    r = [[R[..., i, j] for j in range(3)] for i in range(3)]
    tr = r[0][0] + r[1][1] + r[2][2]

    def safe_sqrt(v):
        return sqrt(where(v.data > eps, v, eps))

    # four candidates, each well conditioned when its pivot is largest
    s0 = safe_sqrt(tr + 1.0) * 2.0
    q0 = [s0 * 0.25, (r[2][1] - r[1][2]) / s0, (r[0][2] - r[2][0]) / s0, (r[1][0] - r[0][1]) / s0]
    s1 = safe_sqrt(1.0 + r[0][0] - r[1][1] - r[2][2]) * 2.0
    q1 = [(r[2][1] - r[1][2]) / s1, s1 * 0.25, (r[0][1] + r[1][0]) / s1, (r[0][2] + r[2][0]) / s1]
    s2 = safe_sqrt(1.0 + r[1][1] - r[0][0] - r[2][2]) * 2.0
    q2 = [(r[0][2] - r[2][0]) / s2, (r[0][1] + r[1][0]) / s2, s2 * 0.25, (r[1][2] + r[2][1]) / s2]
    s3 = safe_sqrt(1.0 + r[2][2] - r[0][0] - r[1][1]) * 2.0
    q3 = [(r[1][0] - r[0][1]) / s3, (r[0][2] + r[2][0]) / s3, (r[1][2] + r[2][1]) / s3, s3 * 0.25]

    pivots = np.stack([tr.data, r[0][0].data, r[1][1].data, r[2][2].data], axis=-1)
    choice = np.argmax(pivots, axis=-1)
    out = []
    for k in range(4):
        c = where(choice == 0, q0[k], where(choice == 1, q1[k], where(choice == 2, q2[k], q3[k])))
        out.append(c)
    q = stack(out, axis=-1)
    sign = np.where(q.data[..., :1] < 0, -1.0, 1.0).astype(q.dtype)
    return q * sign


def quaternion_to_axis_angle(q) -> Tensor:
    q = as_tensor(q)
    w = q[..., 0:1]
    v = q[..., 1:]
    s2 = reduce_sum(v * v, axis=-1, keepdims=True)
    small = s2.data < 1e-16
    s = sqrt(where(small, 1.0, s2))
    angle = atan2(s, w) * 2.0
    # w may be negative; atan2 keeps the angle in (0, 2 pi]
    factor = where(small, 2.0 / where(np.abs(w.data) > 0, w, 1.0), angle / s)
    return v * factor


def axis_angle_to_quaternion(aa) -> Tensor:
    aa = as_tensor(aa)
    theta2 = reduce_sum(aa * aa, axis=-1, keepdims=True)
    small = theta2.data < _TAYLOR_ANGLE**2
    theta = sqrt(where(small, 1.0, theta2))
    half = theta * 0.5
    k = where(small, 0.5 - theta2 / 48.0, half.sin() / theta)
    w = where(small, 1.0 - theta2 / 8.0, half.cos())
    return cat([w, aa * k], axis=-1)


def rotation_matrix_to_axis_angle(R) -> Tensor:
    return quaternion_to_axis_angle(rotation_matrix_to_quaternion(R))


_ROTATION_TAGS = ("quaternion", "axis_angle", "rotation_matrix")


def rotation_convert(r, src: str, dst: str) -> Tensor:
    """Convert among ``quaternion``, ``axis_angle`` and ``rotation_matrix``."""
    if src not in _ROTATION_TAGS or dst not in _ROTATION_TAGS:
        raise ValueError(f"rotation tags must be in {_ROTATION_TAGS}")
    r = as_tensor(r)
    if src == dst:
        return r
    if src == "quaternion":
        R = quaternion_to_rotation_matrix(r)
        if dst == "rotation_matrix":
            return R
        return quaternion_to_axis_angle(r)
    if src == "axis_angle":
        if dst == "rotation_matrix":
            return axis_angle_to_rotation_matrix(r)
        return axis_angle_to_quaternion(r)
    if dst == "quaternion":
        return rotation_matrix_to_quaternion(r)
    return rotation_matrix_to_axis_angle(r)
