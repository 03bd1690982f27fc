"""Rigid-body transforms as (..., 4, 4) homogeneous matrices."""

from __future__ import annotations

import numpy as np

from ..autodiff import Tensor, cat
from ..autodiff.tensor import ShapeError, as_tensor

RIGID_TOL = 1e-6


def check_rigid(T, tol: float = RIGID_TOL) -> None:
    """Raise ``ValueError`` unless ``T`` is a proper rigid transform."""
    d = T.data if isinstance(T, Tensor) else np.asarray(T)
    if d.shape[-2:] != (4, 4):
        raise ShapeError(f"pose must end in 4x4, got {d.shape}")
    R = d[..., :3, :3]
    eye = np.eye(3)
    if np.abs(np.swapaxes(R, -1, -2) @ R - eye).max() > tol or np.abs(np.linalg.det(R) - 1.0).max() > tol:
        raise ValueError("pose rotation block is not orthonormal with det +1")
    if np.abs(d[..., 3, :] - np.array([0.0, 0.0, 0.0, 1.0])).max() > tol:
        raise ValueError("pose bottom row must be [0, 0, 0, 1]")


def make_pose(R, t) -> Tensor:
    """Stack a rotation (..., 3, 3) and translation (..., 3) into (..., 4, 4)."""
    R, t = as_tensor(R), as_tensor(t)
    top = cat([R, t[..., None]], axis=-1)
    bottom = np.zeros(top.shape[:-2] + (1, 4), dtype=top.dtype)
    bottom[..., 0, 3] = 1.0
    return cat([top, Tensor(bottom)], axis=-2)


def compose_transformations(a, b) -> Tensor:
    """``a @ b``: apply ``b`` first, then ``a``."""
    return as_tensor(a) @ as_tensor(b)


def inverse_transformation(T, check: bool = True) -> Tensor:
    """Closed form ``[R^T, -R^T t]``."""
    T = as_tensor(T)
    if check:
        check_rigid(T)
    R = T[..., :3, :3]
    t = T[..., :3, 3:4]
    Rt = R.transpose(-1, -2)
    return make_pose(Rt, (-(Rt @ t))[..., 0])


def relative_transformation(a, b, check: bool = True) -> Tensor:
    """Transform taking frame ``a`` coordinates to frame ``b``: ``b @ inv(a)``."""
    return compose_transformations(b, inverse_transformation(a, check))


def transform_points(T, pts) -> Tensor:
    """Apply (..., 4, 4) to points (..., M, 3)."""
    T, pts = as_tensor(T), as_tensor(pts)
    R = T[..., :3, :3]
    t = T[..., None, :3, 3]
    return pts @ R.transpose(-1, -2) + t


pose_compose = compose_transformations
pose_inverse = inverse_transformation
relative_pose = relative_transformation
