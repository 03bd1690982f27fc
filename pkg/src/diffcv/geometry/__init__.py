"""Differentiable 2-D/3-D geometry."""

from .camera import PinholeCamera, camera_project, camera_unproject, intrinsics, project_points, unproject_points
from .conversions import (
    angle_convert,
    axis_angle_to_quaternion,
    axis_angle_to_rotation_matrix,
    deg2rad,
    denormalize_pixel_coordinates,
    from_homogeneous,
    homogeneous_convert,
    normalize_pixel_coordinates,
    quaternion_to_axis_angle,
    quaternion_to_rotation_matrix,
    rad2deg,
    rotation_convert,
    rotation_matrix_to_axis_angle,
    rotation_matrix_to_quaternion,
    to_homogeneous,
)
from .linalg import (
    check_rigid,
    compose_transformations,
    inverse_transformation,
    make_pose,
    pose_compose,
    pose_inverse,
    relative_pose,
    relative_transformation,
    transform_points,
)
from .transforms import affine_matrix, affine_to_normalized_homography, warp_affine
from .warp import depth_warp, homography_warp, transform_points_homography
