"""Solvers, synthetic scenes, image I/O, benchmark and the command line."""

from .attack import AttackConfig, AttackResult, MatchReport, attack, evaluate_matches
from .bench import bench_sobel, read_csv, time_sobel
from .depth import DepthResult, depth_schedule, solve_depth
from .image_io import ImageIOError, load_image, save_image
from .manifest import RunManifest, build_id
from .pyramid import NumericError, PyramidSchedule, build_pyramid, pyr_down
from .register import RegistrationResult, register
from .synth import blob_noise, corner_error, plane_scene, synth_scene, textured_homography_pair, value_noise

__all__ = [
    "AttackConfig",
    "AttackResult",
    "DepthResult",
    "ImageIOError",
    "MatchReport",
    "NumericError",
    "PyramidSchedule",
    "RegistrationResult",
    "RunManifest",
    "attack",
    "bench_sobel",
    "blob_noise",
    "build_id",
    "build_pyramid",
    "corner_error",
    "depth_schedule",
    "evaluate_matches",
    "load_image",
    "plane_scene",
    "pyr_down",
    "read_csv",
    "register",
    "save_image",
    "solve_depth",
    "synth_scene",
    "textured_homography_pair",
    "time_sobel",
    "value_noise",
]
