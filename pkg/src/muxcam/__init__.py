"""Spatial-multiplexing camera toolkit.

Simulation, design-space analysis and reconstruction for cameras that
sense coded linear combinations of a scene through a DMD: single-pixel
devices and their line-sensor generalization.  The package covers the
full desk-scale experiment loop: pattern schedules, forward simulation
with noise and burst timing, mean-tracking demodulation, pseudoinverse
and TV-constrained recovery of images and video, and metric reports.
"""

from .codes import PatternSchedule, build_schedule, demean, full_frame_patterns, hadamard
from .metrics import ExperimentRecord, ExperimentReport, rsnr, under_sampling
from .optics import (
    CameraConfig,
    CylindricalDesign,
    OpticalDesign,
    burst_rate,
    design_cylindrical,
    measurement_rate,
    min_pixels,
    rate_curve,
    relay_magnification,
)
from .recovery import (
    RecoveredImage,
    RecoveredVideo,
    RecoveryParams,
    median3,
    noise_epsilon,
    recover_pinv,
    recover_tv2d,
    recover_tv2d_spc,
    recover_tv3d,
    spatial_gradients,
    spatial_gradients_adjoint,
    tv_isotropic,
    tv_spatiotemporal,
    video_gradients,
    video_gradients_adjoint,
)
from .simulator import (
    MeasurementBlock,
    MeasurementSet,
    SceneVideo,
    group_frames,
    measurement_times,
    simulate_lisens,
    simulate_spc,
)

__version__ = "0.1.0"

__all__ = [
    "PatternSchedule",
    "hadamard",
    "build_schedule",
    "demean",
    "full_frame_patterns",
    "CameraConfig",
    "OpticalDesign",
    "CylindricalDesign",
    "measurement_rate",
    "min_pixels",
    "burst_rate",
    "design_cylindrical",
    "relay_magnification",
    "rate_curve",
    "SceneVideo",
    "MeasurementSet",
    "MeasurementBlock",
    "measurement_times",
    "simulate_lisens",
    "simulate_spc",
    "group_frames",
    "RecoveryParams",
    "RecoveredImage",
    "RecoveredVideo",
    "spatial_gradients",
    "spatial_gradients_adjoint",
    "video_gradients",
    "video_gradients_adjoint",
    "tv_isotropic",
    "tv_spatiotemporal",
    "noise_epsilon",
    "recover_pinv",
    "recover_tv2d",
    "recover_tv2d_spc",
    "recover_tv3d",
    "median3",
    "under_sampling",
    "rsnr",
    "ExperimentRecord",
    "ExperimentReport",
    "__version__",
]
