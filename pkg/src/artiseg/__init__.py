"""Articulated-object joint estimation and segmentation from depth sequences."""

from .core_model import (
    JointModel,
    MotionSequence,
    RigidTransform,
    axis_point_from_circle,
    prismatic_transform,
    revolute_transform,
    rodrigues,
)
from .errors import (
    ArtisegError,
    DegenerateGeometryError,
    EmptySegmentationError,
    FitFailureError,
    GenerationError,
    InputFormatError,
    InvalidParameterError,
)
from .pipeline import PipelineConfig, run_estimation

__version__ = "0.1.0"

__all__ = [
    "ArtisegError",
    "DegenerateGeometryError",
    "EmptySegmentationError",
    "FitFailureError",
    "GenerationError",
    "InputFormatError",
    "InvalidParameterError",
    "JointModel",
    "MotionSequence",
    "PipelineConfig",
    "RigidTransform",
    "axis_point_from_circle",
    "prismatic_transform",
    "revolute_transform",
    "rodrigues",
    "run_estimation",
]
