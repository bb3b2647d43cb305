"""Landmark-based rigid registration and follow-up blending of scoliosis
back-topography and radiograph diagnoses."""

from .errors import (
    BackregError,
    DegenerateLandmarksError,
    DetectionError,
    ImageFormatError,
    SegmentationError,
    StoreError,
)
from .image import ColorSpace, ColorTriple, PixelCoord, PixelFormat, RasterImage
from .landmarks import LandmarkSet, RoiBox
from .registration import (
    AngleDecomposition,
    RegistrationReport,
    RigidTransform,
    estimate_rigid,
    estimate_similarity_lsq,
)
from .segmentation import BinaryMask, Region, ThresholdBand

__version__ = "0.1.0"

__all__ = [
    "AngleDecomposition",
    "BackregError",
    "BinaryMask",
    "ColorSpace",
    "ColorTriple",
    "DegenerateLandmarksError",
    "DetectionError",
    "ImageFormatError",
    "LandmarkSet",
    "PixelCoord",
    "PixelFormat",
    "RasterImage",
    "Region",
    "RegistrationReport",
    "RigidTransform",
    "RoiBox",
    "SegmentationError",
    "StoreError",
    "ThresholdBand",
    "estimate_rigid",
    "estimate_similarity_lsq",
    "__version__",
]
