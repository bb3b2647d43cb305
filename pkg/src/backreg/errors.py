"""Exception hierarchy shared across the toolkit."""


class BackregError(Exception):
    """Base class for all toolkit errors."""


class ImageFormatError(BackregError):
    """Raised for malformed raster data or unsupported pixel formats."""


class SegmentationError(BackregError):
    """Raised when a segmentation primitive cannot produce a valid result."""


class DetectionError(BackregError):
    """Landmark detection failed at a named pipeline stage."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


class DegenerateLandmarksError(BackregError):
    """Landmark geometry is too degenerate to estimate a transform."""


class StoreError(BackregError):
    """Manifest or exam-store inconsistency (bad schema, missing files)."""
