"""Landmark detection in back-topography image pairs and labeled radiographs.

An RGB diagnosis carries two renderings of the same acquisition: the clean
back photo with the highlighted spine curve (the one physicians view), and
a companion annotated rendering that additionally shows marker discs on the
two PSIS points, a vertical reference line, and printed measurements. The
spine curve, C7 and IC come straight out of the clean photo by HSV band
thresholding; the PSIS positions are segmented in the companion image and
carried over through a scale-and-shift alignment of the two images' content
boxes. Radiographs are labeled manually with pure-red discs, so all four
landmarks come from one exact RGB threshold.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DetectionError
from .image import ColorSpace, ColorTriple, PixelCoord, RasterImage, extract_channel
from .registration import RigidTransform
from .segmentation import ThresholdBand, band_threshold, connected_components

# Production threshold bands. The clean back photo and the annotated
# companion are thresholded in HSV (hue on the 0..180 scale); radiograph
# marker discs are painted pure red, so their band is an exact RGB match.
SFSL_SPINE_BAND = ThresholdBand(
    ColorTriple(12, 130, 195, ColorSpace.HSV), ColorTriple(180, 255, 230, ColorSpace.HSV)
)
FD_LINE_BAND = ThresholdBand(
    ColorTriple(97, 141, 225, ColorSpace.HSV), ColorTriple(97, 141, 225, ColorSpace.HSV)
)
XRAY_MARKER_BAND = ThresholdBand(
    ColorTriple(255, 0, 0, ColorSpace.RGB), ColorTriple(255, 0, 0, ColorSpace.RGB)
)
# The PSIS marker color is configurable: the companion image's marker hue is
# system-blue but not documented anywhere, unlike the bands above.
DEFAULT_FD_PSIS_BAND = ThresholdBand(
    ColorTriple(105, 120, 120, ColorSpace.HSV), ColorTriple(135, 255, 255, ColorSpace.HSV)
)

XRAY_MIN_AREA_FRACTION = 0.2  # marker components below this share of the largest are noise


def _round_px(v: float) -> float:
    return float(math.floor(v + 0.5))


class RoiBox(NamedTuple):
    """Inclusive bounding box of an image's non-background content."""

    min_x: int
    min_y: int
    max_x: int
    max_y: int

    @property
    def span_x(self) -> int:
        return self.max_x - self.min_x

    @property
    def span_y(self) -> int:
        return self.max_y - self.min_y

    def is_degenerate(self) -> bool:
        return self.max_x <= self.min_x or self.max_y <= self.min_y


@dataclass
class LandmarkSet:
    """The five landmarks of one diagnosis, in one image's pixel frame.

    ``spine`` is ordered by row then column and may be empty (radiograph
    sets have no traced curve). In an upright frame the left PSIS is left
    of the right one and C7 sits above IC; detectors enforce this through
    :meth:`validate`. Construction itself stays permissive because labels
    are anatomical: a set carried through a large rotation keeps its role
    assignment even where the x-order flips.
    """

    c7: PixelCoord
    psis_left: PixelCoord
    psis_right: PixelCoord
    ic: PixelCoord
    spine: list[PixelCoord] = field(default_factory=list)
    frame: str = ""

    def validate(self) -> "LandmarkSet":
        """Check the upright-frame invariants; returns self for chaining."""
        if not self.psis_left.x < self.psis_right.x:
            raise ValueError(
                f"left PSIS (x={self.psis_left.x}) must be left of right PSIS (x={self.psis_right.x})"
            )
        if not self.c7.y < self.ic.y:
            raise ValueError(f"C7 (y={self.c7.y}) must be above IC (y={self.ic.y})")
        return self

    def check_bounds(self, width: int, height: int) -> None:
        for name, p in self.named_points():
            if not (0 <= p.x < width and 0 <= p.y < height):
                raise ValueError(f"{name} at ({p.x}, {p.y}) is outside {width}x{height}")
        for p in self.spine:
            if not (0 <= p.x < width and 0 <= p.y < height):
                raise ValueError(f"spine point ({p.x}, {p.y}) is outside {width}x{height}")

    def named_points(self) -> list[tuple[str, PixelCoord]]:
        return [
            ("c7", self.c7),
            ("psis_left", self.psis_left),
            ("psis_right", self.psis_right),
            ("ic", self.ic),
        ]

    def to_json(self) -> dict:
        def num(v: float):
            return int(v) if float(v).is_integer() else float(v)

        def pt(p: PixelCoord):
            return [num(p.x), num(p.y)]

        return {
            "frame": self.frame,
            "c7": pt(self.c7),
            "psis_left": pt(self.psis_left),
            "psis_right": pt(self.psis_right),
            "ic": pt(self.ic),
            "spine": [pt(p) for p in self.spine],
        }

    @classmethod
    def from_json(cls, d: dict) -> "LandmarkSet":
        def pt(v) -> PixelCoord:
            return PixelCoord(float(v[0]), float(v[1]))

        return cls(
            c7=pt(d["c7"]),
            psis_left=pt(d["psis_left"]),
            psis_right=pt(d["psis_right"]),
            ic=pt(d["ic"]),
            spine=[pt(p) for p in d.get("spine", [])],
            frame=str(d.get("frame", "")),
        )


# ---------------------------------------------------------------------------
# Stage operations
# ---------------------------------------------------------------------------

def detect_spine_curve(
    sfsl: RasterImage, band: ThresholdBand = SFSL_SPINE_BAND
) -> list[PixelCoord]:
    """All pixels of the highlighted spine trace, ordered by row then column."""
    mask = band_threshold(sfsl, band)
    ys, xs = np.nonzero(mask.bits)
    if len(xs) == 0:
        raise DetectionError("spine", "no pixels matched the spine color band")
    return [PixelCoord(float(x), float(y)) for y, x in zip(ys.tolist(), xs.tolist())]


def extract_c7_ic(spine: list[PixelCoord]) -> tuple[PixelCoord, PixelCoord]:
    """Topmost and bottommost spine points (ties break to the smaller column)."""
    if not spine:
        raise ValueError("empty spine point list")
    c7 = min(spine, key=lambda p: (p.y, p.x))
    ic = min(spine, key=lambda p: (-p.y, p.x))
    return c7, ic


def remove_vertical_line(fd: RasterImage, band: ThresholdBand = FD_LINE_BAND) -> RasterImage:
    """Blank out the vertical reference line (exact color match to black)."""
    mask = band_threshold(fd, band)
    out = fd.pixels.copy()
    out[mask.bits] = 0
    return RasterImage(out)


def remove_red_script(fd_no_line: RasterImage) -> RasterImage:
    """Blue channel of the annotated image; red printed text drops to black."""
    return extract_channel(fd_no_line, 2)


def extract_roi(image: RasterImage) -> RoiBox:
    """Tight bounding box of non-background (any channel nonzero) content."""
    nonzero = image.pixels.any(axis=2) if image.is_rgb() else image.pixels > 0
    ys, xs = np.nonzero(nonzero)
    if len(xs) == 0:
        raise ValueError("cannot take the content box of an all-zero image")
    return RoiBox(int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max()))


def detect_fd_psis(
    fd: RasterImage, band: ThresholdBand = DEFAULT_FD_PSIS_BAND
) -> tuple[PixelCoord, PixelCoord]:
    """Centroids of the two largest marker-colored components, left then right."""
    mask = band_threshold(fd, band)
    regions = connected_components(mask, connectivity=8)
    if len(regions) < 2:
        raise DetectionError(
            "fd-psis", f"found {len(regions)} PSIS marker candidate(s), need at least 2"
        )
    best = sorted(regions, key=lambda r: r.area, reverse=True)[:2]
    pts = sorted(
        (PixelCoord(_round_px(r.centroid[0]), _round_px(r.centroid[1])) for r in best),
        key=lambda p: p.x,
    )
    if pts[0].x == pts[1].x:
        raise DetectionError("fd-psis", "marker centroids share a column; cannot order left/right")
    return pts[0], pts[1]


def register_fd_to_sfsl(fd_roi: RoiBox, sfsl_roi: RoiBox) -> RigidTransform:
    """Rotation-free transform scaling the one content box onto the other.

    Uniform scale is the ratio of box heights; the translation aligns the
    top-left corners after scaling.
    """
    if fd_roi.is_degenerate() or sfsl_roi.is_degenerate():
        raise ValueError(f"degenerate content box: fd={fd_roi}, sfsl={sfsl_roi}")
    scale = sfsl_roi.span_y / fd_roi.span_y
    return RigidTransform(
        scale,
        0.0,
        pivot=PixelCoord(float(fd_roi.min_x), float(fd_roi.min_y)),
        anchor=PixelCoord(float(sfsl_roi.min_x), float(sfsl_roi.min_y)),
    )


# ---------------------------------------------------------------------------
# Full detectors
# ---------------------------------------------------------------------------

def detect_sfsl_landmarks(
    sfsl: RasterImage,
    fd: RasterImage,
    frame: str = "sfsl",
    spine_band: ThresholdBand = SFSL_SPINE_BAND,
    line_band: ThresholdBand = FD_LINE_BAND,
    psis_band: ThresholdBand = DEFAULT_FD_PSIS_BAND,
    debug: dict | None = None,
) -> LandmarkSet:
    """Detect all landmarks of an RGB diagnosis, in the clean photo's frame.

    Stages: spine thresholding (spine, C7, IC), marker segmentation in the
    companion image (PSIS), content-box alignment, and PSIS transfer. Each
    stage failure raises DetectionError labeled with the stage name. When a
    ``debug`` dict is passed, intermediate masks/images are stored into it.
    """
    spine = detect_spine_curve(sfsl, spine_band)
    c7, ic = extract_c7_ic(spine)
    if debug is not None:
        debug["spine_mask"] = band_threshold(sfsl, spine_band)

    fd_clean = remove_vertical_line(fd, line_band)
    if debug is not None:
        debug["fd_no_line"] = fd_clean
    psis_fd_left, psis_fd_right = detect_fd_psis(fd_clean, psis_band)
    if debug is not None:
        debug["fd_psis_mask"] = band_threshold(fd_clean, psis_band)

    fd_gray = remove_red_script(fd_clean)
    try:
        fd_roi = extract_roi(fd_gray)
    except ValueError as exc:
        raise DetectionError("fd-roi", str(exc)) from exc
    try:
        sfsl_roi = extract_roi(sfsl)
    except ValueError as exc:
        raise DetectionError("sfsl-roi", str(exc)) from exc
    try:
        transfer = register_fd_to_sfsl(fd_roi, sfsl_roi)
    except ValueError as exc:
        raise DetectionError("fd-transfer", str(exc)) from exc
    if debug is not None:
        debug["fd_roi"] = fd_roi
        debug["sfsl_roi"] = sfsl_roi
        debug["fd_to_sfsl"] = transfer

    def transfer_point(p: PixelCoord) -> PixelCoord:
        x, y = transfer.apply_xy(p.x, p.y)
        x = min(max(_round_px(x), 0.0), float(sfsl.width - 1))
        y = min(max(_round_px(y), 0.0), float(sfsl.height - 1))
        return PixelCoord(x, y)

    try:
        result = LandmarkSet(
            c7=c7,
            psis_left=transfer_point(psis_fd_left),
            psis_right=transfer_point(psis_fd_right),
            ic=ic,
            spine=spine,
            frame=frame,
        ).validate()
        result.check_bounds(sfsl.width, sfsl.height)
    except ValueError as exc:
        raise DetectionError("landmarks", str(exc)) from exc
    return result


def detect_xray_landmarks(
    xray: RasterImage,
    frame: str = "xray",
    band: ThresholdBand = XRAY_MARKER_BAND,
    min_area_fraction: float = XRAY_MIN_AREA_FRACTION,
) -> LandmarkSet:
    """Detect the four red marker discs of a labeled radiograph.

    After discarding components smaller than ``min_area_fraction`` of the
    largest, exactly four must remain; roles follow the vertical layout
    (topmost C7, bottommost IC, middle pair PSIS ordered by column).
    """
    mask = band_threshold(xray, band)
    regions = connected_components(mask, connectivity=8)
    if not regions:
        raise DetectionError("xray-markers", "no pixels matched the marker color")
    largest = max(r.area for r in regions)
    kept = [r for r in regions if r.area >= min_area_fraction * largest]
    if len(kept) != 4:
        raise DetectionError(
            "xray-markers", f"expected 4 marker discs after area filtering, found {len(kept)}"
        )
    pts = sorted(
        (PixelCoord(_round_px(r.centroid[0]), _round_px(r.centroid[1])) for r in kept),
        key=lambda p: p.y,
    )
    middle = sorted(pts[1:3], key=lambda p: p.x)
    try:
        result = LandmarkSet(
            c7=pts[0], psis_left=middle[0], psis_right=middle[1], ic=pts[3], spine=[], frame=frame
        ).validate()
        result.check_bounds(xray.width, xray.height)
    except ValueError as exc:
        raise DetectionError("xray-markers", str(exc)) from exc
    return result
