"""Binary segmentation primitives: color-band thresholding, morphology,
Canny edges, connected components, and shape descriptors."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import ImageFormatError, SegmentationError
from .image import ColorSpace, ColorTriple, RasterImage, image_to_hsv_planes


@dataclass(eq=False)
class BinaryMask:
    """A boolean pixel grid tied to the dimensions of the image it came from."""

    bits: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.bits)
        if a.ndim != 2:
            raise ImageFormatError(f"mask must be 2-D, got shape {a.shape}")
        self.bits = a.astype(bool)

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    def count(self) -> int:
        return int(self.bits.sum())

    def to_gray_image(self) -> RasterImage:
        """Render as a 0/255 grayscale image (debug export)."""
        return RasterImage((self.bits.astype(np.uint8)) * 255)


@dataclass(frozen=True)
class ThresholdBand:
    """Inclusive per-channel color bounds defining a segmentation rule.

    Both bounds must live in the same color space and satisfy lower <= upper
    per channel. Bounds are inclusive on both ends so a band whose lower and
    upper coincide still selects exactly that color.
    """

    lower: ColorTriple
    upper: ColorTriple

    def __post_init__(self):
        if self.lower.space is not self.upper.space:
            raise SegmentationError("band bounds must share a color space")
        for lo, hi in zip(self.lower.as_tuple(), self.upper.as_tuple()):
            if lo > hi:
                raise SegmentationError(f"band lower bound {lo} exceeds upper bound {hi}")

    @property
    def space(self) -> ColorSpace:
        return self.lower.space

    def contains(self, pixel: ColorTriple) -> bool:
        """The per-pixel rule band_threshold applies: inside iff every
        channel sits within [lower, upper]."""
        if pixel.space is not self.space:
            raise SegmentationError(f"pixel space {pixel.space} does not match band {self.space}")
        return all(
            lo <= v <= hi
            for lo, v, hi in zip(self.lower.as_tuple(), pixel.as_tuple(), self.upper.as_tuple())
        )


@dataclass
class Region:
    """One connected component of a mask.

    ``pixels`` is an (N, 2) int array of (x, y) positions in row-major scan
    order. ``bbox`` is the inclusive (min_x, min_y, max_x, max_y). The
    perimeter is the outer-contour arc length from Moore boundary tracing
    (diagonal steps count sqrt(2)); a single pixel has perimeter 0.
    """

    label: int
    pixels: np.ndarray
    bbox: tuple[int, int, int, int]
    area: int
    perimeter: float
    centroid: tuple[float, float] = field(init=False)

    def __post_init__(self):
        xs = self.pixels[:, 0].astype(np.float64)
        ys = self.pixels[:, 1].astype(np.float64)
        self.centroid = (float(xs.mean()), float(ys.mean()))

    @property
    def bbox_width(self) -> int:
        return self.bbox[2] - self.bbox[0] + 1

    @property
    def bbox_height(self) -> int:
        return self.bbox[3] - self.bbox[1] + 1


def band_threshold(image: RasterImage, band: ThresholdBand) -> BinaryMask:
    """Mark pixels whose color falls inside ``band`` (inclusive bounds).

    HSV bands convert the image to quantized HSV planes first; RGB bands
    compare raw channels.
    """
    if not image.is_rgb():
        raise ImageFormatError("band_threshold expects an RGB image")
    planes = image_to_hsv_planes(image) if band.space is ColorSpace.HSV else image.pixels
    lo = np.array(band.lower.quantized(), dtype=np.int16)
    hi = np.array(band.upper.quantized(), dtype=np.int16)
    p = planes.astype(np.int16)
    inside = np.all((p >= lo) & (p <= hi), axis=2)
    return BinaryMask(inside)


# ---------------------------------------------------------------------------
# Morphology
# ---------------------------------------------------------------------------

def _disc_element(radius: int) -> np.ndarray:
    r = int(radius)
    yy, xx = np.mgrid[-r : r + 1, -r : r + 1]
    return (xx * xx + yy * yy) <= r * r


def morph_open(mask: BinaryMask, radius: int) -> BinaryMask:
    """Erosion then dilation with a disc element (removes small speckles)."""
    if radius < 1:
        raise SegmentationError("morphology radius must be >= 1")
    se = _disc_element(radius)
    padded = np.pad(mask.bits, radius)
    opened = ndimage.binary_dilation(ndimage.binary_erosion(padded, se), se)
    return BinaryMask(opened[radius:-radius, radius:-radius])


def morph_close(mask: BinaryMask, radius: int) -> BinaryMask:
    """Dilation then erosion with a disc element (fills small holes).

    The mask is padded before the pass so behavior matches morphology on an
    infinite black background and close(M) always contains M.
    """
    if radius < 1:
        raise SegmentationError("morphology radius must be >= 1")
    se = _disc_element(radius)
    pad = 2 * radius
    padded = np.pad(mask.bits, pad)
    closed = ndimage.binary_erosion(ndimage.binary_dilation(padded, se), se)
    return BinaryMask(closed[pad:-pad, pad:-pad])


# ---------------------------------------------------------------------------
# Canny edges
# ---------------------------------------------------------------------------

def canny_edges(image: RasterImage, low: float, high: float, sigma: float = 0.0) -> BinaryMask:
    """Canny chain: Sobel gradient, non-maximum suppression, hysteresis.

    ``low``/``high`` are on the intensity scale (0..255): gradient magnitude
    is Sobel output normalized so a hard 0->255 step scores 255. ``sigma``
    optionally pre-smooths (default off; the Sobel kernel already smooths
    across the edge).
    """
    if image.is_rgb():
        raise ImageFormatError("canny_edges expects a grayscale image")
    if not (0 <= low <= high <= 255):
        raise SegmentationError(f"need 0 <= low <= high <= 255, got ({low}, {high})")
    f = image.pixels.astype(np.float64)
    if sigma > 0:
        f = ndimage.gaussian_filter(f, sigma)
    gx = ndimage.sobel(f, axis=1) / 4.0
    gy = ndimage.sobel(f, axis=0) / 4.0
    mag = np.hypot(gx, gy)
    if mag.max() == 0:
        return BinaryMask(np.zeros_like(mag, dtype=bool))

    # suppress non-maxima against bilinearly interpolated magnitudes one
    # step along +/- the gradient direction; strict on one side so plateau
    # ties thin to single-pixel curves
    h, w = mag.shape
    norm = np.where(mag == 0, 1.0, mag)
    ux, uy = gx / norm, gy / norm
    padded = np.pad(mag, 1)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)

    def sample(px: np.ndarray, py: np.ndarray) -> np.ndarray:
        px = np.clip(px + 1.0, 0.0, float(w))
        py = np.clip(py + 1.0, 0.0, float(h))
        x0 = np.floor(px).astype(np.int64)
        y0 = np.floor(py).astype(np.int64)
        x1 = np.minimum(x0 + 1, w + 1)
        y1 = np.minimum(y0 + 1, h + 1)
        fx, fy = px - x0, py - y0
        return (
            padded[y0, x0] * (1 - fx) * (1 - fy)
            + padded[y0, x1] * fx * (1 - fy)
            + padded[y1, x0] * (1 - fx) * fy
            + padded[y1, x1] * fx * fy
        )

    ahead = sample(xx + ux, yy + uy)
    behind = sample(xx - ux, yy - uy)
    nms = (mag > ahead) & (mag >= behind) & (mag > 0)

    strong = nms & (mag >= high)
    weak = nms & (mag >= low)
    labels, n = ndimage.label(weak, structure=np.ones((3, 3), dtype=bool))
    if n == 0:
        return BinaryMask(np.zeros_like(weak))
    keep_labels = np.unique(labels[strong])
    keep_labels = keep_labels[keep_labels > 0]
    lut = np.zeros(n + 1, dtype=bool)
    lut[keep_labels] = True
    return BinaryMask(lut[labels])


# ---------------------------------------------------------------------------
# Connected components and shape features
# ---------------------------------------------------------------------------

_MOORE_OFFSETS = [(0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1)]
_STEP_LENGTH = [1.0, math.sqrt(2.0), 1.0, math.sqrt(2.0), 1.0, math.sqrt(2.0), 1.0, math.sqrt(2.0)]


def _trace_perimeter(local: np.ndarray) -> float:
    """Arc length of the outer contour via Moore boundary tracing.

    ``local`` must contain a single 8-connected component with a one-pixel
    false border. Termination uses Jacob's criterion (re-entering the start
    pixel through the same first move).
    """
    ys, xs = np.nonzero(local)
    if len(ys) == 1:
        return 0.0
    order = np.lexsort((xs, ys))
    start = (int(ys[order[0]]), int(xs[order[0]]))

    perimeter = 0.0
    cur = start
    backtrack = 0  # W neighbor of the topmost-leftmost pixel is background
    first_move: tuple[tuple[int, int], int] | None = None
    limit = 4 * len(ys) + 8
    for _ in range(limit):
        for k in range(8):
            idx = (backtrack + k) % 8
            dy, dx = _MOORE_OFFSETS[idx]
            ny, nx = cur[0] + dy, cur[1] + dx
            if local[ny, nx]:
                move = (cur, idx)
                if first_move is None:
                    first_move = move
                elif move == first_move:
                    return perimeter
                perimeter += _STEP_LENGTH[idx]
                cur = (ny, nx)
                backtrack = (idx + 5) % 8
                break
        else:  # isolated pixel reached (cannot happen past the first step)
            return perimeter
    return perimeter


def connected_components(mask: BinaryMask, connectivity: int = 8) -> list[Region]:
    """Label the mask's foreground into regions (labels contiguous from 1)."""
    if connectivity not in (4, 8):
        raise SegmentationError(f"connectivity must be 4 or 8, got {connectivity}")
    structure = (
        np.ones((3, 3), dtype=bool)
        if connectivity == 8
        else np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
    )
    labels, n = ndimage.label(mask.bits, structure=structure)
    regions: list[Region] = []
    for label, sl in enumerate(ndimage.find_objects(labels), start=1):
        sub = labels[sl] == label
        ys, xs = np.nonzero(sub)
        y0, x0 = sl[0].start, sl[1].start
        pixels = np.column_stack([xs + x0, ys + y0]).astype(np.int64)
        bbox = (int(xs.min()) + x0, int(ys.min()) + y0, int(xs.max()) + x0, int(ys.max()) + y0)
        perimeter = _trace_perimeter(np.pad(sub, 1))
        regions.append(Region(label=label, pixels=pixels, bbox=bbox, area=len(ys), perimeter=perimeter))
    return regions


def shape_features(region: Region) -> dict[str, float]:
    """Aspect ratio (bbox width over height) and circularity (4*pi*A/P^2)."""
    if region.area < 1:
        raise SegmentationError("empty region has no shape features")
    if region.bbox_height == 0:
        raise SegmentationError("undefined aspect ratio: zero-height bounding box")
    if region.perimeter == 0:
        raise SegmentationError("undefined circularity: zero perimeter")
    return {
        "aspect_ratio": region.bbox_width / region.bbox_height,
        "circularity": 4.0 * math.pi * region.area / (region.perimeter**2),
    }
