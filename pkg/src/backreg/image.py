"""Raster image core: pixel containers, color conversion, resampling, PNG I/O.

Images are 8-bit, row-major numpy arrays: ``(H, W, 3)`` for RGB, ``(H, W)``
for grayscale. The coordinate frame is the raster convention: x grows
rightward (columns), y grows downward (rows), origin at the top-left pixel.
Hue lives on a 0..180 scale (degrees halved) so 8-bit HSV thresholds can be
expressed directly.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, TYPE_CHECKING

import numpy as np
from PIL import Image as PILImage

from .errors import ImageFormatError

if TYPE_CHECKING:
    from .registration import RigidTransform

BACKGROUND = (0, 0, 0)  # canonical background is black


class PixelFormat(enum.Enum):
    RGB8 = "rgb8"
    GRAY8 = "gray8"


class ColorSpace(enum.Enum):
    RGB = "rgb"
    HSV = "hsv"


class PixelCoord(NamedTuple):
    """A pixel position (column x, row y). Fractional values are allowed;
    detector outputs are whole-valued."""

    x: float
    y: float


@dataclass(frozen=True)
class ColorTriple:
    """Three channel values on the 8-bit scale plus the space they live in.

    Channels are kept as floats so color-space conversions stay exact;
    quantization to integers happens only when pixels are written into an
    image plane. In HSV space c0 is hue in [0, 180], c1/c2 in [0, 255].
    """

    c0: float
    c1: float
    c2: float
    space: ColorSpace = ColorSpace.RGB

    def __post_init__(self):
        hi0 = 180.0 if self.space is ColorSpace.HSV else 255.0
        if not (0 <= self.c0 <= hi0 and 0 <= self.c1 <= 255 and 0 <= self.c2 <= 255):
            raise ImageFormatError(f"channel values out of range for {self.space}: {self}")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.c0, self.c1, self.c2)

    def quantized(self) -> tuple[int, int, int]:
        """Channels rounded to integers (ties round up), as stored in planes."""
        return (_q(self.c0), _q(self.c1), _q(self.c2))


def _q(x: float) -> int:
    # half-up rounding, used for every float -> 8-bit quantization
    return int(np.floor(x + 0.5))


@dataclass(eq=False)
class RasterImage:
    """An 8-bit raster image backed by a numpy array.

    ``pixels`` is ``(H, W, 3)`` uint8 for RGB8 or ``(H, W)`` uint8 for GRAY8.
    """

    pixels: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.pixels)
        if a.dtype != np.uint8:
            raise ImageFormatError(f"expected uint8 pixels, got {a.dtype}")
        if a.ndim == 3 and a.shape[2] == 3:
            pass
        elif a.ndim == 2:
            pass
        else:
            raise ImageFormatError(f"expected (H,W,3) or (H,W) array, got shape {a.shape}")
        if a.shape[0] < 1 or a.shape[1] < 1:
            raise ImageFormatError("image must be at least 1x1")
        self.pixels = np.ascontiguousarray(a)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def format(self) -> PixelFormat:
        return PixelFormat.RGB8 if self.pixels.ndim == 3 else PixelFormat.GRAY8

    @property
    def channel_count(self) -> int:
        return 3 if self.pixels.ndim == 3 else 1

    def is_rgb(self) -> bool:
        return self.pixels.ndim == 3

    def copy(self) -> "RasterImage":
        return RasterImage(self.pixels.copy())

    @classmethod
    def blank_rgb(cls, width: int, height: int, color=BACKGROUND) -> "RasterImage":
        a = np.zeros((height, width, 3), dtype=np.uint8)
        a[:, :] = color
        return cls(a)

    @classmethod
    def blank_gray(cls, width: int, height: int, value: int = 0) -> "RasterImage":
        return cls(np.full((height, width), value, dtype=np.uint8))


# ---------------------------------------------------------------------------
# Color conversion
# ---------------------------------------------------------------------------

def rgb_to_hsv(pixel: ColorTriple) -> ColorTriple:
    """Convert one RGB triple to HSV via the hexcone model.

    Hue is returned on the halved-degree scale [0, 180], saturation and
    value on [0, 255]. The arithmetic is exact (float); callers that need
    8-bit values quantize with :meth:`ColorTriple.quantized`.
    """
    if pixel.space is not ColorSpace.RGB:
        raise ImageFormatError("rgb_to_hsv expects an RGB triple")
    r, g, b = pixel.as_tuple()
    v = max(r, g, b)
    c = v - min(r, g, b)
    if c == 0:
        h_deg = 0.0
    elif v == r:
        h_deg = 60.0 * (((g - b) / c) % 6.0)
    elif v == g:
        h_deg = 60.0 * ((b - r) / c + 2.0)
    else:
        h_deg = 60.0 * ((r - g) / c + 4.0)
    s = 0.0 if v == 0 else 255.0 * c / v
    return ColorTriple(h_deg / 2.0, s, v, ColorSpace.HSV)


def hsv_to_rgb(pixel: ColorTriple) -> ColorTriple:
    """Inverse hexcone conversion; accepts hue in [0, 180]."""
    if pixel.space is not ColorSpace.HSV:
        raise ImageFormatError("hsv_to_rgb expects an HSV triple")
    h, s, v = pixel.as_tuple()
    h_deg = 2.0 * h
    c = v * s / 255.0
    x = c * (1.0 - abs((h_deg / 60.0) % 2.0 - 1.0))
    m = v - c
    sector = int(h_deg // 60.0) % 6
    rgb = [(c, x, 0.0), (x, c, 0.0), (0.0, c, x), (0.0, x, c), (x, 0.0, c), (c, 0.0, x)][sector]
    return ColorTriple(rgb[0] + m, rgb[1] + m, rgb[2] + m, ColorSpace.RGB)


def image_to_hsv_planes(image: RasterImage) -> np.ndarray:
    """Convert an RGB image to quantized HSV planes, shape (H, W, 3) uint8.

    Hue is quantized to [0, 180] with half-up rounding, matching the scale
    the segmentation thresholds are written in.
    """
    if not image.is_rgb():
        raise ImageFormatError("HSV conversion needs an RGB image")
    rgb = image.pixels.astype(np.float64)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    v = rgb.max(axis=2)
    c = v - rgb.min(axis=2)
    safe_c = np.where(c == 0, 1.0, c)
    h_deg = np.zeros_like(v)
    m = (v == r) & (c > 0)
    h_deg[m] = 60.0 * (((g[m] - b[m]) / safe_c[m]) % 6.0)
    m = (v == g) & (v != r) & (c > 0)
    h_deg[m] = 60.0 * ((b[m] - r[m]) / safe_c[m] + 2.0)
    m = (v == b) & (v != r) & (v != g) & (c > 0)
    h_deg[m] = 60.0 * ((r[m] - g[m]) / safe_c[m] + 4.0)
    s = np.where(v == 0, 0.0, 255.0 * c / np.where(v == 0, 1.0, v))
    out = np.stack([h_deg / 2.0, s, v], axis=2)
    return np.floor(out + 0.5).astype(np.uint8)


def to_gray(image: RasterImage) -> RasterImage:
    """Luminance grayscale by the BT.601 weights (0.299, 0.587, 0.114)."""
    if not image.is_rgb():
        raise ImageFormatError("to_gray expects an RGB image")
    rgb = image.pixels.astype(np.float64)
    y = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    return RasterImage(np.floor(y + 0.5).astype(np.uint8))


def extract_channel(image: RasterImage, channel: int) -> RasterImage:
    """Pull one channel (0=R, 1=G, 2=B) out of an RGB image as grayscale."""
    if not image.is_rgb():
        raise ImageFormatError("extract_channel expects an RGB image")
    if channel not in (0, 1, 2):
        raise ImageFormatError(f"invalid channel index {channel}")
    return RasterImage(image.pixels[..., channel].copy())


# ---------------------------------------------------------------------------
# Resampling
# ---------------------------------------------------------------------------

def resample_nearest(
    image: RasterImage,
    transform: "RigidTransform",
    out_width: int | None = None,
    out_height: int | None = None,
) -> RasterImage:
    """Warp ``image`` through ``transform`` with nearest-neighbor lookup.

    Each output pixel p takes the source pixel nearest to transform^-1(p);
    pixel indices are treated as sample points and ties at .5 round toward
    the smaller index, so an exact integer scale maps each source pixel to
    an unbroken block. Output defaults to the input canvas size; lookups
    that leave the source stay background black.
    """
    if transform.scale <= 0:
        raise ValueError(f"degenerate transform: scale {transform.scale} <= 0")
    w = image.width if out_width is None else int(out_width)
    h = image.height if out_height is None else int(out_height)
    if w < 1 or h < 1:
        raise ValueError("output size must be at least 1x1")
    ys, xs = np.mgrid[0:h, 0:w]
    u, v = transform.inverse_map(xs.astype(np.float64), ys.astype(np.float64))
    iu = np.ceil(u - 0.5).astype(np.int64)  # nearest, ties toward smaller index
    iv = np.ceil(v - 0.5).astype(np.int64)
    inside = (iu >= 0) & (iu < image.width) & (iv >= 0) & (iv < image.height)
    shape = (h, w, 3) if image.is_rgb() else (h, w)
    out = np.zeros(shape, dtype=np.uint8)
    out[inside] = image.pixels[iv[inside], iu[inside]]
    return RasterImage(out)


# ---------------------------------------------------------------------------
# PNG I/O
# ---------------------------------------------------------------------------

def read_png(path: str | Path) -> RasterImage:
    """Read an 8-bit PNG as RGB or grayscale."""
    try:
        with PILImage.open(path) as im:
            if im.mode == "L":
                return RasterImage(np.asarray(im, dtype=np.uint8))
            if im.mode != "RGB":
                im = im.convert("RGB")
            return RasterImage(np.asarray(im, dtype=np.uint8))
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise ImageFormatError(f"cannot read PNG {path}: {exc}") from exc


def write_png(image: RasterImage, path: str | Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    mode = "RGB" if image.is_rgb() else "L"
    PILImage.fromarray(image.pixels, mode=mode).save(path, format="PNG")
