"""Blending of registered images and landmark overlays for follow-up views."""
from __future__ import annotations

import math

import numpy as np

from .errors import ImageFormatError
from .image import PixelCoord, RasterImage
from .landmarks import LandmarkSet

Color = tuple[int, int, int]

DEFAULT_PALETTE: dict[str, Color] = {
    "c7": (255, 215, 0),
    "psis_left": (0, 230, 118),
    "psis_right": (41, 121, 255),
    "ic": (255, 64, 255),
    "spine": (0, 255, 0),
}

MARKER_RADIUS = 4


def alpha_blend(source: RasterImage, target: RasterImage, alpha: float) -> RasterImage:
    """Per-pixel linear mix: alpha * source + (1 - alpha) * target.

    Values round half away from zero so blends are bit-reproducible.
    alpha=0 returns the target bytes exactly, alpha=1 the source bytes.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be within [0, 1], got {alpha}")
    if source.pixels.shape != target.pixels.shape:
        raise ImageFormatError(
            f"blend inputs must match: {source.pixels.shape} vs {target.pixels.shape}"
        )
    mix = alpha * source.pixels.astype(np.float64) + (1.0 - alpha) * target.pixels.astype(np.float64)
    return RasterImage(np.floor(mix + 0.5).astype(np.uint8))


def render_followup(
    target: RasterImage, sources: list[RasterImage], alpha: float
) -> RasterImage:
    """Fold each registered source over the running blend, oldest first.

    With no sources the target comes back unchanged; with one source this
    is exactly ``alpha_blend``.
    """
    out = target
    for src in sources:
        out = alpha_blend(src, out, alpha)
    return out


# ---------------------------------------------------------------------------
# Overlays
# ---------------------------------------------------------------------------

def _stamp_disc(canvas: np.ndarray, x: int, y: int, radius: int, color: Color) -> None:
    h, w = canvas.shape[:2]
    y0, y1 = max(0, y - radius), min(h, y + radius + 1)
    x0, x1 = max(0, x - radius), min(w, x + radius + 1)
    yy, xx = np.mgrid[y0:y1, x0:x1]
    hit = (xx - x) ** 2 + (yy - y) ** 2 <= radius * radius
    canvas[yy[hit], xx[hit]] = color


def _stamp_segment(canvas: np.ndarray, p0: PixelCoord, p1: PixelCoord, color: Color) -> None:
    # Bresenham between two pixel positions
    x0, y0 = int(p0.x), int(p0.y)
    x1, y1 = int(p1.x), int(p1.y)
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    h, w = canvas.shape[:2]
    while True:
        if 0 <= y0 < h and 0 <= x0 < w:
            canvas[y0, x0] = color
        if x0 == x1 and y0 == y1:
            return
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy


def overlay_landmarks(
    image: RasterImage,
    landmarks: LandmarkSet,
    palette: dict[str, Color] | None = None,
    marker_radius: int = MARKER_RADIUS,
) -> RasterImage:
    """Stamp landmark discs and the spine polyline onto a copy of the image.

    Landmark centers must lie within the image. Drawing is idempotent:
    repeating it changes nothing.
    """
    if not image.is_rgb():
        raise ImageFormatError("overlays need an RGB image")
    colors = dict(DEFAULT_PALETTE)
    if palette:
        colors.update(palette)
    for name, p in landmarks.named_points():
        if not (0 <= p.x < image.width and 0 <= p.y < image.height):
            raise ValueError(f"landmark {name} at ({p.x}, {p.y}) is out of bounds")
    out = image.pixels.copy()
    spine = landmarks.spine
    for a, b in zip(spine, spine[1:]):
        _stamp_segment(out, a, b, colors["spine"])
    for name, p in landmarks.named_points():
        _stamp_disc(out, int(math.floor(p.x + 0.5)), int(math.floor(p.y + 0.5)), marker_radius, colors[name])
    return RasterImage(out)


def thin_spine(spine: list[PixelCoord]) -> list[PixelCoord]:
    """One point per row (the row's mean column), for clean polyline display."""
    rows: dict[float, list[float]] = {}
    for p in spine:
        rows.setdefault(p.y, []).append(p.x)
    return [
        PixelCoord(float(math.floor(sum(xs) / len(xs) + 0.5)), y)
        for y, xs in sorted(rows.items())
    ]
