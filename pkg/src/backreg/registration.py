"""Rigid registration of landmark sets.

The primary estimator aligns two diagnoses with a similarity transform
constrained to uniform scale, rotation about the C7 landmark, and the
translation that pins C7 onto C7. Scale comes from the ratio of trunk
lengths (C7 to PSIS midpoint); rotation aligns the angular bisector of the
source PSIS pair with the target's, which makes the two per-side angular
errors equal in magnitude and minimizes the larger of them. A general
least-squares similarity fit over point pairs is provided as a baseline.

All angles are signed radians in (-pi, pi], measured with the two-argument
arctangent in the raster coordinate frame (x right, y down); the rotation
matrix is [[cos, -sin], [sin, cos]] acting on (x, y) column vectors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence, TYPE_CHECKING

import numpy as np

from .errors import DegenerateLandmarksError
from .image import PixelCoord

if TYPE_CHECKING:
    from .landmarks import LandmarkSet

Point = tuple[float, float]

MIN_SUBTENDED_ANGLE = 1e-6  # rad; PSIS pairs narrower than this are degenerate


def wrap_angle(a: float) -> float:
    """Normalize an angle into (-pi, pi]."""
    a = math.remainder(a, math.tau)
    return math.pi if a <= -math.pi else a


def signed_angle(v: Sequence[float]) -> float:
    """Signed angle of ``v`` measured from the unit x-axis, in (-pi, pi]."""
    x, y = float(v[0]), float(v[1])
    if x == 0.0 and y == 0.0:
        raise DegenerateLandmarksError("signed_angle of the zero vector is undefined")
    return wrap_angle(math.atan2(y, x))


@dataclass(frozen=True)
class RigidTransform:
    """Uniform scale and rotation about ``pivot``, then translation of the
    pivot onto ``anchor``: p -> scale * R(angle) * (p - pivot) + anchor."""

    scale: float
    angle: float
    pivot: PixelCoord
    anchor: PixelCoord

    def __post_init__(self):
        if not self.scale > 0:
            raise DegenerateLandmarksError(f"transform scale must be positive, got {self.scale}")

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(1.0, 0.0, PixelCoord(0.0, 0.0), PixelCoord(0.0, 0.0))

    def linear(self) -> np.ndarray:
        """The 2x2 linear part (determinant scale**2, zero shear)."""
        c, s = math.cos(self.angle), math.sin(self.angle)
        return self.scale * np.array([[c, -s], [s, c]])

    def apply_xy(self, x: float, y: float) -> Point:
        c, s = math.cos(self.angle), math.sin(self.angle)
        dx, dy = x - self.pivot.x, y - self.pivot.y
        return (
            self.scale * (c * dx - s * dy) + self.anchor.x,
            self.scale * (s * dx + c * dy) + self.anchor.y,
        )

    def apply_array(self, xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        c, s = math.cos(self.angle), math.sin(self.angle)
        dx, dy = xs - self.pivot.x, ys - self.pivot.y
        return (
            self.scale * (c * dx - s * dy) + self.anchor.x,
            self.scale * (s * dx + c * dy) + self.anchor.y,
        )

    def inverse_map(self, xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Map output-frame coordinates back into the source frame."""
        c, s = math.cos(self.angle), math.sin(self.angle)
        dx, dy = xs - self.anchor.x, ys - self.anchor.y
        return (
            (c * dx + s * dy) / self.scale + self.pivot.x,
            (-s * dx + c * dy) / self.scale + self.pivot.y,
        )

    def inverse(self) -> "RigidTransform":
        return RigidTransform(
            1.0 / self.scale, -self.angle, pivot=self.anchor, anchor=self.pivot
        )

    def compose_with(self, first: "RigidTransform") -> "RigidTransform":
        """The transform equivalent to applying ``first`` then ``self``."""
        scale = self.scale * first.scale
        angle = wrap_angle(self.angle + first.angle)
        px, py = first.pivot
        ax, ay = self.apply_xy(*first.apply_xy(px, py))
        return RigidTransform(scale, angle, pivot=PixelCoord(px, py), anchor=PixelCoord(ax, ay))

    def to_json(self) -> dict:
        return {
            "scale": self.scale,
            "angle": self.angle,
            "pivot": [self.pivot.x, self.pivot.y],
            "anchor": [self.anchor.x, self.anchor.y],
        }

    @classmethod
    def from_json(cls, d: dict) -> "RigidTransform":
        return cls(
            float(d["scale"]),
            float(d["angle"]),
            PixelCoord(*map(float, d["pivot"])),
            PixelCoord(*map(float, d["anchor"])),
        )


@dataclass(frozen=True)
class AngleDecomposition:
    """The intermediate angles of the rotation estimate.

    theta_a / theta_c: angles of the left-PSIS vectors (target, source)
    from the x-axis. theta_d: their difference. theta_ab / theta_cd: the
    signed angle separating each pair, measured from the right vector to
    the left one. theta: the rotation carrying the source pair's bisector
    onto the target's, theta_d - (theta_ab - theta_cd) / 2.
    """

    theta_a: float
    theta_c: float
    theta_d: float
    theta_ab: float
    theta_cd: float
    theta: float

    def to_json(self) -> dict:
        return {
            "theta_a": self.theta_a,
            "theta_c": self.theta_c,
            "theta_d": self.theta_d,
            "theta_ab": self.theta_ab,
            "theta_cd": self.theta_cd,
            "theta": self.theta,
        }


@dataclass(frozen=True)
class RegistrationReport:
    transform: RigidTransform
    decomposition: AngleDecomposition | None
    residual_left: float
    residual_right: float
    psis_distance_sum: float

    def to_json(self) -> dict:
        return {
            "transform": self.transform.to_json(),
            "decomposition": self.decomposition.to_json() if self.decomposition else None,
            "residual_left": self.residual_left,
            "residual_right": self.residual_right,
            "psis_distance_sum": self.psis_distance_sum,
        }


# ---------------------------------------------------------------------------
# Elementary landmark geometry
# ---------------------------------------------------------------------------

def psis_midpoint(left: Sequence[float], right: Sequence[float]) -> Point:
    """Component-wise mean of the two PSIS positions."""
    return ((left[0] + right[0]) / 2.0, (left[1] + right[1]) / 2.0)


def trunk_length(c7: Sequence[float], mid: Sequence[float]) -> float:
    """Euclidean distance from C7 to the PSIS midpoint."""
    return math.hypot(c7[0] - mid[0], c7[1] - mid[1])


def scale_factor(d_source: float, d_target: float) -> float:
    """Ratio of target to source trunk length."""
    if d_source == 0:
        raise DegenerateLandmarksError("source trunk length is zero")
    return d_target / d_source


def center_at_c7(landmarks: "LandmarkSet") -> tuple[np.ndarray, np.ndarray]:
    """PSIS positions relative to C7, as (left_vector, right_vector)."""
    c7 = np.array([landmarks.c7.x, landmarks.c7.y])
    left = np.array([landmarks.psis_left.x, landmarks.psis_left.y]) - c7
    right = np.array([landmarks.psis_right.x, landmarks.psis_right.y]) - c7
    return left, right


def compute_rotation_angle(
    a: Sequence[float], b: Sequence[float], c: Sequence[float], d: Sequence[float]
) -> AngleDecomposition:
    """Rotation aligning the (c, d) pair's angular bisector with (a, b)'s.

    a/b are the target left/right PSIS vectors centered at C7, c/d the
    source ones. The residual angular error after rotating by theta is
    +/- (theta_ab - theta_cd) / 2 on the two sides.
    """
    theta_a = signed_angle(a)
    theta_b = signed_angle(b)
    theta_c = signed_angle(c)
    theta_d_src = signed_angle(d)
    diff = wrap_angle(theta_a - theta_c)
    theta_ab = wrap_angle(theta_a - theta_b)
    theta_cd = wrap_angle(theta_c - theta_d_src)
    theta = wrap_angle(diff - wrap_angle(theta_ab - theta_cd) / 2.0)
    return AngleDecomposition(
        theta_a=theta_a,
        theta_c=theta_c,
        theta_d=diff,
        theta_ab=theta_ab,
        theta_cd=theta_cd,
        theta=theta,
    )


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------

def estimate_rigid(source: "LandmarkSet", target: "LandmarkSet") -> RegistrationReport:
    """Estimate the C7-pivoted similarity transform from source onto target.

    Scale is the trunk-length ratio, rotation the bisector-aligning angle,
    translation pins the source C7 exactly onto the target C7. Raises
    DegenerateLandmarksError when a trunk length vanishes, a PSIS coincides
    with C7, or a PSIS pair subtends less than MIN_SUBTENDED_ANGLE at C7.
    """
    c_vec, d_vec = center_at_c7(source)
    a_vec, b_vec = center_at_c7(target)
    for name, vec in (("source", c_vec), ("source", d_vec), ("target", a_vec), ("target", b_vec)):
        if vec[0] == 0 and vec[1] == 0:
            raise DegenerateLandmarksError(f"{name} PSIS coincides with C7")

    d_s = trunk_length(source.c7, psis_midpoint(source.psis_left, source.psis_right))
    d_t = trunk_length(target.c7, psis_midpoint(target.psis_left, target.psis_right))
    if d_t == 0:
        raise DegenerateLandmarksError("target trunk length is zero")
    scale = scale_factor(d_s, d_t)

    subtended_src = abs(wrap_angle(signed_angle(d_vec) - signed_angle(c_vec)))
    subtended_tgt = abs(wrap_angle(signed_angle(b_vec) - signed_angle(a_vec)))
    if subtended_src < MIN_SUBTENDED_ANGLE or subtended_tgt < MIN_SUBTENDED_ANGLE:
        raise DegenerateLandmarksError(
            f"PSIS pair subtends {min(subtended_src, subtended_tgt):.2e} rad at C7"
        )

    decomp = compute_rotation_angle(a_vec, b_vec, c_vec, d_vec)
    transform = RigidTransform(scale, decomp.theta, pivot=source.c7, anchor=target.c7)

    err_left = wrap_angle(decomp.theta_a - (decomp.theta_c + decomp.theta))
    err_right = wrap_angle(
        signed_angle(b_vec) - (signed_angle(d_vec) + decomp.theta)
    )
    lx, ly = transform.apply_xy(source.psis_left.x, source.psis_left.y)
    rx, ry = transform.apply_xy(source.psis_right.x, source.psis_right.y)
    psis_sum = math.hypot(lx - target.psis_left.x, ly - target.psis_left.y) + math.hypot(
        rx - target.psis_right.x, ry - target.psis_right.y
    )
    return RegistrationReport(
        transform=transform,
        decomposition=decomp,
        residual_left=abs(err_left),
        residual_right=abs(err_right),
        psis_distance_sum=psis_sum,
    )


def apply_to_points(t: RigidTransform, pts: Iterable[Sequence[float]]) -> list[Point]:
    """Apply the transform to a sequence of (x, y) points."""
    return [t.apply_xy(float(p[0]), float(p[1])) for p in pts]


def estimate_similarity_lsq(pairs: Sequence[tuple[Sequence[float], Sequence[float]]]) -> RigidTransform:
    """Least-squares similarity fit over matched point pairs.

    Solves for (a, b, tx, ty) in q = (a*x - b*y + tx, b*x + a*y + ty),
    the linear parameterization of uniform scale + rotation + translation,
    minimizing the summed squared target error. With two distinct pairs
    the fit interpolates exactly.
    """
    if len(pairs) < 2:
        raise DegenerateLandmarksError("similarity fit needs at least 2 point pairs")
    src = np.array([[p[0][0], p[0][1]] for p in pairs], dtype=np.float64)
    dst = np.array([[p[1][0], p[1][1]] for p in pairs], dtype=np.float64)
    if np.allclose(src, src[0]):
        raise DegenerateLandmarksError("all source points coincide")
    n = len(pairs)
    m = np.zeros((2 * n, 4))
    m[0::2, 0] = src[:, 0]
    m[0::2, 1] = -src[:, 1]
    m[0::2, 2] = 1.0
    m[1::2, 0] = src[:, 1]
    m[1::2, 1] = src[:, 0]
    m[1::2, 3] = 1.0
    rhs = dst.reshape(-1)
    sol, _, rank, _ = np.linalg.lstsq(m, rhs, rcond=None)
    if rank < 4:
        raise DegenerateLandmarksError("rank-deficient similarity system")
    a, b, tx, ty = sol
    scale = math.hypot(a, b)
    if scale == 0:
        raise DegenerateLandmarksError("similarity fit collapsed to zero scale")
    angle = math.atan2(b, a)
    return RigidTransform(scale, angle, pivot=PixelCoord(0.0, 0.0), anchor=PixelCoord(tx, ty))


def registration_residuals(
    source: "LandmarkSet", target: "LandmarkSet", t: RigidTransform
) -> dict[str, object]:
    """Distance and angular residuals of ``t`` against the target landmarks."""
    lx, ly = t.apply_xy(source.psis_left.x, source.psis_left.y)
    rx, ry = t.apply_xy(source.psis_right.x, source.psis_right.y)
    cx, cy = t.apply_xy(source.c7.x, source.c7.y)
    psis_sum = math.hypot(lx - target.psis_left.x, ly - target.psis_left.y) + math.hypot(
        rx - target.psis_right.x, ry - target.psis_right.y
    )
    # angular errors measured at the target C7 (atan2(0, 0) == 0 keeps this total)
    tc = (target.c7.x, target.c7.y)
    ang = lambda px, py, q: math.atan2(py - tc[1], px - tc[0]) - math.atan2(q.y - tc[1], q.x - tc[0])
    err_left = abs(wrap_angle(ang(lx, ly, target.psis_left)))
    err_right = abs(wrap_angle(ang(rx, ry, target.psis_right)))
    return {
        "psis_distance_sum": psis_sum,
        "angular_errors": (err_left, err_right),
        "c7_error": math.hypot(cx - target.c7.x, cy - target.c7.y),
    }
