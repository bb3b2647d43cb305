"""End-to-end flows tying the store, detection, registration, and blending
together for the CLI and the HTTP service."""
from __future__ import annotations

from .compositing import alpha_blend, overlay_landmarks, thin_spine
from .image import RasterImage, read_png, resample_nearest
from .landmarks import LandmarkSet
from .registration import (
    RegistrationReport,
    estimate_rigid,
    estimate_similarity_lsq,
    registration_residuals,
)
from .segmentation import ThresholdBand
from .store import ExamRecord, get_or_detect_landmarks

METHODS = ("angle", "lsq")


def exam_display_image(exam: ExamRecord) -> RasterImage:
    return read_png(exam.display_image_path())


def landmark_pairs(source: LandmarkSet, target: LandmarkSet) -> list[tuple[tuple, tuple]]:
    """The four matched landmark positions, source first."""
    return [
        ((s.x, s.y), (t.x, t.y))
        for (_, s), (_, t) in zip(source.named_points(), target.named_points())
    ]


def estimate_exam_transform(
    source: LandmarkSet, target: LandmarkSet, method: str = "angle"
) -> RegistrationReport:
    """Registration report by either estimator over the same landmark sets."""
    if method == "angle":
        return estimate_rigid(source, target)
    if method == "lsq":
        transform = estimate_similarity_lsq(landmark_pairs(source, target))
        res = registration_residuals(source, target, transform)
        left, right = res["angular_errors"]
        return RegistrationReport(
            transform=transform,
            decomposition=None,
            residual_left=left,
            residual_right=right,
            psis_distance_sum=res["psis_distance_sum"],
        )
    raise ValueError(f"unknown registration method '{method}' (use one of {METHODS})")


def register_exam_pair(
    source_exam: ExamRecord,
    target_exam: ExamRecord,
    method: str = "angle",
    bands: dict[str, ThresholdBand] | None = None,
) -> tuple[RegistrationReport, RasterImage]:
    """Detect (or reuse) both landmark sets, estimate, and resample the
    source exam's display image into the target frame."""
    source_lm = get_or_detect_landmarks(source_exam, bands)
    target_lm = get_or_detect_landmarks(target_exam, bands)
    report = estimate_exam_transform(source_lm, target_lm, method)
    target_img = exam_display_image(target_exam)
    source_img = exam_display_image(source_exam)
    registered = resample_nearest(
        source_img, report.transform, out_width=target_img.width, out_height=target_img.height
    )
    return report, registered


def blend_followup(
    target_exam: ExamRecord,
    source_exams: list[ExamRecord],
    alpha: float,
    method: str = "angle",
    overlay: bool = False,
    bands: dict[str, ThresholdBand] | None = None,
    palette: dict | None = None,
) -> tuple[RasterImage, list[RegistrationReport]]:
    """Register every source into the target frame and fold-blend them.

    Sources are blended in list order (callers pass chronological order).
    With ``overlay`` the target's landmark set is stamped on the result,
    its spine thinned to one point per row.
    """
    target_img = exam_display_image(target_exam)
    reports: list[RegistrationReport] = []
    out = target_img
    for src in source_exams:
        report, registered = register_exam_pair(src, target_exam, method, bands)
        reports.append(report)
        out = alpha_blend(registered, out, alpha)
    if overlay:
        lm = get_or_detect_landmarks(target_exam, bands)
        display = LandmarkSet(
            c7=lm.c7,
            psis_left=lm.psis_left,
            psis_right=lm.psis_right,
            ic=lm.ic,
            spine=thin_spine(lm.spine),
            frame=lm.frame,
        )
        out = overlay_landmarks(out, display, palette)
    return out, reports
