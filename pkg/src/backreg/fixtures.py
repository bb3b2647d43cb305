"""Deterministic synthetic exam stores with recorded ground truth.

Generated diagnoses follow the production image geometry: the clean back
photo is 494x755, the annotated companion 494x678 with its content drawn
smaller, radiographs around 1143x2494. Landmarks are painted with the
exact colors the detection bands select, so generated stores exercise the
real thresholds. Every exam directory gets a ``ground_truth.json`` with the
planted landmark positions for oracle-style verification.
"""
from __future__ import annotations

import datetime as dt
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .image import PixelCoord, RasterImage, write_png
from .landmarks import LandmarkSet
from .store import ExamRecord, Modality, PatientRecord, save_manifest

SFSL_SIZE = (494, 755)  # width, height
FD_SIZE = (494, 678)
XRAY_SIZE = (1143, 2494)

BACK_COLOR = (205, 170, 145)  # low saturation: outside every band
SPINE_COLOR = (215, 37, 56)  # quantizes to HSV (177, 211, 215), inside the spine band
FD_LINE_COLOR = (101, 196, 225)  # quantizes to HSV (97, 141, 225), the exact line color
FD_MARKER_COLOR = (30, 30, 220)  # quantizes to HSV (120, 220, 220), inside the marker band
FD_SCRIPT_COLOR = (200, 20, 0)  # zero blue: vanishes with the blue-channel pass
XRAY_MARKER_COLOR = (255, 0, 0)
XRAY_BONE_COLOR = (118, 118, 118)

GROUND_TRUTH_NAME = "ground_truth.json"
XRAY_MARKER_RADIUS = 12
FD_MARKER_RADIUS = 4


def _rect(img: np.ndarray, x0: int, y0: int, x1: int, y1: int, color) -> None:
    img[y0 : y1 + 1, x0 : x1 + 1] = color


def _disc(img: np.ndarray, cx: int, cy: int, r: int, color) -> None:
    yy, xx = np.mgrid[cy - r : cy + r + 1, cx - r : cx + r + 1]
    hit = (xx - cx) ** 2 + (yy - cy) ** 2 <= r * r
    img[yy[hit], xx[hit]] = color


@dataclass
class RgbExamTruth:
    landmarks: LandmarkSet
    fd_psis: list[tuple[int, int]]


def _paint_rgb_exam(rng: np.random.Generator, exam_id: str) -> tuple[RasterImage, RasterImage, RgbExamTruth]:
    sw, sh = SFSL_SIZE
    fw, fh = FD_SIZE

    # back silhouette in the clean photo
    x0 = 70 + int(rng.integers(0, 15))
    x1 = sw - 70 - int(rng.integers(0, 15))
    y0 = 45 + int(rng.integers(0, 12))
    y1 = sh - 45 - int(rng.integers(0, 12))
    sfsl = np.zeros((sh, sw, 3), dtype=np.uint8)
    _rect(sfsl, x0, y0, x1, y1, BACK_COLOR)

    cx = (x0 + x1) // 2
    c7 = (cx + int(rng.integers(-8, 9)), y0 + 18 + int(rng.integers(0, 10)))
    ic = (cx + int(rng.integers(-8, 9)), y1 - 28 + int(rng.integers(0, 10)))
    trunk = ic[1] - c7[1]
    psis_y = c7[1] + int(0.72 * trunk)
    tilt = int(rng.integers(-6, 7))
    half_span = 40 + int(rng.integers(0, 20))
    psis_left = (cx - half_span + int(rng.integers(-5, 6)), psis_y + tilt)
    psis_right = (cx + half_span + int(rng.integers(-5, 6)), psis_y - tilt)

    # dotted spine trace with a per-exam lateral bow (the scoliosis state)
    amp = 5.0 + float(rng.uniform(0, 23))
    waves = 1.0 + float(rng.uniform(0, 1.2))
    phase = float(rng.uniform(0, math.pi))
    painted: list[tuple[int, int]] = []
    n_dots = max(trunk // 6, 2)
    for k in range(n_dots + 1):
        t = k / n_dots
        y = c7[1] + t * trunk
        x = c7[0] + (ic[0] - c7[0]) * t + amp * math.sin(math.pi * waves * t + phase) * 4 * t * (1 - t)
        xi, yi = int(math.floor(x + 0.5)), int(math.floor(y + 0.5))
        sfsl[yi : yi + 2, xi : xi + 2] = SPINE_COLOR
        painted.extend([(xi, yi), (xi + 1, yi), (xi, yi + 1), (xi + 1, yi + 1)])
    truth_c7 = min(painted, key=lambda p: (p[1], p[0]))
    truth_ic = min(painted, key=lambda p: (-p[1], p[0]))

    # annotated companion: same content drawn smaller, plus markers/line/script
    shrink = 1.0 / (1.14 + float(rng.uniform(0, 0.1)))  # companion content is smaller
    fd_y0 = 40 + int(rng.integers(0, 12))
    fd_x0 = 50 + int(rng.integers(0, 12))
    fd_y1 = fd_y0 + int(math.floor((y1 - y0) * shrink + 0.5))
    fd_x1 = fd_x0 + int(math.floor((x1 - x0) * shrink + 0.5))
    scale = (y1 - y0) / (fd_y1 - fd_y0)  # the content-box transfer the detector estimates

    def to_fd(p: tuple[float, float]) -> tuple[int, int]:
        return (
            int(math.floor((p[0] - x0) / scale + fd_x0 + 0.5)),
            int(math.floor((p[1] - y0) / scale + fd_y0 + 0.5)),
        )

    fd = np.zeros((fh, fw, 3), dtype=np.uint8)
    _rect(fd, fd_x0, fd_y0, fd_x1, fd_y1, BACK_COLOR)
    for xi, yi in painted[:: 4]:
        fx, fy = to_fd((xi, yi))
        fd[fy, fx] = SPINE_COLOR
    line_x = (fd_x0 + fd_x1) // 2
    _rect(fd, line_x, fd_y0, line_x + 1, fd_y1, FD_LINE_COLOR)
    fd_psis = [to_fd(psis_left), to_fd(psis_right)]
    for fx, fy in fd_psis:
        _disc(fd, fx, fy, FD_MARKER_RADIUS, FD_MARKER_COLOR)
    for _ in range(4):  # printed measurements right of the content
        gy = int(rng.integers(60, fh - 80))
        gx = fd_x1 + 8 + int(rng.integers(0, max(fw - fd_x1 - 40, 1)))
        _rect(fd, gx, gy, min(gx + 18, fw - 1), gy + 6, FD_SCRIPT_COLOR)

    truth = RgbExamTruth(
        landmarks=LandmarkSet(
            c7=PixelCoord(*map(float, truth_c7)),
            psis_left=PixelCoord(*map(float, psis_left)),
            psis_right=PixelCoord(*map(float, psis_right)),
            ic=PixelCoord(*map(float, truth_ic)),
            spine=[],
            frame=exam_id,
        ),
        fd_psis=fd_psis,
    )
    return RasterImage(sfsl), RasterImage(fd), truth


def _paint_xray_exam(rng: np.random.Generator, exam_id: str) -> tuple[RasterImage, LandmarkSet]:
    w, h = XRAY_SIZE
    img = np.zeros((h, w, 3), dtype=np.uint8)
    cx = w // 2 + int(rng.integers(-40, 41))
    _rect(img, cx - 70, 90, cx + 70, h - 90, XRAY_BONE_COLOR)

    c7 = (cx + int(rng.integers(-20, 21)), 170 + int(rng.integers(0, 60)))
    ic = (cx + int(rng.integers(-20, 21)), h - 170 - int(rng.integers(0, 60)))
    psis_y = int(0.70 * h) + int(rng.integers(-40, 41))
    tilt = int(rng.integers(-25, 26))
    span = 90 + int(rng.integers(0, 40))
    left = (cx - span, psis_y + tilt)
    right = (cx + span, psis_y - tilt)
    for p in (c7, left, right, ic):
        _disc(img, p[0], p[1], XRAY_MARKER_RADIUS, XRAY_MARKER_COLOR)
    truth = LandmarkSet(
        c7=PixelCoord(*map(float, c7)),
        psis_left=PixelCoord(*map(float, left)),
        psis_right=PixelCoord(*map(float, right)),
        ic=PixelCoord(*map(float, ic)),
        spine=[],
        frame=exam_id,
    )
    return RasterImage(img), truth


def generate_store(out: str | Path, seed: int, patients: int = 3) -> list[PatientRecord]:
    """Build a synthetic store under ``out``; same seed, same bytes.

    Each patient gets 2-4 RGB diagnoses and 1-2 radiographs with dates in
    acquisition order, mirroring the clinical corpus shape.
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    records: list[PatientRecord] = []
    for i in range(patients):
        pid = f"patient-{i + 1:02d}"
        n_rgb = int(rng.integers(2, 5))
        n_xray = int(rng.integers(1, 3))
        base = dt.date(2023, 1, 10) + dt.timedelta(days=int(rng.integers(0, 40)) + 37 * i)
        exams: list[ExamRecord] = []
        for k in range(n_rgb + n_xray):
            is_xray = k >= n_rgb
            eid = f"exam-{k + 1:02d}"
            exam_dir = out / pid / eid
            exam_dir.mkdir(parents=True, exist_ok=True)
            date = base + dt.timedelta(days=95 * k + int(rng.integers(0, 20)))
            if is_xray:
                img, truth_set = _paint_xray_exam(rng, eid)
                write_png(img, exam_dir / "xray.png")
                truth_doc = {"landmarks": truth_set.to_json()}
                exams.append(ExamRecord(eid, date, Modality.XRAY, xray_path=exam_dir / "xray.png"))
            else:
                sfsl, fd, truth = _paint_rgb_exam(rng, eid)
                write_png(sfsl, exam_dir / "sfsl.png")
                write_png(fd, exam_dir / "fd.png")
                truth_doc = {
                    "landmarks": truth.landmarks.to_json(),
                    "fd_psis": [list(p) for p in truth.fd_psis],
                }
                exams.append(
                    ExamRecord(
                        eid,
                        date,
                        Modality.RGB,
                        sfsl_path=exam_dir / "sfsl.png",
                        fd_path=exam_dir / "fd.png",
                    )
                )
            (exam_dir / GROUND_TRUTH_NAME).write_text(json.dumps(truth_doc, indent=2) + "\n")
        records.append(PatientRecord(pid, exams))
    save_manifest(out, records)
    return records


def load_ground_truth(exam: ExamRecord) -> LandmarkSet:
    doc = json.loads((exam.exam_dir / GROUND_TRUTH_NAME).read_text())
    return LandmarkSet.from_json(doc["landmarks"])
