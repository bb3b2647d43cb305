"""HTTP facade over the exam store and processing pipeline.

Every response is a pure function of store contents plus the request; the
only mutable state is the landmark cache (file-backed) and an in-process
transform cache keyed by exam pair, method, and a fingerprint of the
landmarks it was computed from, so re-detection invalidates stale entries.
Error bodies always carry {status, code, message, stage?}.
"""
from __future__ import annotations

import hashlib
import io
import json
import threading
from collections import defaultdict
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles
from PIL import Image as PILImage
from pydantic import BaseModel

from .compositing import alpha_blend, overlay_landmarks, thin_spine
from .errors import DegenerateLandmarksError, DetectionError
from .image import RasterImage, resample_nearest
from .landmarks import LandmarkSet
from .pipeline import METHODS, estimate_exam_transform, exam_display_image
from .store import ExamRecord, PatientRecord, find_patient, get_or_detect_landmarks, load_store


class ApiFailure(Exception):
    """Carries an ApiError payload to the exception handler."""

    def __init__(self, status: int, code: str, message: str, stage: str | None = None):
        assert status in (400, 404, 422, 500)
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.stage = stage

    def body(self) -> dict:
        doc = {"status": self.status, "code": self.code, "message": self.message}
        if self.stage is not None:
            doc["stage"] = self.stage
        return doc


class RegisterRequest(BaseModel):
    patient: str
    source_exam: str
    target_exam: str
    method: str = "angle"


def _landmark_fingerprint(lm: LandmarkSet) -> str:
    payload = json.dumps(lm.to_json(), sort_keys=True).encode()
    return hashlib.md5(payload).hexdigest()


def _png_bytes(image: RasterImage) -> bytes:
    buf = io.BytesIO()
    mode = "RGB" if image.is_rgb() else "L"
    PILImage.fromarray(image.pixels, mode=mode).save(buf, format="PNG")
    return buf.getvalue()


def create_app(
    store_root: str | Path,
    static_dir: str | Path | None = None,
    bands: dict | None = None,
    palette: dict | None = None,
) -> FastAPI:
    root = Path(store_root)
    app = FastAPI(title="backreg service")
    app.state.root = root
    app.state.records = load_store(root)
    app.state.bands = bands or {}
    app.state.palette = palette
    app.state.transform_cache: dict[tuple, tuple] = {}
    app.state.locks = defaultdict(threading.Lock)
    app.state.stats = {"registrations": 0}

    def patient_or_404(pid: str) -> PatientRecord:
        try:
            return find_patient(app.state.records, pid)
        except KeyError:
            raise ApiFailure(404, "patient_not_found", f"unknown patient '{pid}'")

    def exam_or_404(patient: PatientRecord, eid: str) -> ExamRecord:
        try:
            return patient.exam(eid)
        except KeyError:
            raise ApiFailure(
                404, "exam_not_found", f"patient '{patient.patient_id}' has no exam '{eid}'"
            )

    def landmarks_or_422(exam: ExamRecord) -> LandmarkSet:
        # cache writes are serialized per exam; reads stay lock-free once cached
        with app.state.locks[("landmarks", str(exam.exam_dir))]:
            try:
                return get_or_detect_landmarks(exam, app.state.bands)
            except DetectionError as exc:
                raise ApiFailure(422, "detection_failed", str(exc), stage=exc.stage)

    def registered_pair(patient: PatientRecord, source: ExamRecord, target: ExamRecord, method: str):
        """Transform + registered source image, cached per landmark state."""
        source_lm = landmarks_or_422(source)
        target_lm = landmarks_or_422(target)
        key = (
            patient.patient_id,
            source.exam_id,
            target.exam_id,
            method,
            _landmark_fingerprint(source_lm),
            _landmark_fingerprint(target_lm),
        )
        lock = app.state.locks[(patient.patient_id, source.exam_id, target.exam_id, method)]
        with lock:
            hit = app.state.transform_cache.get(key)
            if hit is not None:
                return hit
            try:
                report = estimate_exam_transform(source_lm, target_lm, method)
            except DegenerateLandmarksError as exc:
                raise ApiFailure(422, "degenerate_landmarks", str(exc), stage="registration")
            target_img = exam_display_image(target)
            registered = resample_nearest(
                exam_display_image(source),
                report.transform,
                out_width=target_img.width,
                out_height=target_img.height,
            )
            app.state.stats["registrations"] += 1
            entry = (report, registered)
            app.state.transform_cache[key] = entry
            return entry

    @app.exception_handler(ApiFailure)
    async def handle_api_failure(_req: Request, exc: ApiFailure):
        return JSONResponse(status_code=exc.status, content=exc.body())

    @app.exception_handler(RequestValidationError)
    async def handle_validation(_req: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={"status": 400, "code": "bad_request", "message": str(exc.errors())},
        )

    @app.exception_handler(Exception)
    async def handle_unexpected(_req: Request, exc: Exception):
        return JSONResponse(
            status_code=500,
            content={"status": 500, "code": "internal_error", "message": str(exc)},
        )

    @app.get("/patients")
    def list_patients():
        return [p.to_json(root) for p in app.state.records]

    @app.get("/patients/{pid}/exams")
    def list_exams(pid: str):
        patient = patient_or_404(pid)
        return [e.to_json(root) for e in patient.exams]

    @app.get("/patients/{pid}/exams/{eid}/landmarks")
    def exam_landmarks(pid: str, eid: str):
        patient = patient_or_404(pid)
        exam = exam_or_404(patient, eid)
        return landmarks_or_422(exam).to_json()

    @app.post("/register")
    def register(req: RegisterRequest):
        if req.method not in METHODS:
            raise ApiFailure(400, "bad_method", f"method must be one of {METHODS}")
        patient = patient_or_404(req.patient)
        source = exam_or_404(patient, req.source_exam)
        target = exam_or_404(patient, req.target_exam)
        report, _ = registered_pair(patient, source, target, req.method)
        return report.to_json()

    @app.get("/blend")
    def blend(
        patient: str,
        target: str,
        sources: str,
        alpha: float,
        method: str = "angle",
        overlay: str = "none",
    ):
        if not 0.0 <= alpha <= 1.0:
            raise ApiFailure(400, "bad_alpha", f"alpha must be within [0, 1], got {alpha}")
        if overlay not in ("none", "landmarks"):
            raise ApiFailure(400, "bad_overlay", "overlay must be 'none' or 'landmarks'")
        if method not in METHODS:
            raise ApiFailure(400, "bad_method", f"method must be one of {METHODS}")
        pat = patient_or_404(patient)
        target_exam = exam_or_404(pat, target)
        source_ids = [s for s in sources.split(",") if s]
        if target in source_ids:
            raise ApiFailure(400, "bad_sources", "target exam cannot also be a source")
        out = exam_display_image(target_exam)
        for sid in source_ids:
            source_exam = exam_or_404(pat, sid)
            _, registered = registered_pair(pat, source_exam, target_exam, method)
            out = alpha_blend(registered, out, alpha)
        if overlay == "landmarks":
            lm = landmarks_or_422(target_exam)
            display = LandmarkSet(
                c7=lm.c7,
                psis_left=lm.psis_left,
                psis_right=lm.psis_right,
                ic=lm.ic,
                spine=thin_spine(lm.spine),
                frame=lm.frame,
            )
            out = overlay_landmarks(out, display, app.state.palette)
        return Response(content=_png_bytes(out), media_type="image/png")

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
