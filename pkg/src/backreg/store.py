"""Patient/exam records, the on-disk store layout, and landmark caching.

A store is one directory tree::

    <root>/manifest.json
    <root>/<patient_id>/<exam_id>/sfsl.png + fd.png      (RGB modality)
    <root>/<patient_id>/<exam_id>/xray.png               (XRAY modality)
    <root>/<patient_id>/<exam_id>/landmarks.json         (detection cache)

The manifest holds only identifiers, dates, modalities, and relative file
paths; unknown fields round-trip untouched. There is deliberately no slot
for names or other identifying free text.
"""
from __future__ import annotations

import datetime as dt
import enum
import json
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

from .errors import DetectionError, ImageFormatError, StoreError
from .image import RasterImage, read_png
from .landmarks import (
    LandmarkSet,
    detect_sfsl_landmarks,
    detect_xray_landmarks,
)
from .segmentation import ThresholdBand

MANIFEST_NAME = "manifest.json"
LANDMARKS_CACHE_NAME = "landmarks.json"


class Modality(enum.Enum):
    RGB = "rgb"
    XRAY = "xray"


@dataclass
class ExamRecord:
    """One diagnosis: its date, modality, and resolved image paths."""

    exam_id: str
    date: dt.date
    modality: Modality
    sfsl_path: Path | None = None
    fd_path: Path | None = None
    xray_path: Path | None = None
    cached_landmarks: LandmarkSet | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.modality is Modality.RGB:
            if self.sfsl_path is None or self.fd_path is None:
                raise StoreError(f"exam {self.exam_id}: RGB exams need both sfsl and fd files")
        else:
            if self.xray_path is None:
                raise StoreError(f"exam {self.exam_id}: XRAY exams need an xray file")

    @property
    def image_paths(self) -> list[Path]:
        if self.modality is Modality.RGB:
            return [self.sfsl_path, self.fd_path]
        return [self.xray_path]

    @property
    def exam_dir(self) -> Path:
        return self.image_paths[0].parent

    def display_image_path(self) -> Path:
        """The image shown to the physician (and the one transforms act on)."""
        return self.sfsl_path if self.modality is Modality.RGB else self.xray_path

    def files_json(self, root: Path) -> dict:
        def rel(p: Path) -> str:
            return p.relative_to(root).as_posix()

        if self.modality is Modality.RGB:
            return {"sfsl": rel(self.sfsl_path), "fd": rel(self.fd_path)}
        return {"xray": rel(self.xray_path)}

    def to_json(self, root: Path) -> dict:
        d = {
            "exam_id": self.exam_id,
            "date": self.date.isoformat(),
            "modality": self.modality.value,
            "files": self.files_json(root),
        }
        d.update(self.extra)
        return d


@dataclass
class PatientRecord:
    patient_id: str
    exams: list[ExamRecord] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.patient_id:
            raise StoreError("patient_id must be non-empty")
        dates = [e.date for e in self.exams]
        if any(b < a for a, b in zip(dates, dates[1:])):
            raise StoreError(f"patient {self.patient_id}: exam dates must be non-decreasing")

    def exam(self, exam_id: str) -> ExamRecord:
        for e in self.exams:
            if e.exam_id == exam_id:
                return e
        raise KeyError(exam_id)

    def to_json(self, root: Path) -> dict:
        d = {
            "patient_id": self.patient_id,
            "exams": [e.to_json(root) for e in self.exams],
        }
        d.update(self.extra)
        return d


_EXAM_KEYS = {"exam_id", "date", "modality", "files"}
_PATIENT_KEYS = {"patient_id", "exams"}


def _parse_exam(d: dict, root: Path, where: str) -> ExamRecord:
    for key in ("exam_id", "date", "modality", "files"):
        if key not in d:
            raise StoreError(f"{where}: exam entry missing field '{key}'")
    try:
        date = dt.date.fromisoformat(d["date"])
    except ValueError as exc:
        raise StoreError(f"{where}: bad date '{d['date']}' in exam {d['exam_id']}") from exc
    try:
        modality = Modality(d["modality"])
    except ValueError as exc:
        raise StoreError(f"{where}: unknown modality '{d['modality']}' in exam {d['exam_id']}") from exc
    files = d["files"]

    def resolve(key: str) -> Path:
        if key not in files:
            raise StoreError(f"{where}: exam {d['exam_id']} missing files.{key}")
        p = root / files[key]
        if not p.is_file():
            raise StoreError(f"{where}: exam {d['exam_id']} references missing image {p}")
        return p

    extra = {k: v for k, v in d.items() if k not in _EXAM_KEYS}
    if modality is Modality.RGB:
        return ExamRecord(
            d["exam_id"], date, modality, sfsl_path=resolve("sfsl"), fd_path=resolve("fd"), extra=extra
        )
    return ExamRecord(d["exam_id"], date, modality, xray_path=resolve("xray"), extra=extra)


def load_store(root: str | Path) -> list[PatientRecord]:
    """Read and validate the manifest; errors name the offending path/field."""
    root = Path(root)
    manifest = root / MANIFEST_NAME
    if not manifest.is_file():
        raise StoreError(f"no manifest at {manifest}")
    try:
        doc = json.loads(manifest.read_text())
    except json.JSONDecodeError as exc:
        raise StoreError(f"{manifest}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("patients"), list):
        raise StoreError(f"{manifest}: expected an object with a 'patients' array")
    patients = []
    for pd in doc["patients"]:
        if "patient_id" not in pd:
            raise StoreError(f"{manifest}: patient entry missing 'patient_id'")
        where = f"{manifest} patient {pd['patient_id']}"
        exams = [_parse_exam(ed, root, where) for ed in pd.get("exams", [])]
        extra = {k: v for k, v in pd.items() if k not in _PATIENT_KEYS}
        patients.append(PatientRecord(pd["patient_id"], exams, extra=extra))
    return patients


def save_manifest(root: str | Path, records: list[PatientRecord]) -> Path:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    manifest = root / MANIFEST_NAME
    doc = {"patients": [p.to_json(root) for p in records]}
    manifest.write_text(json.dumps(doc, indent=2) + "\n")
    return manifest


def find_patient(records: list[PatientRecord], patient_id: str) -> PatientRecord:
    for p in records:
        if p.patient_id == patient_id:
            return p
    raise KeyError(patient_id)


def registrable_pairs(patient: PatientRecord) -> list[tuple[ExamRecord, ExamRecord]]:
    """All unordered exam pairs of one patient: N * (N - 1) / 2 of them."""
    return list(combinations(patient.exams, 2))


# ---------------------------------------------------------------------------
# Landmark caching
# ---------------------------------------------------------------------------

def _fingerprint(path: Path) -> list[int]:
    st = path.stat()
    return [st.st_size, st.st_mtime_ns]


def _read_exam_image(path: Path, exam_id: str) -> RasterImage:
    try:
        return read_png(path)
    except (ImageFormatError, OSError) as exc:
        raise DetectionError("load", f"exam {exam_id}: cannot read {path}: {exc}") from exc


def detect_exam_landmarks(
    exam: ExamRecord, bands: dict[str, ThresholdBand] | None = None, debug: dict | None = None
) -> LandmarkSet:
    """Run the modality's detector on the exam's images (no caching)."""
    from . import landmarks as lm

    bands = bands or {}
    if exam.modality is Modality.RGB:
        sfsl = _read_exam_image(exam.sfsl_path, exam.exam_id)
        fd = _read_exam_image(exam.fd_path, exam.exam_id)
        return detect_sfsl_landmarks(
            sfsl,
            fd,
            frame=exam.exam_id,
            spine_band=bands.get("spine", lm.SFSL_SPINE_BAND),
            line_band=bands.get("fd_line", lm.FD_LINE_BAND),
            psis_band=bands.get("fd_psis", lm.DEFAULT_FD_PSIS_BAND),
            debug=debug,
        )
    xray = _read_exam_image(exam.xray_path, exam.exam_id)
    return detect_xray_landmarks(xray, frame=exam.exam_id, band=bands.get("xray", lm.XRAY_MARKER_BAND))


def get_or_detect_landmarks(
    exam: ExamRecord, bands: dict[str, ThresholdBand] | None = None
) -> LandmarkSet:
    """Serve cached landmarks while the image files are unchanged.

    Freshness is keyed on each image file's (size, mtime_ns); any mismatch
    triggers re-detection and a cache rewrite.
    """
    cache_path = exam.exam_dir / LANDMARKS_CACHE_NAME
    current = {p.name: _fingerprint(p) for p in exam.image_paths}
    if cache_path.is_file():
        try:
            doc = json.loads(cache_path.read_text())
            if doc.get("fingerprints") == current:
                cached = LandmarkSet.from_json(doc["landmarks"])
                exam.cached_landmarks = cached
                return cached
        except (json.JSONDecodeError, KeyError, ValueError):
            pass  # unreadable cache: fall through to re-detection
    detected = detect_exam_landmarks(exam, bands)
    cache_path.write_text(
        json.dumps({"landmarks": detected.to_json(), "fingerprints": current}, indent=2) + "\n"
    )
    exam.cached_landmarks = detected
    return detected
