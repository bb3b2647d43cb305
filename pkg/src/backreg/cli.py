"""Command-line surface: detection, registration, blending, shape reports,
fixture generation, and the HTTP server.

Exit codes: 0 success, 2 detection failure, 3 degenerate registration,
4 usage/configuration problems. Machine-readable JSON goes to stdout,
diagnostics to stderr.
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .compositing import DEFAULT_PALETTE
from .errors import DegenerateLandmarksError, DetectionError, SegmentationError, StoreError
from .image import ColorSpace, ColorTriple, RasterImage, to_gray, write_png
from .pipeline import METHODS, blend_followup, register_exam_pair
from .segmentation import (
    BinaryMask,
    ThresholdBand,
    canny_edges,
    connected_components,
    morph_close,
    shape_features,
)
from .store import (
    ExamRecord,
    PatientRecord,
    detect_exam_landmarks,
    find_patient,
    get_or_detect_landmarks,
    load_store,
)

_store_option = click.option(
    "--store",
    "store_root",
    envvar="BACKREG_STORE",
    required=True,
    type=click.Path(file_okay=False, path_type=Path),
    help="Store root directory (or set BACKREG_STORE).",
)
_config_option = click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="Optional JSON config with threshold-band and palette overrides.",
)


def _load_config(path: Path | None) -> dict:
    if path is None:
        return {}
    try:
        return json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise click.UsageError(f"cannot read config {path}: {exc}")


def _band_from_config(d: dict) -> ThresholdBand:
    space = ColorSpace.HSV if d.get("space", "hsv").lower() == "hsv" else ColorSpace.RGB
    return ThresholdBand(
        ColorTriple(*d["lower"], space=space), ColorTriple(*d["upper"], space=space)
    )


def _bands_from_config(cfg: dict) -> dict[str, ThresholdBand]:
    return {name: _band_from_config(d) for name, d in cfg.get("bands", {}).items()}


def _palette_from_config(cfg: dict) -> dict:
    palette = dict(DEFAULT_PALETTE)
    for role, rgb in cfg.get("palette", {}).items():
        palette[role] = tuple(int(v) for v in rgb)
    return palette


def _lookup_exam(store_root: Path, patient_id: str, exam_id: str) -> tuple[list[PatientRecord], ExamRecord]:
    records = load_store(store_root)
    try:
        patient = find_patient(records, patient_id)
    except KeyError:
        raise click.UsageError(f"unknown patient '{patient_id}'")
    try:
        return records, patient.exam(exam_id)
    except KeyError:
        raise click.UsageError(f"patient '{patient_id}' has no exam '{exam_id}'")


def _echo_json(obj) -> None:
    click.echo(json.dumps(obj, indent=2))


@click.group()
def cli():
    """Landmark detection, rigid registration, and follow-up blending."""


@cli.command()
@_store_option
@click.option("--patient", required=True)
@click.option("--exam", "exam_id", required=True)
@click.option("--debug-masks", is_flag=True, help="Write per-stage mask PNGs beside the exam.")
@_config_option
def detect(store_root: Path, patient: str, exam_id: str, debug_masks: bool, config_path):
    """Detect landmarks for one exam and update its cache."""
    cfg = _load_config(config_path)
    bands = _bands_from_config(cfg)
    _, exam = _lookup_exam(store_root, patient, exam_id)
    landmarks = get_or_detect_landmarks(exam, bands)
    if debug_masks:
        debug: dict = {}
        detect_exam_landmarks(exam, bands, debug=debug)
        for stage, value in debug.items():
            if isinstance(value, BinaryMask):
                write_png(value.to_gray_image(), exam.exam_dir / f"debug_{stage}.png")
            elif isinstance(value, RasterImage):
                write_png(value, exam.exam_dir / f"debug_{stage}.png")
    _echo_json(landmarks.to_json())


@cli.command()
@_store_option
@click.option("--patient", required=True)
@click.option("--source", "source_id", required=True)
@click.option("--target", "target_id", required=True)
@click.option("--method", type=click.Choice(METHODS), default="angle", show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False, path_type=Path), default=None)
@_config_option
def register(store_root, patient, source_id, target_id, method, out_path, config_path):
    """Register one source exam onto a target exam of the same patient."""
    cfg = _load_config(config_path)
    bands = _bands_from_config(cfg)
    _, source = _lookup_exam(store_root, patient, source_id)
    _, target = _lookup_exam(store_root, patient, target_id)
    report, registered = register_exam_pair(source, target, method, bands)
    if out_path is None:
        out_path = source.exam_dir / f"registered_{source_id}_to_{target_id}_{method}.png"
    write_png(registered, out_path)
    doc = report.to_json()
    doc["registered_image"] = str(out_path)
    _echo_json(doc)


@cli.command()
@_store_option
@click.option("--patient", required=True)
@click.option("--target", "target_id", required=True)
@click.option("--sources", "sources_arg", required=True, help="Comma-separated source exam ids.")
@click.option("--alpha", type=float, required=True)
@click.option("--method", type=click.Choice(METHODS), default="angle", show_default=True)
@click.option("--overlay", is_flag=True, help="Stamp the target's landmarks on the blend.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False, path_type=Path), required=True)
@_config_option
def blend(store_root, patient, target_id, sources_arg, alpha, method, overlay, out_path, config_path):
    """Blend registered sources over the target exam's image."""
    if not 0.0 <= alpha <= 1.0:
        raise click.UsageError(f"alpha must be within [0, 1], got {alpha}")
    cfg = _load_config(config_path)
    bands = _bands_from_config(cfg)
    palette = _palette_from_config(cfg)
    _, target = _lookup_exam(store_root, patient, target_id)
    sources = []
    for sid in [s for s in sources_arg.split(",") if s]:
        _, exam = _lookup_exam(store_root, patient, sid)
        sources.append(exam)
    image, reports = blend_followup(target, sources, alpha, method, overlay, bands, palette)
    write_png(image, out_path)
    _echo_json(
        {
            "out": str(out_path),
            "alpha": alpha,
            "sources": [s.exam_id for s in sources],
            "reports": [r.to_json() for r in reports],
        }
    )


@cli.command()
@_store_option
@click.option("--patient", required=True)
@click.option("--exam", "exam_id", required=True)
@click.option("--canny-low", type=float, default=50.0, show_default=True)
@click.option("--canny-high", type=float, default=150.0, show_default=True)
@click.option("--close-radius", type=int, default=2, show_default=True)
def report(store_root, patient, exam_id, canny_low, canny_high, close_radius):
    """Shape-feature report of the exam's edge components (aspect ratio,
    circularity) for threshold tuning and marker inspection."""
    from .pipeline import exam_display_image

    _, exam = _lookup_exam(store_root, patient, exam_id)
    gray = to_gray(exam_display_image(exam))
    edges = canny_edges(gray, canny_low, canny_high)
    closed = morph_close(edges, close_radius)
    rows = []
    for region in connected_components(closed):
        entry = {"label": region.label, "area": region.area, "bbox": list(region.bbox)}
        try:
            entry.update(shape_features(region))
        except SegmentationError:
            entry.update({"aspect_ratio": None, "circularity": None})
        rows.append(entry)
    _echo_json({"exam": exam_id, "regions": rows})


@cli.command("gen-fixtures")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False, path_type=Path))
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--count", type=int, default=3, show_default=True, help="Number of patients.")
def gen_fixtures(out_dir: Path, seed: int, count: int):
    """Generate a deterministic synthetic store with ground truth."""
    from .fixtures import generate_store

    records = generate_store(out_dir, seed=seed, patients=count)
    _echo_json(
        {
            "out": str(out_dir),
            "seed": seed,
            "patients": len(records),
            "exams": sum(len(p.exams) for p in records),
        }
    )


@cli.command()
@_store_option
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option(
    "--static-dir",
    type=click.Path(file_okay=False, path_type=Path),
    default=None,
    help="Directory of built viewer assets to serve at /ui.",
)
@_config_option
def serve(store_root, host, port, static_dir, config_path):
    """Run the HTTP service over the store."""
    import uvicorn

    from .service import create_app

    cfg = _load_config(config_path)
    app = create_app(
        store_root,
        static_dir=static_dir,
        bands=_bands_from_config(cfg),
        palette=_palette_from_config(cfg),
    )
    uvicorn.run(app, host=host, port=port)


def main(argv: list[str] | None = None) -> int:
    """Entry point with the documented exit-code map."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return 4
    except click.Abort:
        return 4
    except DetectionError as exc:
        click.echo(f"detection failed: {exc}", err=True)
        return 2
    except DegenerateLandmarksError as exc:
        click.echo(f"registration failed: {exc}", err=True)
        return 3
    except StoreError as exc:
        click.echo(f"store error: {exc}", err=True)
        return 4


if __name__ == "__main__":
    sys.exit(main())
