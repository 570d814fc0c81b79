"""Command-line entry point for the three-step workflow plus the service.

Subcommands map one-to-one onto engine operations::

    dataset ingest|convert|split|stats|advise|frames
    model   list|select
    train   init|start|status|package
    app     scaffold|manifest|deploy-lanes
    serve

Exit codes: 0 success, 1 validation failure, 2 usage error,
3 environment/IO failure. ``--json`` prints the underlying operation's
result verbatim so scripted callers and the web wizard share one
serialization. File outputs live under the project layout
``project/{dataset,splits,runs,bundles}``.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import shutil
import subprocess
import sys
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from . import annotations as ann
from . import appforge, dataset, models, training
from .domain import validate_annotation_set
from .errors import FieldForgeError, MissingDims, ParseError

ENV_REGISTRY = "FIELDFORGE_REGISTRY"

_IMAGE_SUFFIXES = {".jpg", ".jpeg", ".png", ".bmp", ".gif", ".tif", ".tiff", ".webp"}

# Faults that point at the machine, not the data.
_ENVIRONMENT_CODES = {"TRAINER_UNAVAILABLE", "ARTIFACT_MISSING"}


@dataclass
class CommandResult:
    exit_code: int
    artifacts: list[str]
    summary: str
    payload: object = None


def main(argv: Optional[Sequence[str]] = None) -> None:
    result = execute(list(sys.argv[1:] if argv is None else argv))
    if result.summary:
        print(result.summary)
    sys.exit(result.exit_code)


def execute(argv: Sequence[str], working_dir: str | Path | None = None) -> CommandResult:
    """Run one CLI invocation and report what happened."""
    parser = _build_parser()
    try:
        args = parser.parse_args(list(argv))
    except SystemExit as exc:
        # argparse already printed usage/--help output
        code = 0 if exc.code in (0, None) else 2
        return CommandResult(exit_code=code, artifacts=[], summary="")
    base = Path(working_dir) if working_dir else Path.cwd()
    try:
        result = args.handler(args, base)
    except FieldForgeError as exc:
        code = 3 if exc.code in _ENVIRONMENT_CODES else 1
        return CommandResult(exit_code=code, artifacts=[], summary=f"error: {exc}")
    except OSError as exc:
        return CommandResult(exit_code=3, artifacts=[], summary=f"io error: {exc}")
    if getattr(args, "json", False) and result.payload is not None:
        result.summary = json.dumps(result.payload, indent=2, sort_keys=True)
    return result


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fieldforge",
        description="dataset -> trained model -> deployable app bundle, plus the field service",
    )
    top = parser.add_subparsers(dest="group", required=True)

    # dataset -----------------------------------------------------------
    ds = top.add_parser("dataset", help="dataset creation and splitting")
    ds_sub = ds.add_subparsers(dest="command", required=True)

    p = ds_sub.add_parser("ingest", help="parse external annotations into the project")
    p.add_argument("project", help="project directory")
    p.add_argument("--format", required=True, choices=["voc", "coco", "yolo", "mturk", "folders"])
    p.add_argument("--input", required=True, help="annotation file or directory")
    p.add_argument("--images", help="image directory (dims for yolo/mturk)")
    p.add_argument("--labels", help="label file for yolo")
    p.add_argument("--dims", help="JSON file of media_id -> [width, height]")
    p.add_argument("--media-field", default="image_url")
    p.add_argument("--answer-field", default="answer")
    p.add_argument("--class-field", default="label")
    p.add_argument("--geometry", choices=["absolute_px", "normalized"], default="absolute_px")
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=_cmd_dataset_ingest)

    p = ds_sub.add_parser("convert", help="export the project annotations")
    p.add_argument("project")
    p.add_argument("--to", required=True, choices=["voc", "coco", "yolo"])
    p.add_argument("--out", help="output directory (default project/dataset/export-<fmt>)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=_cmd_dataset_convert)

    p = ds_sub.add_parser("split", help="deterministic stratified train/test/eval split")
    p.add_argument("project")
    p.add_argument("--ratio", default="6:2:2")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=_cmd_dataset_split)

    p = ds_sub.add_parser("stats", help="per-class dataset statistics")
    p.add_argument("project")
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=_cmd_dataset_stats)

    p = ds_sub.add_parser("advise", help="data-sufficiency tiers per class")
    p.add_argument("project")
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=_cmd_dataset_advise)

    p = ds_sub.add_parser("frames", help="plan (and optionally run) frame extraction")
    p.add_argument("--duration", type=float, help="video duration in seconds")
    p.add_argument("--fps", type=float, help="video frame rate")
    p.add_argument("--rate", type=float, required=True, help="requested extraction rate (fps)")
    p.add_argument("--video-id", default="video")
    p.add_argument("--media", help="video file; frames are decoded with ffmpeg")
    p.add_argument("--out", help="plan JSON path or frame output directory with --media")
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=_cmd_dataset_frames)

    # model ---------------------------------------------------------------
    md = top.add_parser("model", help="model registry and selection")
    md_sub = md.add_subparsers(dest="command", required=True)

    p = md_sub.add_parser("list", help="show the model registry")
    p.add_argument("--registry", help=f"registry JSON (default ${ENV_REGISTRY} or builtin)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=_cmd_model_list)

    p = md_sub.add_parser("select", help="pick the best model under constraints")
    p.add_argument("--registry")
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--task", default="detection", choices=["detection", "classification", "segmentation"])
    p.add_argument("--max-inference-ms", type=float)
    p.add_argument("--max-size-mb", type=float)
    p.add_argument("--min-map", type=float)
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=_cmd_model_select)

    # train -----------------------------------------------------------------
    tr = top.add_parser("train", help="training orchestration")
    tr_sub = tr.add_subparsers(dest="command", required=True)

    p = tr_sub.add_parser("init", help="build the training config")
    p.add_argument("project")
    p.add_argument("--model", required=True, help="registry entry name")
    p.add_argument("--registry")
    p.add_argument("--base-weights")
    p.add_argument("--max-steps", type=int)
    p.add_argument("--threshold", type=float, help="convergence loss threshold")
    p.add_argument("--window", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=_cmd_train_init)

    p = tr_sub.add_parser("start", help="hand the config to a trainer and monitor it")
    p.add_argument("project")
    p.add_argument("--trainer", default="mock", choices=["mock"])
    p.add_argument("--losses", help="JSON file with the scripted mock loss curve")
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=_cmd_train_start)

    p = tr_sub.add_parser("status", help="show a run's status and last loss")
    p.add_argument("run_dir")
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=_cmd_train_status)

    p = tr_sub.add_parser("package", help="package a finished run for embedding")
    p.add_argument("run_dir")
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=_cmd_train_package)

    # app ----------------------------------------------------------------------
    ap = top.add_parser("app", help="app bundle generation")
    ap_sub = ap.add_subparsers(dest="command", required=True)

    p = ap_sub.add_parser("scaffold", help="instantiate a template into a bundle descriptor")
    p.add_argument("project")
    p.add_argument("--template", required=True)
    p.add_argument("--name", required=True)
    p.add_argument("--color", default="#2266AA")
    p.add_argument("--icon")
    p.add_argument("--logo")
    p.add_argument("--info-text")
    p.add_argument("--package", help="package.json or run directory (default: latest run)")
    p.add_argument("--expert", action="store_true", help="enable expert mode")
    p.add_argument("--no-model", action="store_true", help="expert-only bundle without a model")
    p.add_argument("--threshold", type=float, default=appforge.DEFAULT_CONFIDENCE_THRESHOLD)
    p.add_argument("--platforms", default="ios,android")
    p.add_argument("--upload-endpoint", default=appforge.DEFAULT_UPLOAD_ENDPOINT)
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=_cmd_app_scaffold)

    p = ap_sub.add_parser("manifest", help="emit the build manifest for one platform")
    p.add_argument("bundle", help="bundle directory (contains descriptor.json)")
    p.add_argument("--platform", required=True, choices=["ios", "android"])
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=_cmd_app_manifest)

    p = ap_sub.add_parser("deploy-lanes", help="emit the deployment lane configuration")
    p.add_argument("bundle")
    p.add_argument("--platform", required=True, choices=["ios", "android"])
    p.add_argument("--channel", required=True, choices=["beta", "release"])
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=_cmd_app_deploy_lanes)

    # serve ------------------------------------------------------------------------
    p = top.add_parser("serve", help="run the observation service")
    p.add_argument("--port", type=int)
    p.add_argument("--storage", help="storage root (default: in-memory)")
    p.set_defaults(handler=_cmd_serve, json=False)

    return parser


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------

def _resolve(base: Path, value: str | None) -> Path:
    path = Path(value) if value else Path(".")
    return path if path.is_absolute() else base / path


def _annotations_path(project: Path) -> Path:
    return project / "dataset" / "annotations.json"


def _load_annotations(project: Path):
    path = _annotations_path(project)
    if not path.is_file():
        raise ParseError(f"no ingested dataset at {path}; run 'dataset ingest' first")
    return ann.annotation_set_from_json(path.read_text())


def _image_dims(path: Path) -> tuple[int, int]:
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(path) as img:
            return img.size
    except (UnidentifiedImageError, OSError) as exc:
        raise MissingDims(f"cannot read image dimensions from {path}: {exc}") from exc


def _iter_images(directory: Path):
    for path in sorted(directory.rglob("*")):
        if path.is_file() and path.suffix.lower() in _IMAGE_SUFFIXES:
            yield path


def _registry_for(args, base: Path) -> list[models.ModelRegistryEntry]:
    explicit = getattr(args, "registry", None) or os.environ.get(ENV_REGISTRY)
    if explicit:
        return models.load_registry(_resolve(base, explicit))
    return models.default_registry()


def _entry_payload(entry: models.ModelRegistryEntry) -> dict:
    payload = {
        "name": entry.name,
        "inference_ms": entry.inference_ms,
        "map_coco": entry.map_coco,
        "size_mb": entry.size_mb,
        "task": entry.task.value,
        "class_capacity": entry.class_capacity,
    }
    if entry.notes:
        payload["notes"] = entry.notes
    return payload


# ---------------------------------------------------------------------------
# dataset commands
# ---------------------------------------------------------------------------

def _cmd_dataset_ingest(args, base: Path) -> CommandResult:
    project = _resolve(base, args.project)
    source = _resolve(base, args.input)
    if args.format == "voc":
        docs = [(p.name, p.read_text()) for p in sorted(source.glob("*.xml"))] if source.is_dir() else [
            (source.name, source.read_text())
        ]
        result = ann.parse_voc(docs)
    elif args.format == "coco":
        result = ann.parse_coco(source.read_text())
    elif args.format == "yolo":
        result = _ingest_yolo(args, base, source)
    elif args.format == "mturk":
        result = _ingest_mturk(args, base, source)
    else:
        result = _ingest_folders(source)

    out = _annotations_path(project)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(ann.annotation_set_to_json(result))
    report = validate_annotation_set(result)
    summary = (
        f"ingested {len(result.images)} images, {len(result.label_map)} classes -> {out}"
    )
    if report.warnings:
        summary += f" ({len(report.warnings)} warnings)"
    return CommandResult(
        exit_code=0,
        artifacts=[str(out)],
        summary=summary,
        payload={
            "images": len(result.images),
            "classes": list(result.label_map),
            "task": result.task.value,
            "warnings": [f"{w.code}: {w.media_id}" for w in report.warnings],
            "out": str(out),
        },
    )


def _ingest_yolo(args, base: Path, source: Path):
    if not args.labels:
        raise ParseError("yolo ingest requires --labels (class-name file)")
    if not args.images:
        raise ParseError("yolo ingest requires --images (directory with the image files)")
    labels = _resolve(base, args.labels).read_text().splitlines()
    images_dir = _resolve(base, args.images)
    dims_by_stem = {p.stem: _image_dims(p) for p in _iter_images(images_dir)}
    files = []
    for label_path in sorted(source.glob("*.txt")):
        stem = label_path.stem
        if stem not in dims_by_stem:
            raise MissingDims(f"no image for label file {label_path.name} under {images_dir}")
        w, h = dims_by_stem[stem]
        files.append((stem, w, h, label_path.read_text()))
    return ann.parse_yolo(files, labels)


def _ingest_mturk(args, base: Path, source: Path):
    rows = ann.parse_mturk_csv(source.read_text())
    if args.dims:
        raw = json.loads(_resolve(base, args.dims).read_text())
        dims = {k: (int(v[0]), int(v[1])) for k, v in raw.items()}
    elif args.images:
        dims = {p.stem: _image_dims(p) for p in _iter_images(_resolve(base, args.images))}
    else:
        raise ParseError("mturk ingest requires --dims or --images")
    mapping = ann.MTurkFieldMapping(
        media_field=args.media_field,
        answer_field=args.answer_field,
        answer_geometry=ann.AnswerGeometry(args.geometry),
        class_field=args.class_field,
    )
    return ann.import_mturk(rows, mapping, dims)


def _ingest_folders(source: Path):
    if not source.is_dir():
        raise ParseError(f"{source} is not a directory")
    listing: dict[str, list[tuple[str, int, int]]] = {}
    for class_dir in sorted(p for p in source.iterdir() if p.is_dir()):
        entries = []
        for image_path in _iter_images(class_dir):
            w, h = _image_dims(image_path)
            entries.append((f"{class_dir.name}/{image_path.stem}", w, h))
        listing[class_dir.name] = entries
    return ann.ingest_classification_folders(listing)


def _cmd_dataset_convert(args, base: Path) -> CommandResult:
    project = _resolve(base, args.project)
    annotations = _load_annotations(project)
    tag = {
        "voc": ann.FormatTag.VOC_XML,
        "coco": ann.FormatTag.COCO_JSON,
        "yolo": ann.FormatTag.YOLO_TXT,
    }[args.to]
    docs = ann.export(annotations, tag)
    out_dir = _resolve(base, args.out) if args.out else project / "dataset" / f"export-{args.to}"
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for doc in docs:
        path = out_dir / doc.name
        path.write_text(doc.text)
        written.append(str(path))
    return CommandResult(
        exit_code=0,
        artifacts=written,
        summary=f"wrote {len(written)} {args.to} documents -> {out_dir}",
        payload={"format": args.to, "files": written},
    )


def _cmd_dataset_split(args, base: Path) -> CommandResult:
    project = _resolve(base, args.project)
    annotations = _load_annotations(project)
    ratio = dataset.SplitRatio.parse(args.ratio)
    seed = args.seed if args.seed is not None else random.SystemRandom().randrange(2**31)
    result = dataset.split_dataset(annotations, ratio, seed)
    out_dir = project / "splits"
    written = [str(p) for p in dataset.write_split_manifests(result, out_dir)]
    sizes = result.sizes()
    return CommandResult(
        exit_code=0,
        artifacts=written,
        summary=(
            f"split {sum(sizes)} images -> train {sizes[0]} / test {sizes[1]} / "
            f"eval {sizes[2]} (ratio {args.ratio}, seed {seed})"
        ),
        payload={
            "sizes": {"train": sizes[0], "test": sizes[1], "eval": sizes[2]},
            "seed": seed,
            "ratio": args.ratio,
            "files": written,
        },
    )


def _cmd_dataset_stats(args, base: Path) -> CommandResult:
    annotations = _load_annotations(_resolve(base, args.project))
    stats = dataset.dataset_stats(annotations)
    per_class = {
        annotations.label_map.name_of(cid): {
            "images": stats.per_class_image_count[cid],
            "boxes": stats.per_class_box_count[cid],
        }
        for cid in range(len(annotations.label_map))
    }
    lines = [f"total {stats.total_images} images ({stats.unlabeled_images} unlabeled)"]
    lines += [f"  {name}: {c['images']} images, {c['boxes']} boxes" for name, c in per_class.items()]
    return CommandResult(
        exit_code=0,
        artifacts=[],
        summary="\n".join(lines),
        payload={
            "total_images": stats.total_images,
            "unlabeled_images": stats.unlabeled_images,
            "per_class": per_class,
        },
    )


def _cmd_dataset_advise(args, base: Path) -> CommandResult:
    annotations = _load_annotations(_resolve(base, args.project))
    stats = dataset.dataset_stats(annotations)
    report = dataset.advise_sufficiency(stats)
    tiers = {
        annotations.label_map.name_of(cid): tier.value
        for cid, tier in sorted(report.per_class_tier.items())
    }
    lines = [
        f"{name}: {tier} ({stats.per_class_image_count[annotations.label_map.id_of(name)]} images)"
        for name, tier in tiers.items()
    ]
    return CommandResult(
        exit_code=0,
        artifacts=[],
        summary="\n".join(lines),
        payload={"tiers": tiers, "notes": list(report.notes)},
    )


def _cmd_dataset_frames(args, base: Path) -> CommandResult:
    media = _resolve(base, args.media) if args.media else None
    duration, fps = args.duration, args.fps
    if media is not None and (duration is None or fps is None):
        duration, fps = _probe_video(media)
    if duration is None or fps is None:
        raise ParseError("provide --duration and --fps, or --media for probing")
    plan = dataset.plan_frame_extraction(
        duration, fps, args.rate, source_video=args.video_id
    )
    payload = {
        "source_video": plan.source_video,
        "effective_rate_fps": plan.effective_rate_fps,
        "timestamps_s": list(plan.timestamps_s),
        "warnings": list(plan.warnings),
    }
    artifacts = []
    if media is not None:
        out_dir = _resolve(base, args.out) if args.out else media.parent / f"{media.stem}-frames"
        artifacts = _extract_frames(media, plan, out_dir)
        payload["frames"] = artifacts
        summary = f"extracted {len(artifacts)} frames -> {out_dir}"
    elif args.out:
        out = _resolve(base, args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        artifacts = [str(out)]
        summary = f"planned {len(plan.timestamps_s)} frames at {plan.effective_rate_fps} fps -> {out}"
    else:
        summary = f"planned {len(plan.timestamps_s)} frames at {plan.effective_rate_fps} fps"
    for warning in plan.warnings:
        summary += f"\nwarning: {warning}"
    return CommandResult(exit_code=0, artifacts=artifacts, summary=summary, payload=payload)


def _require_ffmpeg(tool: str) -> str:
    found = shutil.which(tool)
    if not found:
        raise OSError(
            f"{tool} not found on PATH; install ffmpeg or pass --duration/--fps "
            "to plan without decoding"
        )
    return found


def _probe_video(media: Path) -> tuple[float, float]:
    ffprobe = _require_ffmpeg("ffprobe")
    out = subprocess.run(
        [
            ffprobe, "-v", "error", "-select_streams", "v:0",
            "-show_entries", "stream=avg_frame_rate:format=duration",
            "-of", "json", str(media),
        ],
        capture_output=True,
        text=True,
        check=True,
    )
    info = json.loads(out.stdout)
    num, _, den = info["streams"][0]["avg_frame_rate"].partition("/")
    fps = float(num) / float(den or 1)
    return float(info["format"]["duration"]), fps


def _extract_frames(media: Path, plan: dataset.FramePlan, out_dir: Path) -> list[str]:
    ffmpeg = _require_ffmpeg("ffmpeg")
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for i, t in enumerate(plan.timestamps_s):
        frame = out_dir / f"{plan.source_video}_{i:06d}.png"
        subprocess.run(
            [ffmpeg, "-v", "error", "-ss", str(t), "-i", str(media), "-frames:v", "1", "-y", str(frame)],
            check=True,
            capture_output=True,
        )
        written.append(str(frame))
    return written


# ---------------------------------------------------------------------------
# model commands
# ---------------------------------------------------------------------------

def _cmd_model_list(args, base: Path) -> CommandResult:
    registry = _registry_for(args, base)
    lines = [
        f"{e.name}: {e.inference_ms} ms, {e.map_coco} mAP, {e.size_mb} MB"
        + (f", up to {e.class_capacity} classes" if e.class_capacity else "")
        for e in registry
    ]
    return CommandResult(
        exit_code=0,
        artifacts=[],
        summary="\n".join(lines),
        payload=[_entry_payload(e) for e in registry],
    )


def _cmd_model_select(args, base: Path) -> CommandResult:
    registry = _registry_for(args, base)
    constraints = models.SelectionConstraints(
        num_classes=args.classes,
        task=args.task,
        max_inference_ms=args.max_inference_ms,
        max_size_mb=args.max_size_mb,
        min_map=args.min_map,
    )
    entry = models.select_model(registry, constraints)
    summary = entry.name
    if entry.notes:
        summary += f"\nnote: {entry.notes}"
    return CommandResult(
        exit_code=0, artifacts=[], summary=summary, payload=_entry_payload(entry)
    )


# ---------------------------------------------------------------------------
# train commands
# ---------------------------------------------------------------------------

def _cmd_train_init(args, base: Path) -> CommandResult:
    project = _resolve(base, args.project)
    annotations = _load_annotations(project)
    split = dataset.read_split_manifests(project / "splits")
    registry = _registry_for(args, base)
    try:
        model = next(e for e in registry if e.name == args.model)
    except StopIteration:
        raise ParseError(
            f"model {args.model!r} not in registry; run 'model list'"
        ) from None
    overrides: dict[str, object] = {}
    for key, value in (
        ("base_weights", args.base_weights),
        ("max_steps", args.max_steps),
        ("loss_threshold", args.threshold),
        ("window", args.window),
        ("patience", args.patience),
    ):
        if value is not None:
            overrides[key] = value
    config = training.build_training_config(annotations.label_map, model, split, overrides)
    out = project / "runs" / "config.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(training.config_to_json(config))
    return CommandResult(
        exit_code=0,
        artifacts=[str(out)],
        summary=f"training config for {model.name} -> {out}",
        payload=training.config_to_dict(config),
    )


def _cmd_train_start(args, base: Path) -> CommandResult:
    project = _resolve(base, args.project)
    config_path = project / "runs" / "config.json"
    if not config_path.is_file():
        raise ParseError(f"no config at {config_path}; run 'train init' first")
    config = training.config_from_dict(json.loads(config_path.read_text()))
    annotations = _load_annotations(project)
    losses = None
    if args.losses:
        losses = json.loads(_resolve(base, args.losses).read_text())
    trainer = training.MockTrainer(losses=losses)
    run_id = uuid.uuid4().hex[:12]
    run_dir = project / "runs" / run_id
    run = training.start_training(config, trainer, run_dir, annotations, run_id=run_id)
    run = training.run_to_completion(run, trainer, run_dir)
    trainer.finalize(run_dir / "handoff")
    last = run.loss_history[-1] if run.loss_history else None
    return CommandResult(
        exit_code=0,
        artifacts=[str(run_dir / "run.json")],
        summary=(
            f"run {run.run_id}: {run.status.value}"
            + (f" at step {last[0]} (loss {last[1]:.4f})" if last else "")
        ),
        payload={
            "run_id": run.run_id,
            "run_dir": str(run_dir),
            "status": run.status.value,
            "steps_recorded": len(run.loss_history),
            "last_step": last[0] if last else None,
            "last_loss": last[1] if last else None,
        },
    )


def _cmd_train_status(args, base: Path) -> CommandResult:
    run_dir = _resolve(base, args.run_dir)
    run = training.load_run(run_dir)
    last = run.loss_history[-1] if run.loss_history else None
    return CommandResult(
        exit_code=0,
        artifacts=[],
        summary=(
            f"run {run.run_id}: {run.status.value}"
            + (f", last loss {last[1]:.4f} at step {last[0]}" if last else "")
        ),
        payload={
            "run_id": run.run_id,
            "status": run.status.value,
            "last_step": last[0] if last else None,
            "last_loss": last[1] if last else None,
            "loss_history": [[s, l] for s, l in run.loss_history],
        },
    )


def _cmd_train_package(args, base: Path) -> CommandResult:
    run_dir = _resolve(base, args.run_dir)
    run = training.load_run(run_dir)
    artifacts = training.read_trainer_artifacts(run_dir / "handoff")
    package = training.package_model(run, artifacts)
    out = run_dir / "package.json"
    out.write_text(training.package_to_json(package))
    return CommandResult(
        exit_code=0,
        artifacts=[str(out)],
        summary=f"packaged {package.runtime_format_tag} model ({package.checksum[:12]}...) -> {out}",
        payload=json.loads(training.package_to_json(package)),
    )


# ---------------------------------------------------------------------------
# app commands
# ---------------------------------------------------------------------------

def _find_package(args, base: Path, project: Path) -> Optional[training.ModelPackage]:
    if args.no_model:
        return None
    if args.package:
        candidate = _resolve(base, args.package)
        path = candidate / "package.json" if candidate.is_dir() else candidate
        if not path.is_file():
            raise ParseError(f"no model package at {path}")
        return training.package_from_json(path.read_text())
    runs_dir = project / "runs"
    candidates = sorted(runs_dir.glob("*/package.json")) if runs_dir.is_dir() else []
    if not candidates:
        raise ParseError(
            "no packaged run found; run 'train package' or pass --package/--no-model"
        )
    return training.package_from_json(candidates[-1].read_text())


def _cmd_app_scaffold(args, base: Path) -> CommandResult:
    project = _resolve(base, args.project)
    try:
        template = appforge.template_by_id(args.template)
    except KeyError:
        raise ParseError(
            f"unknown template {args.template!r}; available: "
            + ", ".join(t.template_id for t in appforge.template_catalog())
        ) from None
    customization = appforge.Customization(
        app_name=args.name,
        gui_color=args.color,
        icon=args.icon,
        logo=args.logo,
        info_panel_text=args.info_text,
        expert_mode_enabled=args.expert or args.no_model,
        confidence_threshold=args.threshold,
    )
    package = _find_package(args, base, project)
    platforms = [p.strip() for p in args.platforms.split(",") if p.strip()]
    descriptor = appforge.instantiate_template(
        template,
        customization,
        model_package=package,
        platforms=platforms,
        upload_endpoint=args.upload_endpoint,
    )
    bundle_dir = project / "bundles" / descriptor.bundle_id
    bundle_dir.mkdir(parents=True, exist_ok=True)
    out = bundle_dir / "descriptor.json"
    out.write_text(appforge.descriptor_to_json(descriptor))
    return CommandResult(
        exit_code=0,
        artifacts=[str(out)],
        summary=f"bundle {descriptor.bundle_id} ({args.template}) -> {out}",
        payload=json.loads(appforge.descriptor_to_json(descriptor)),
    )


def _load_descriptor(base: Path, bundle: str) -> tuple[Path, appforge.AppBundleDescriptor]:
    bundle_dir = _resolve(base, bundle)
    path = bundle_dir / "descriptor.json" if bundle_dir.is_dir() else bundle_dir
    if not path.is_file():
        raise ParseError(f"no bundle descriptor at {path}")
    return path.parent, appforge.descriptor_from_json(path.read_text())


def _cmd_app_manifest(args, base: Path) -> CommandResult:
    bundle_dir, descriptor = _load_descriptor(base, args.bundle)
    manifest = appforge.emit_build_manifest(descriptor, args.platform)
    out = bundle_dir / f"manifest.{args.platform}.json"
    out.write_text(manifest)
    return CommandResult(
        exit_code=0,
        artifacts=[str(out)],
        summary=f"build manifest for {args.platform} -> {out}",
        payload=json.loads(manifest),
    )


def _cmd_app_deploy_lanes(args, base: Path) -> CommandResult:
    bundle_dir, descriptor = _load_descriptor(base, args.bundle)
    lanes = appforge.emit_deploy_lanes(descriptor, args.platform, args.channel)
    text = appforge.deploy_config_to_json(lanes)
    out = bundle_dir / f"lanes.{args.platform}.{args.channel}.json"
    out.write_text(text)
    return CommandResult(
        exit_code=0,
        artifacts=[str(out)],
        summary=f"{args.channel} lanes for {args.platform} -> {out}",
        payload=json.loads(text),
    )


# ---------------------------------------------------------------------------
# serve
# ---------------------------------------------------------------------------

def _cmd_serve(args, base: Path) -> CommandResult:
    from .service import http as service_http

    if args.storage:
        os.environ[service_http.ENV_STORAGE_ROOT] = str(_resolve(base, args.storage))
    service_http.serve(port=args.port)
    return CommandResult(exit_code=0, artifacts=[], summary="service stopped")


if __name__ == "__main__":
    main()
