"""Shared domain types and cross-cutting validation.

The canonical annotation model every format parser converges to. All
types are immutable values; validation is pure and returns reports
instead of raising, so malformed data can be inspected rather than
merely rejected.

Coordinate convention: boxes are real-valued pixels, origin top-left,
min-inclusive / max-exclusive.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional, Sequence

# Validation issue codes (errors unless noted).
EMPTY_LABEL_MAP = "EMPTY_LABEL_MAP"
EMPTY_CLASS_NAME = "EMPTY_CLASS_NAME"
DUPLICATE_CLASS = "DUPLICATE_CLASS"
DUPLICATE_MEDIA_ID = "DUPLICATE_MEDIA_ID"
BOX_OUT_OF_BOUNDS = "BOX_OUT_OF_BOUNDS"
DEGENERATE_BOX = "DEGENERATE_BOX"
DANGLING_MEDIA_ID = "DANGLING_MEDIA_ID"
UNKNOWN_CLASS_ID = "UNKNOWN_CLASS_ID"
UNLABELED_IMAGE = "UNLABELED_IMAGE"  # warning


class Task(str, Enum):
    DETECTION = "detection"
    CLASSIFICATION = "classification"


class ImageSource(str, Enum):
    STILL = "still"
    EXTRACTED_FRAME = "extracted_frame"


def canonical_class_name(name: str) -> str:
    """Class identity is case-insensitive after trimming whitespace."""
    return name.strip().casefold()


@dataclass(frozen=True)
class LabelMap:
    """Ordered class names; a class id is its 0-based position."""

    classes: tuple[str, ...]

    def __init__(self, classes: Sequence[str]):
        object.__setattr__(self, "classes", tuple(classes))

    def __len__(self) -> int:
        return len(self.classes)

    def __iter__(self):
        return iter(self.classes)

    def name_of(self, class_id: int) -> str:
        return self.classes[class_id]

    def id_of(self, name: str) -> int:
        """Position of ``name`` under canonical (trimmed, case-folded) identity."""
        wanted = canonical_class_name(name)
        for i, cls in enumerate(self.classes):
            if canonical_class_name(cls) == wanted:
                return i
        raise KeyError(name)


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in pixels; ``class_id`` indexes a LabelMap."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float
    class_id: int
    confidence: Optional[float] = None

    def __post_init__(self):
        if self.confidence is not None and not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min


@dataclass(frozen=True)
class ImageRecord:
    """Identity and dimensions of one image; no pixel data."""

    media_id: str
    width: int
    height: int
    source: ImageSource = ImageSource.STILL
    source_video: Optional[str] = None
    timestamp_s: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "source", ImageSource(self.source))
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"{self.media_id}: non-positive dimensions {self.width}x{self.height}")
        extracted = self.source == ImageSource.EXTRACTED_FRAME
        has_provenance = self.source_video is not None and self.timestamp_s is not None
        if extracted != has_provenance:
            raise ValueError(
                f"{self.media_id}: source_video and timestamp_s must be present "
                "exactly when source is extracted_frame"
            )


@dataclass(frozen=True)
class AnnotationSet:
    """Images plus their labels; the hub all format parsers converge to.

    Detection sets carry ``boxes`` (per media id), classification sets
    carry ``class_of``; the two are exclusive per set.
    """

    task: Task
    label_map: LabelMap
    images: tuple[ImageRecord, ...]
    boxes: Mapping[str, tuple[BoundingBox, ...]] = field(default_factory=dict)
    class_of: Mapping[str, int] = field(default_factory=dict)

    def __init__(
        self,
        task: Task,
        label_map: LabelMap,
        images: Sequence[ImageRecord],
        boxes: Mapping[str, Sequence[BoundingBox]] | None = None,
        class_of: Mapping[str, int] | None = None,
    ):
        object.__setattr__(self, "task", Task(task))
        object.__setattr__(self, "label_map", label_map)
        object.__setattr__(self, "images", tuple(images))
        object.__setattr__(
            self, "boxes", {m: tuple(bs) for m, bs in (boxes or {}).items()}
        )
        object.__setattr__(self, "class_of", dict(class_of or {}))
        if self.task == Task.DETECTION and self.class_of:
            raise ValueError("detection set must not carry classification labels")
        if self.task == Task.CLASSIFICATION and any(self.boxes.values()):
            raise ValueError("classification set must not carry boxes")

    def image(self, media_id: str) -> ImageRecord:
        for rec in self.images:
            if rec.media_id == media_id:
                return rec
        raise KeyError(media_id)

    def boxes_for(self, media_id: str) -> tuple[BoundingBox, ...]:
        return self.boxes.get(media_id, ())


@dataclass(frozen=True)
class ValidationIssue:
    code: str
    message: str
    media_id: Optional[str] = None


@dataclass(frozen=True)
class ValidationReport:
    errors: tuple[ValidationIssue, ...] = ()
    warnings: tuple[ValidationIssue, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.errors

    def codes(self) -> set[str]:
        return {issue.code for issue in self.errors} | {issue.code for issue in self.warnings}


def validate_label_map(label_map: LabelMap) -> ValidationReport:
    """Report duplicate (after trim + case-fold) and empty class names."""
    errors: list[ValidationIssue] = []
    if len(label_map) == 0:
        errors.append(ValidationIssue(EMPTY_LABEL_MAP, "label map has no classes"))
    seen: dict[str, str] = {}
    for name in label_map:
        canon = canonical_class_name(name)
        if not canon:
            errors.append(ValidationIssue(EMPTY_CLASS_NAME, f"empty class name {name!r}"))
            continue
        if canon in seen:
            errors.append(
                ValidationIssue(DUPLICATE_CLASS, f"{name!r} collides with {seen[canon]!r}")
            )
        else:
            seen[canon] = name
    return ValidationReport(errors=tuple(errors))


def validate_annotation_set(annotations: AnnotationSet) -> ValidationReport:
    """Validate label references, box geometry, and image bookkeeping.

    Errors: label-map defects, duplicate or dangling media ids, unknown
    class ids, degenerate boxes, boxes outside their image. Images with
    zero annotations are warnings only; negative examples are
    legitimate training data. An entirely empty set (no images, no
    classes) is the vacuous identity and validates clean.
    """
    label_errors = validate_label_map(annotations.label_map).errors
    if not annotations.images and len(annotations.label_map) == 0:
        label_errors = tuple(e for e in label_errors if e.code != EMPTY_LABEL_MAP)
    errors = list(label_errors)
    warnings: list[ValidationIssue] = []

    by_id: dict[str, ImageRecord] = {}
    for rec in annotations.images:
        if rec.media_id in by_id:
            errors.append(
                ValidationIssue(DUPLICATE_MEDIA_ID, "media id appears twice", rec.media_id)
            )
        by_id[rec.media_id] = rec

    num_classes = len(annotations.label_map)

    for media_id, boxes in annotations.boxes.items():
        rec = by_id.get(media_id)
        if rec is None:
            errors.append(
                ValidationIssue(DANGLING_MEDIA_ID, "boxes reference unknown image", media_id)
            )
        for box in boxes:
            if not 0 <= box.class_id < num_classes:
                errors.append(
                    ValidationIssue(
                        UNKNOWN_CLASS_ID, f"class id {box.class_id} not in label map", media_id
                    )
                )
            if box.x_min >= box.x_max or box.y_min >= box.y_max:
                errors.append(
                    ValidationIssue(
                        DEGENERATE_BOX,
                        f"degenerate box ({box.x_min},{box.y_min},{box.x_max},{box.y_max})",
                        media_id,
                    )
                )
            elif rec is not None and (
                box.x_min < 0
                or box.y_min < 0
                or box.x_max > rec.width
                or box.y_max > rec.height
            ):
                errors.append(
                    ValidationIssue(
                        BOX_OUT_OF_BOUNDS,
                        f"box ({box.x_min},{box.y_min},{box.x_max},{box.y_max}) "
                        f"outside {rec.width}x{rec.height}",
                        media_id,
                    )
                )

    for media_id, class_id in annotations.class_of.items():
        if media_id not in by_id:
            errors.append(
                ValidationIssue(DANGLING_MEDIA_ID, "class label references unknown image", media_id)
            )
        if not 0 <= class_id < num_classes:
            errors.append(
                ValidationIssue(
                    UNKNOWN_CLASS_ID, f"class id {class_id} not in label map", media_id
                )
            )

    for rec in annotations.images:
        if annotations.task == Task.DETECTION:
            labeled = bool(annotations.boxes.get(rec.media_id))
        else:
            labeled = rec.media_id in annotations.class_of
        if not labeled:
            warnings.append(ValidationIssue(UNLABELED_IMAGE, "image has no annotations", rec.media_id))

    return ValidationReport(errors=tuple(errors), warnings=tuple(warnings))
