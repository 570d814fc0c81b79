"""Parsers and exporters for the external annotation formats.

Each parser converts its format losslessly into an :class:`AnnotationSet`
and rejects (raises) any input that would yield a set failing
``validate_annotation_set``; validation errors never leak out as data.

Formats:

* VOC: one XML document per image, ``size/width``, ``size/height``,
  repeated ``object/name`` + ``bndbox/{xmin,ymin,xmax,ymax}``.
* COCO: one JSON document with ``images``/``annotations``/``categories``.
* YOLO: one text file per image, lines ``class cx cy w h`` normalized,
  plus a sidecar label file (one class name per line, position = id).
* MTurk batch: comma-separated rows, first row = header, one JSON
  answer-payload column; the field mapping is explicit configuration.
* Classification folders: directory name = class name.
"""

from __future__ import annotations

import csv
import io
import json
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Optional, Sequence

from .domain import (
    AnnotationSet,
    BoundingBox,
    ImageRecord,
    LabelMap,
    Task,
    canonical_class_name,
    validate_annotation_set,
    validate_label_map,
)
from .errors import (
    ClassOutOfRange,
    DanglingImageId,
    DuplicateClass,
    EmptyDataset,
    MissingDims,
    MissingSize,
    NormalizedOutOfRange,
    ParseError,
    UnsupportedExport,
)

# Slack for re-absorbing float rounding when a parser reconstructs corner
# coordinates arithmetically; matches the round-trip coordinate tolerance.
_EDGE_EPS = 1e-6


class FormatTag(str, Enum):
    VOC_XML = "voc_xml"
    COCO_JSON = "coco_json"
    YOLO_TXT = "yolo_txt"
    MTURK_BATCH = "mturk_batch"
    CLASS_FOLDERS = "class_folders"


class AnswerGeometry(str, Enum):
    ABSOLUTE_PX = "absolute_px"
    NORMALIZED = "normalized"


@dataclass(frozen=True)
class MTurkFieldMapping:
    """Where to find media ids, answer payloads, and class names in a batch."""

    media_field: str
    answer_field: str
    answer_geometry: AnswerGeometry = AnswerGeometry.ABSOLUTE_PX
    class_field: str = "label"

    def __post_init__(self):
        for field_name in (self.media_field, self.answer_field, self.class_field):
            if not field_name:
                raise ValueError("mapping field names must be non-empty")


@dataclass(frozen=True)
class Document:
    """One named text document, e.g. a single XML or label file."""

    name: str
    text: str


def _as_document(item) -> Document:
    if isinstance(item, Document):
        return item
    name, text = item
    return Document(name=name, text=text)


def _reject_if_invalid(annotations: AnnotationSet, origin: str) -> AnnotationSet:
    report = validate_annotation_set(annotations)
    if not report.ok:
        first = report.errors[0]
        raise ParseError(
            f"{origin} produced an invalid annotation set: {first.code}: {first.message}",
            media_id=first.media_id,
        )
    return annotations


def _clamp_edge(value: float, low: float, high: float) -> Optional[float]:
    """Clamp tiny arithmetic overshoot back into [low, high]; None if real."""
    if low <= value <= high:
        return value
    if low - _EDGE_EPS <= value < low:
        return low
    if high < value <= high + _EDGE_EPS:
        return high
    return None


# ---------------------------------------------------------------------------
# VOC
# ---------------------------------------------------------------------------

def parse_voc(documents: Sequence[Document | tuple[str, str]]) -> AnnotationSet:
    """Parse VOC XML documents, one image per document.

    The label map is the lexicographically sorted union of encountered
    class names. Corner coordinates are copied as-is (no 1-based
    adjustment); labeling tools disagree and a silent shift is worse
    than a documented identity mapping.
    """
    docs = sorted((_as_document(d) for d in documents), key=lambda d: d.name)

    images: list[ImageRecord] = []
    seen_ids: set[str] = set()
    # (media_id, class_name, corners) until the label map is known
    pending: list[tuple[str, str, tuple[float, float, float, float]]] = []
    names: set[str] = set()

    for doc in docs:
        try:
            root = ET.fromstring(doc.text)
        except ET.ParseError as exc:
            raise ParseError(f"malformed XML: {exc}", filename=doc.name) from exc

        size = root.find("size")
        width = _voc_dim(size, "width", doc.name)
        height = _voc_dim(size, "height", doc.name)

        filename_el = root.findtext("filename")
        media_id = filename_el.strip() if filename_el and filename_el.strip() else _strip_suffix(doc.name)
        if media_id in seen_ids:
            raise ParseError(f"duplicate media id {media_id!r}", filename=doc.name)
        seen_ids.add(media_id)
        images.append(ImageRecord(media_id=media_id, width=width, height=height))

        for obj in root.findall("object"):
            name = obj.findtext("name")
            if name is None or not name.strip():
                raise ParseError("object without a name", filename=doc.name)
            bndbox = obj.find("bndbox")
            if bndbox is None:
                raise ParseError("object without a bndbox", filename=doc.name)
            corners = tuple(
                _voc_float(bndbox, tag, doc.name) for tag in ("xmin", "ymin", "xmax", "ymax")
            )
            names.add(name.strip())
            pending.append((media_id, name.strip(), corners))

    label_map = LabelMap(sorted(names))
    boxes: dict[str, list[BoundingBox]] = {}
    for media_id, name, (xmin, ymin, xmax, ymax) in pending:
        boxes.setdefault(media_id, []).append(
            BoundingBox(xmin, ymin, xmax, ymax, class_id=label_map.id_of(name))
        )

    result = AnnotationSet(Task.DETECTION, label_map, images, boxes=boxes)
    return _reject_if_invalid(result, "VOC parse")


def _voc_dim(size: Optional[ET.Element], tag: str, filename: str) -> int:
    if size is None:
        raise MissingSize("document has no size element", filename=filename)
    text = size.findtext(tag)
    if text is None or not text.strip():
        raise MissingSize(f"size has no {tag}", filename=filename)
    try:
        return int(float(text))
    except ValueError as exc:
        raise ParseError(f"size/{tag} is not numeric: {text!r}", filename=filename) from exc


def _voc_float(bndbox: ET.Element, tag: str, filename: str) -> float:
    text = bndbox.findtext(tag)
    if text is None or not text.strip():
        raise ParseError(f"bndbox missing {tag}", filename=filename)
    try:
        return float(text)
    except ValueError as exc:
        raise ParseError(f"bndbox/{tag} is not numeric: {text!r}", filename=filename) from exc


def _strip_suffix(name: str) -> str:
    return name[: -len(".xml")] if name.endswith(".xml") else name


# ---------------------------------------------------------------------------
# COCO
# ---------------------------------------------------------------------------

def parse_coco(document: str) -> AnnotationSet:
    """Parse a COCO JSON document.

    Category ids are remapped to dense 0-based label-map positions
    ordered by original category id; COCO ``bbox`` ``[x, y, w, h]``
    becomes the internal ``(x, y, x+w, y+h)``.
    """
    try:
        data = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ParseError("COCO document must be a JSON object")
    for key in ("images", "annotations", "categories"):
        if key not in data or not isinstance(data[key], list):
            raise ParseError(f"COCO document missing {key!r} collection")

    categories = sorted(data["categories"], key=lambda c: _require(c, "id", "category"))
    if len({c["id"] for c in categories}) != len(categories):
        raise ParseError("duplicate category ids")
    label_map = LabelMap([str(_require(c, "name", "category")) for c in categories])
    position_of = {c["id"]: i for i, c in enumerate(categories)}

    images: list[ImageRecord] = []
    media_of_image_id: dict[object, str] = {}
    dims_of: dict[str, tuple[int, int]] = {}
    for img in data["images"]:
        image_id = _require(img, "id", "image")
        media_id = str(img.get("file_name") or image_id)
        if image_id in media_of_image_id:
            raise ParseError(f"duplicate image id {image_id!r}")
        if media_id in dims_of:
            raise ParseError(f"duplicate file name {media_id!r}")
        width = int(_require(img, "width", "image"))
        height = int(_require(img, "height", "image"))
        media_of_image_id[image_id] = media_id
        dims_of[media_id] = (width, height)
        images.append(ImageRecord(media_id=media_id, width=width, height=height))

    boxes: dict[str, list[BoundingBox]] = {}
    for ann in data["annotations"]:
        image_id = _require(ann, "image_id", "annotation")
        if image_id not in media_of_image_id:
            raise DanglingImageId(f"annotation references missing image {image_id!r}")
        category_id = _require(ann, "category_id", "annotation")
        if category_id not in position_of:
            raise ParseError(f"annotation references unknown category {category_id!r}")
        bbox = _require(ann, "bbox", "annotation")
        if not isinstance(bbox, (list, tuple)) or len(bbox) != 4:
            raise ParseError(f"bbox must be [x, y, w, h], got {bbox!r}")
        x, y, w, h = (float(v) for v in bbox)
        if w <= 0 or h <= 0:
            raise ParseError(f"degenerate bbox {bbox!r}")
        media_id = media_of_image_id[image_id]
        img_w, img_h = dims_of[media_id]
        corners = (
            _clamp_edge(x, 0.0, img_w),
            _clamp_edge(y, 0.0, img_h),
            _clamp_edge(x + w, 0.0, img_w),
            _clamp_edge(y + h, 0.0, img_h),
        )
        if any(c is None for c in corners):
            raise ParseError(
                f"bbox {bbox!r} extends outside {img_w}x{img_h}", media_id=media_id
            )
        boxes.setdefault(media_id, []).append(
            BoundingBox(*corners, class_id=position_of[category_id])  # type: ignore[arg-type]
        )

    result = AnnotationSet(Task.DETECTION, label_map, images, boxes=boxes)
    return _reject_if_invalid(result, "COCO parse")


def _require(obj: Mapping, key: str, what: str):
    if not isinstance(obj, Mapping) or key not in obj:
        raise ParseError(f"{what} missing {key!r}")
    return obj[key]


# ---------------------------------------------------------------------------
# YOLO
# ---------------------------------------------------------------------------

def parse_yolo(
    files: Sequence[tuple[str, int, int, Sequence[str] | str]],
    label_file: Sequence[str],
) -> AnnotationSet:
    """Parse YOLO label files.

    ``files`` holds ``(image_id, width, height, lines)``; image
    dimensions travel alongside because the text format has none.
    Lines are ``class cx cy w h`` with all geometry normalized to
    ``[0, 1]``.
    """
    names = [n.strip() for n in label_file if n.strip()]
    label_map = LabelMap(names)
    label_report = validate_label_map(label_map)
    if not label_report.ok:
        first = label_report.errors[0]
        raise ParseError(f"bad label file: {first.code}: {first.message}")

    images: list[ImageRecord] = []
    boxes: dict[str, list[BoundingBox]] = {}
    seen: set[str] = set()
    for image_id, width, height, lines in sorted(files, key=lambda f: f[0]):
        if image_id in seen:
            raise ParseError(f"duplicate image id {image_id!r}")
        seen.add(image_id)
        images.append(ImageRecord(media_id=image_id, width=width, height=height))
        if isinstance(lines, str):
            lines = lines.splitlines()
        for lineno, line in enumerate(lines, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 5:
                raise ParseError(
                    f"expected 'class cx cy w h', got {line!r}",
                    image_id=image_id,
                    line=lineno,
                )
            try:
                class_id = int(parts[0])
                cx, cy, w, h = (float(p) for p in parts[1:])
            except ValueError as exc:
                raise ParseError(
                    f"non-numeric field in {line!r}", image_id=image_id, line=lineno
                ) from exc
            if not 0 <= class_id < len(label_map):
                raise ClassOutOfRange(
                    f"class {class_id} outside 0..{len(label_map) - 1}",
                    image_id=image_id,
                    line=lineno,
                )
            for value in (cx, cy, w, h):
                if not 0.0 <= value <= 1.0:
                    raise NormalizedOutOfRange(
                        f"value {value} outside [0, 1] in {line!r}",
                        image_id=image_id,
                        line=lineno,
                    )
            if w == 0.0 or h == 0.0:
                raise ParseError(f"degenerate box in {line!r}", image_id=image_id, line=lineno)
            corners = (
                _clamp_edge((cx - w / 2) * width, 0.0, width),
                _clamp_edge((cy - h / 2) * height, 0.0, height),
                _clamp_edge((cx + w / 2) * width, 0.0, width),
                _clamp_edge((cy + h / 2) * height, 0.0, height),
            )
            if any(c is None for c in corners):
                raise NormalizedOutOfRange(
                    f"box {line!r} extends outside the image",
                    image_id=image_id,
                    line=lineno,
                )
            boxes.setdefault(image_id, []).append(
                BoundingBox(*corners, class_id=class_id)  # type: ignore[arg-type]
            )

    result = AnnotationSet(Task.DETECTION, label_map, images, boxes=boxes)
    return _reject_if_invalid(result, "YOLO parse")


# ---------------------------------------------------------------------------
# Mechanical Turk batches
# ---------------------------------------------------------------------------

def parse_mturk_csv(text: str) -> list[dict[str, str]]:
    """Read a batch file (comma-separated, first row = header) into rows."""
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        return []
    return [dict(row) for row in reader]


def import_mturk(
    batch: Sequence[Mapping[str, str]],
    mapping: MTurkFieldMapping,
    image_dims: Mapping[str, tuple[int, int]],
) -> AnnotationSet:
    """Convert crowd-labeled batch rows into an annotation set.

    Each row's answer payload (a JSON object or list of objects with
    ``left/top/width/height`` and a class name under
    ``mapping.class_field``) yields zero or more boxes. Normalized
    geometry is denormalized with ``image_dims``; rows with empty
    answers produce unlabeled images.
    """
    names: set[str] = set()
    # media_id -> list of (class name, pixel corners)
    pending: dict[str, list[tuple[str, tuple[float, float, float, float]]]] = {}
    dims_used: dict[str, tuple[int, int]] = {}

    for index, row in enumerate(batch):
        if mapping.media_field not in row:
            raise ParseError(f"row missing column {mapping.media_field!r}", row=index)
        media_id = str(row[mapping.media_field]).strip()
        if not media_id:
            raise ParseError("empty media id", row=index)
        dims = image_dims.get(media_id)
        if dims is None:
            raise MissingDims(f"no dimensions for {media_id!r}", row=index)
        width, height = dims
        dims_used[media_id] = (int(width), int(height))
        pending.setdefault(media_id, [])

        raw_answer = row.get(mapping.answer_field, "")
        if raw_answer is None or not str(raw_answer).strip():
            continue
        try:
            payload = json.loads(raw_answer)
        except json.JSONDecodeError as exc:
            raise ParseError(f"malformed answer payload: {exc}", row=index) from exc
        if payload is None or payload == {} or payload == []:
            continue
        items = payload if isinstance(payload, list) else [payload]
        for item in items:
            if not isinstance(item, Mapping):
                raise ParseError(f"answer item is not an object: {item!r}", row=index)
            try:
                left = float(item["left"])
                top = float(item["top"])
                box_w = float(item["width"])
                box_h = float(item["height"])
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError(
                    f"answer item missing left/top/width/height: {item!r}", row=index
                ) from exc
            if mapping.class_field not in item or not str(item[mapping.class_field]).strip():
                raise ParseError(f"answer item missing class name: {item!r}", row=index)
            class_name = str(item[mapping.class_field]).strip()
            if box_w <= 0 or box_h <= 0:
                raise ParseError(f"degenerate answer box: {item!r}", row=index)
            if mapping.answer_geometry == AnswerGeometry.NORMALIZED:
                left, box_w = left * width, box_w * width
                top, box_h = top * height, box_h * height
            corners = (
                _clamp_edge(left, 0.0, width),
                _clamp_edge(top, 0.0, height),
                _clamp_edge(left + box_w, 0.0, width),
                _clamp_edge(top + box_h, 0.0, height),
            )
            if any(c is None for c in corners):
                raise ParseError(
                    f"answer box outside {width}x{height}: {item!r}", row=index
                )
            names.add(class_name)
            pending[media_id].append((class_name, corners))  # type: ignore[arg-type]

    label_map = LabelMap(sorted(names))
    images = [
        ImageRecord(media_id=m, width=w, height=h) for m, (w, h) in dims_used.items()
    ]
    boxes: dict[str, list[BoundingBox]] = {}
    for media_id, entries in pending.items():
        for class_name, (x1, y1, x2, y2) in entries:
            boxes.setdefault(media_id, []).append(
                BoundingBox(x1, y1, x2, y2, class_id=label_map.id_of(class_name))
            )

    result = AnnotationSet(Task.DETECTION, label_map, images, boxes=boxes)
    return _reject_if_invalid(result, "MTurk import")


# ---------------------------------------------------------------------------
# Classification folders
# ---------------------------------------------------------------------------

def ingest_classification_folders(
    listing: Mapping[str, Sequence[tuple[str, int, int]]],
) -> AnnotationSet:
    """Build a classification set from a directory listing.

    ``listing`` maps directory name to ``(media_id, width, height)``
    entries; directory names become class names, sorted
    lexicographically.
    """
    if not listing:
        raise EmptyDataset("no class directories")

    seen: dict[str, str] = {}
    for name in listing:
        canon = canonical_class_name(name)
        if not canon:
            raise ParseError(f"empty directory name {name!r}")
        if canon in seen:
            raise DuplicateClass(f"{name!r} collides with {seen[canon]!r}")
        seen[canon] = name

    label_map = LabelMap(sorted(listing.keys()))
    images: list[ImageRecord] = []
    class_of: dict[str, int] = {}
    for directory in sorted(listing.keys()):
        class_id = label_map.id_of(directory)
        for media_id, width, height in listing[directory]:
            if media_id in class_of:
                raise ParseError(f"media id {media_id!r} appears in two classes")
            images.append(ImageRecord(media_id=media_id, width=width, height=height))
            class_of[media_id] = class_id

    if not images:
        raise EmptyDataset("class directories contain no images")

    result = AnnotationSet(Task.CLASSIFICATION, label_map, images, class_of=class_of)
    return _reject_if_invalid(result, "folder ingest")


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

def export(annotations: AnnotationSet, format: FormatTag) -> list[Document]:
    """Emit ``annotations`` as documents in the requested format.

    Re-parsing the documents with the matching parser reproduces the
    set within 1e-6 on coordinates and exactly on ids and classes.
    Only detection sets have an external box format; everything else is
    ``UNSUPPORTED_EXPORT``.
    """
    format = FormatTag(format)
    if format not in (FormatTag.VOC_XML, FormatTag.COCO_JSON, FormatTag.YOLO_TXT):
        raise UnsupportedExport(f"no exporter for {format.value}")
    if annotations.task != Task.DETECTION:
        raise UnsupportedExport(
            f"cannot export a {annotations.task.value} set as {format.value}"
        )
    if format == FormatTag.VOC_XML:
        return _export_voc(annotations)
    if format == FormatTag.COCO_JSON:
        return [_export_coco(annotations)]
    return _export_yolo(annotations)


def _export_voc(annotations: AnnotationSet) -> list[Document]:
    docs = []
    for rec in annotations.images:
        root = ET.Element("annotation")
        ET.SubElement(root, "filename").text = rec.media_id
        size = ET.SubElement(root, "size")
        ET.SubElement(size, "width").text = str(rec.width)
        ET.SubElement(size, "height").text = str(rec.height)
        for box in annotations.boxes_for(rec.media_id):
            obj = ET.SubElement(root, "object")
            ET.SubElement(obj, "name").text = annotations.label_map.name_of(box.class_id)
            bndbox = ET.SubElement(obj, "bndbox")
            ET.SubElement(bndbox, "xmin").text = repr(float(box.x_min))
            ET.SubElement(bndbox, "ymin").text = repr(float(box.y_min))
            ET.SubElement(bndbox, "xmax").text = repr(float(box.x_max))
            ET.SubElement(bndbox, "ymax").text = repr(float(box.y_max))
        ET.indent(root)
        docs.append(Document(name=f"{rec.media_id}.xml", text=ET.tostring(root, encoding="unicode")))
    return docs


def _export_coco(annotations: AnnotationSet) -> Document:
    image_ids = {rec.media_id: i + 1 for i, rec in enumerate(annotations.images)}
    payload = {
        "images": [
            {
                "id": image_ids[rec.media_id],
                "file_name": rec.media_id,
                "width": rec.width,
                "height": rec.height,
            }
            for rec in annotations.images
        ],
        "annotations": [],
        "categories": [
            {"id": i + 1, "name": name} for i, name in enumerate(annotations.label_map)
        ],
    }
    next_id = 1
    for rec in annotations.images:
        for box in annotations.boxes_for(rec.media_id):
            payload["annotations"].append(
                {
                    "id": next_id,
                    "image_id": image_ids[rec.media_id],
                    "category_id": box.class_id + 1,
                    "bbox": [box.x_min, box.y_min, box.width, box.height],
                }
            )
            next_id += 1
    return Document(
        name="annotations.coco.json",
        text=json.dumps(payload, indent=2, sort_keys=True) + "\n",
    )


def _export_yolo(annotations: AnnotationSet) -> list[Document]:
    docs = [Document(name="labels.txt", text="".join(f"{n}\n" for n in annotations.label_map))]
    for rec in annotations.images:
        lines = []
        for box in annotations.boxes_for(rec.media_id):
            cx = (box.x_min + box.x_max) / 2 / rec.width
            cy = (box.y_min + box.y_max) / 2 / rec.height
            w = box.width / rec.width
            h = box.height / rec.height
            lines.append(f"{box.class_id} {cx!r} {cy!r} {w!r} {h!r}\n")
        docs.append(Document(name=f"{rec.media_id}.txt", text="".join(lines)))
    return docs


# ---------------------------------------------------------------------------
# Canonical serialization
# ---------------------------------------------------------------------------

def annotation_set_to_json(annotations: AnnotationSet) -> str:
    """Serialize to the canonical JSON interchange form (stable bytes)."""
    payload = {
        "task": annotations.task.value,
        "label_map": list(annotations.label_map),
        "images": [
            {
                "media_id": rec.media_id,
                "width": rec.width,
                "height": rec.height,
                "source": rec.source.value,
                **(
                    {"source_video": rec.source_video, "timestamp_s": rec.timestamp_s}
                    if rec.source_video is not None
                    else {}
                ),
            }
            for rec in annotations.images
        ],
        "boxes": {
            media_id: [
                {
                    "x_min": b.x_min,
                    "y_min": b.y_min,
                    "x_max": b.x_max,
                    "y_max": b.y_max,
                    "class_id": b.class_id,
                    **({"confidence": b.confidence} if b.confidence is not None else {}),
                }
                for b in boxes
            ]
            for media_id, boxes in annotations.boxes.items()
        },
        "class_of": dict(annotations.class_of),
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def annotation_set_from_json(text: str) -> AnnotationSet:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed annotation JSON: {exc}") from exc
    try:
        images = [
            ImageRecord(
                media_id=img["media_id"],
                width=img["width"],
                height=img["height"],
                source=img.get("source", "still"),
                source_video=img.get("source_video"),
                timestamp_s=img.get("timestamp_s"),
            )
            for img in data["images"]
        ]
        boxes = {
            media_id: [
                BoundingBox(
                    b["x_min"],
                    b["y_min"],
                    b["x_max"],
                    b["y_max"],
                    class_id=b["class_id"],
                    confidence=b.get("confidence"),
                )
                for b in entries
            ]
            for media_id, entries in data.get("boxes", {}).items()
        }
        return AnnotationSet(
            task=Task(data["task"]),
            label_map=LabelMap(data["label_map"]),
            images=images,
            boxes=boxes,
            class_of=data.get("class_of", {}),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad annotation JSON structure: {exc}") from exc
