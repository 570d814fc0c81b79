"""
Annotation formats: one internal model, many external formats
==============================================================

Every parser converges on the same AnnotationSet; every exporter can
reproduce its input within 1e-6 on coordinates.
"""

import json

from fieldforge import (
    AnnotationSet,
    AnswerGeometry,
    BoundingBox,
    FormatTag,
    ImageRecord,
    LabelMap,
    MTurkFieldMapping,
    Task,
    export,
    import_mturk,
    parse_coco,
    validate_annotation_set,
)

# a tiny two-class detection dataset
dataset = AnnotationSet(
    task=Task.DETECTION,
    label_map=LabelMap(["rip_current", "breaking_wave"]),
    images=[ImageRecord("shore_001", 640, 480), ImageRecord("shore_002", 800, 600)],
    boxes={
        "shore_001": [BoundingBox(120, 80, 420, 300, class_id=0)],
        "shore_002": [BoundingBox(10, 10, 200, 150, class_id=1)],
    },
)
print("validation:", validate_annotation_set(dataset).ok)

# export to COCO, look at the document, and parse it back
coco_doc = export(dataset, FormatTag.COCO_JSON)[0]
print("\nCOCO categories:", json.loads(coco_doc.text)["categories"])
reparsed = parse_coco(coco_doc.text)
print("round trip preserves label map:", list(reparsed.label_map) == list(dataset.label_map))

# YOLO: normalized center-format lines plus a sidecar label file
for doc in export(dataset, FormatTag.YOLO_TXT):
    print(f"\n--- {doc.name} ---")
    print(doc.text.strip())

# crowd-labeled batches come in as CSV rows with a JSON answer payload
rows = [
    {
        "image_url": "shore_003",
        "answer": json.dumps(
            [{"left": 50, "top": 40, "width": 100, "height": 80, "label": "rip_current"}]
        ),
    },
    {"image_url": "shore_004", "answer": ""},  # no findings: stays as a negative example
]
mapping = MTurkFieldMapping(
    media_field="image_url", answer_field="answer", answer_geometry=AnswerGeometry.ABSOLUTE_PX
)
imported = import_mturk(rows, mapping, {"shore_003": (640, 480), "shore_004": (640, 480)})
print("\nimported from batch:", len(imported.images), "images,", list(imported.label_map))
