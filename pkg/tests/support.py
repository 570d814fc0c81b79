"""Shared test helpers: independent set comparison and random-set builders.

The comparison and generation logic here deliberately avoids reusing the
package's own export/parse code paths so round-trip checks have an
independent notion of equality.
"""

from __future__ import annotations

import random

from fieldforge.domain import AnnotationSet, BoundingBox, ImageRecord, LabelMap, Task


def assert_sets_equal(actual: AnnotationSet, expected: AnnotationSet, tol: float = 1e-6):
    """Structural equality with a coordinate tolerance; order-insensitive on images."""
    assert actual.task == expected.task
    assert list(actual.label_map) == list(expected.label_map)
    actual_images = sorted(actual.images, key=lambda r: r.media_id)
    expected_images = sorted(expected.images, key=lambda r: r.media_id)
    assert [(r.media_id, r.width, r.height) for r in actual_images] == [
        (r.media_id, r.width, r.height) for r in expected_images
    ]
    for rec in expected_images:
        got = actual.boxes_for(rec.media_id)
        want = expected.boxes_for(rec.media_id)
        assert len(got) == len(want), f"{rec.media_id}: {len(got)} != {len(want)} boxes"
        for g, w in zip(got, want):
            assert g.class_id == w.class_id, rec.media_id
            for axis in ("x_min", "y_min", "x_max", "y_max"):
                delta = abs(getattr(g, axis) - getattr(w, axis))
                assert delta < tol, f"{rec.media_id} {axis}: |{getattr(g, axis)} - {getattr(w, axis)}| = {delta}"
    assert dict(actual.class_of) == dict(expected.class_of)


def two_class_fixture_set(n_images: int = 20) -> AnnotationSet:
    """Small two-class detection dataset used across the pipeline tests."""
    label_map = LabelMap(["breaking_wave", "rip_current"])
    images = [ImageRecord(f"shore_{i:04d}", 640, 480) for i in range(n_images)]
    boxes = {
        rec.media_id: [
            BoundingBox(
                x_min=10.0 + i,
                y_min=20.0 + i,
                x_max=110.0 + i,
                y_max=120.0 + i,
                class_id=i % 2,
            )
        ]
        for i, rec in enumerate(images)
    }
    return AnnotationSet(Task.DETECTION, label_map, images, boxes=boxes)


def random_detection_set(
    rng: random.Random,
    max_images: int = 6,
    max_extra_boxes: int = 6,
    ensure_all_classes_used: bool = True,
) -> AnnotationSet:
    """A random valid detection set with a sorted label map.

    Every class gets at least one box (when requested) so formats that
    carry only encountered names can represent the set; some images may
    stay unlabeled.
    """
    n_classes = rng.randint(1, 4)
    label_map = LabelMap([f"class_{chr(ord('a') + i)}" for i in range(n_classes)])
    n_images = rng.randint(1, max_images)
    images = [
        ImageRecord(
            media_id=f"img_{i:03d}",
            width=rng.randint(16, 2000),
            height=rng.randint(16, 2000),
        )
        for i in range(n_images)
    ]

    def random_box(rec: ImageRecord, class_id: int) -> BoundingBox:
        x_min = rng.uniform(0, rec.width - 1)
        y_min = rng.uniform(0, rec.height - 1)
        return BoundingBox(
            x_min=x_min,
            y_min=y_min,
            x_max=x_min + rng.uniform(0.5, rec.width - x_min),
            y_max=y_min + rng.uniform(0.5, rec.height - y_min),
            class_id=class_id,
        )

    boxes: dict[str, list[BoundingBox]] = {}
    if ensure_all_classes_used:
        for class_id in range(n_classes):
            rec = images[class_id % n_images]
            boxes.setdefault(rec.media_id, []).append(random_box(rec, class_id))
    for _ in range(rng.randint(0, max_extra_boxes)):
        rec = images[rng.randrange(n_images)]
        boxes.setdefault(rec.media_id, []).append(
            random_box(rec, rng.randrange(n_classes))
        )
    return AnnotationSet(Task.DETECTION, label_map, images, boxes=boxes)
