"""
Splitting and the data-sufficiency advisor
==========================================

Deterministic stratified 6:2:2 splits, exact statistics, and per-class
tiers that say whether a class has enough images to train on.
"""

import random

from fieldforge import (
    AnnotationSet,
    BoundingBox,
    ImageRecord,
    LabelMap,
    SplitRatio,
    Task,
    advise_sufficiency,
    dataset_stats,
    split_dataset,
)

# an unbalanced dataset: plenty of waves, few rips
rng = random.Random(7)
label_map = LabelMap(["rip_current", "breaking_wave"])
images, boxes = [], {}
for i in range(640):
    rec = ImageRecord(f"frame_{i:04d}", 640, 480)
    images.append(rec)
    class_id = 0 if i < 120 else 1  # first 120 are rips
    boxes[rec.media_id] = [BoundingBox(10, 10, 200, 200, class_id)]
dataset = AnnotationSet(Task.DETECTION, label_map, images, boxes=boxes)

stats = dataset_stats(dataset)
print("images per class:", {label_map.name_of(c): n for c, n in stats.per_class_image_count.items()})

report = advise_sufficiency(stats)
for note in report.notes:
    print(" ", note)

# the default 6:2:2 split, stratified so the rare class is spread fairly
result = split_dataset(dataset, SplitRatio.default(), seed=42)
print("\nsplit sizes (train/test/eval):", result.sizes())
print("per-stratum allocation:", dict(result.strata))

# same seed, same membership; different seed, same sizes
again = split_dataset(dataset, SplitRatio.default(), seed=42)
other = split_dataset(dataset, SplitRatio.default(), seed=43)
print("reproducible:", result == again)
print("seed changes membership only:", other.sizes() == result.sizes(), other.train != result.train)
