"""Dataset-construction mechanics.

Frame-extraction planning, deterministic stratified splitting into
train/test/eval, counting statistics, and the per-class data-sufficiency
advisor. Everything here is pure and reproducible from its inputs.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Mapping

from .domain import AnnotationSet, Task
from .errors import EmptyDataset, InvalidRate, MissingSplit, ParseError

# Images-per-class tier boundaries (lower-inclusive).
TIER_MARGINAL_AT = 150
TIER_GOOD_AT = 500
TIER_OPTIMAL_AT = 2000

UNLABELED_STRATUM = "unlabeled"


@dataclass(frozen=True)
class FramePlan:
    """Timestamps to hand to an external frame decoder."""

    source_video: str
    timestamps_s: tuple[float, ...]
    effective_rate_fps: float
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class SplitRatio:
    train: float
    test: float
    eval: float

    def __post_init__(self):
        if self.train <= 0 or self.test <= 0 or self.eval <= 0:
            raise ValueError("split ratio parts must all be positive")

    def proportions(self) -> tuple[float, float, float]:
        total = self.train + self.test + self.eval
        return (self.train / total, self.test / total, self.eval / total)

    @classmethod
    def parse(cls, text: str) -> "SplitRatio":
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"expected train:test:eval, got {text!r}")
        train, test, eval_ = (float(p) for p in parts)
        return cls(train, test, eval_)

    @classmethod
    def default(cls) -> "SplitRatio":
        return cls(6, 2, 2)


@dataclass(frozen=True)
class SplitResult:
    """Disjoint media-id lists; reproducible from (input, ratio, seed)."""

    train: tuple[str, ...]
    test: tuple[str, ...]
    eval: tuple[str, ...]
    seed: int
    ratio: SplitRatio
    strata: Mapping[str, tuple[int, int, int]]

    def sizes(self) -> tuple[int, int, int]:
        return (len(self.train), len(self.test), len(self.eval))

    def all_media_ids(self) -> set[str]:
        return set(self.train) | set(self.test) | set(self.eval)


@dataclass(frozen=True)
class DatasetStats:
    per_class_image_count: Mapping[int, int]
    per_class_box_count: Mapping[int, int]
    total_images: int
    unlabeled_images: int


class SufficiencyTier(str, Enum):
    INSUFFICIENT = "insufficient"
    MARGINAL = "marginal"
    GOOD = "good"
    OPTIMAL = "optimal"


@dataclass(frozen=True)
class AdvisoryReport:
    per_class_tier: Mapping[int, SufficiencyTier]
    notes: tuple[str, ...]


def plan_frame_extraction(
    duration_s: float,
    video_fps: float,
    requested_rate_fps: float,
    source_video: str = "video",
) -> FramePlan:
    """Plan still-frame timestamps for a video.

    Frames land at ``k / effective_rate`` for ``k = 0, 1, ...`` strictly
    below the duration; the rate is clamped to the video's own frame
    rate (with a warning) since no decoder can sample faster.
    """
    if duration_s <= 0 or video_fps <= 0 or requested_rate_fps <= 0:
        raise InvalidRate(
            f"duration {duration_s}, fps {video_fps}, rate {requested_rate_fps} "
            "must all be positive"
        )
    warnings: list[str] = []
    effective = min(requested_rate_fps, video_fps)
    if effective < requested_rate_fps:
        warnings.append(
            f"requested {requested_rate_fps} fps exceeds video rate; clamped to {effective} fps"
        )
    timestamps: list[float] = []
    k = 0
    while (t := k / effective) < duration_s:
        timestamps.append(t)
        k += 1
    return FramePlan(
        source_video=source_video,
        timestamps_s=tuple(timestamps),
        effective_rate_fps=effective,
        warnings=tuple(warnings),
    )


def _apportion(n: int, proportions: tuple[float, float, float]) -> tuple[int, int, int]:
    """Largest-remainder apportionment; remainder ties favor train, then test."""
    quotas = [n * p for p in proportions]
    counts = [math.floor(q) for q in quotas]
    leftover = n - sum(counts)
    by_remainder = sorted(range(3), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in range(leftover):
        counts[by_remainder[i]] += 1
    return counts[0], counts[1], counts[2]


def dominant_class(annotations: AnnotationSet, media_id: str) -> int | None:
    """Single class attributed to an image, or None when unlabeled.

    Classification images carry their class; detection images take the
    most frequent class among their boxes, ties to the lowest class id.
    """
    if annotations.task == Task.CLASSIFICATION:
        return annotations.class_of.get(media_id)
    boxes = annotations.boxes_for(media_id)
    if not boxes:
        return None
    counts: dict[int, int] = {}
    for box in boxes:
        counts[box.class_id] = counts.get(box.class_id, 0) + 1
    return min(counts, key=lambda cid: (-counts[cid], cid))


def _strata(annotations: AnnotationSet) -> dict[str, list[str]]:
    strata: dict[str, list[str]] = {}
    for rec in annotations.images:
        cls = dominant_class(annotations, rec.media_id)
        key = UNLABELED_STRATUM if cls is None else f"class:{cls}"
        strata.setdefault(key, []).append(rec.media_id)
    return strata


def _stratum_rng(seed: int, stratum: str) -> random.Random:
    digest = hashlib.sha256(f"{seed}|{stratum}".encode()).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def split_dataset(annotations: AnnotationSet, ratio: SplitRatio, seed: int) -> SplitResult:
    """Deterministic stratified split into train/test/eval.

    Each stratum (one per attributed class, plus one for unlabeled
    images) is apportioned independently by largest remainder over the
    normalized ratio and shuffled with an RNG derived from
    ``(seed, stratum)``, so membership depends only on the input set,
    the ratio, and the seed: input order never matters.
    """
    if not annotations.images:
        raise EmptyDataset("cannot split an empty set")
    proportions = ratio.proportions()
    train: list[str] = []
    test: list[str] = []
    eval_: list[str] = []
    strata_sizes: dict[str, tuple[int, int, int]] = {}
    strata = _strata(annotations)
    for stratum in sorted(strata):
        members = sorted(strata[stratum])
        _stratum_rng(seed, stratum).shuffle(members)
        n_train, n_test, n_eval = _apportion(len(members), proportions)
        train.extend(members[:n_train])
        test.extend(members[n_train : n_train + n_test])
        eval_.extend(members[n_train + n_test :])
        strata_sizes[stratum] = (n_train, n_test, n_eval)
    return SplitResult(
        train=tuple(sorted(train)),
        test=tuple(sorted(test)),
        eval=tuple(sorted(eval_)),
        seed=seed,
        ratio=ratio,
        strata=strata_sizes,
    )


def dataset_stats(annotations: AnnotationSet) -> DatasetStats:
    """Exact per-class counts.

    Image counts attribute each image to its dominant class so totals
    partition: sum of per-class image counts + unlabeled = total.
    """
    image_count = {cid: 0 for cid in range(len(annotations.label_map))}
    box_count = {cid: 0 for cid in range(len(annotations.label_map))}
    unlabeled = 0
    for rec in annotations.images:
        cls = dominant_class(annotations, rec.media_id)
        if cls is None:
            unlabeled += 1
        else:
            image_count[cls] += 1
    for boxes in annotations.boxes.values():
        for box in boxes:
            box_count[box.class_id] += 1
    return DatasetStats(
        per_class_image_count=image_count,
        per_class_box_count=box_count,
        total_images=len(annotations.images),
        unlabeled_images=unlabeled,
    )


def tier_for_count(count: int) -> SufficiencyTier:
    if count < TIER_MARGINAL_AT:
        return SufficiencyTier.INSUFFICIENT
    if count < TIER_GOOD_AT:
        return SufficiencyTier.MARGINAL
    if count < TIER_OPTIMAL_AT:
        return SufficiencyTier.GOOD
    return SufficiencyTier.OPTIMAL


def advise_sufficiency(stats: DatasetStats) -> AdvisoryReport:
    """Tier each class by its image count.

    Under ~150 images per class detection quality climbs steeply with
    every added image; 150-500 is workable; past 500 gains level off;
    2000+ per class is the regime where accuracy stops being
    data-limited.
    """
    tiers = {
        cid: tier_for_count(count) for cid, count in stats.per_class_image_count.items()
    }
    notes = []
    for cid in sorted(tiers):
        count = stats.per_class_image_count[cid]
        tier = tiers[cid]
        if tier == SufficiencyTier.INSUFFICIENT:
            hint = f"collect at least {TIER_MARGINAL_AT - count} more"
        elif tier == SufficiencyTier.MARGINAL:
            hint = f"usable; {TIER_GOOD_AT}+ recommended"
        elif tier == SufficiencyTier.GOOD:
            hint = f"solid; {TIER_OPTIMAL_AT}+ for best accuracy"
        else:
            hint = "enough data for peak accuracy"
        notes.append(f"class {cid}: {count} images -> {tier.value} ({hint})")
    if stats.unlabeled_images:
        notes.append(f"{stats.unlabeled_images} unlabeled images (kept as negatives)")
    return AdvisoryReport(per_class_tier=tiers, notes=tuple(notes))


# ---------------------------------------------------------------------------
# Split manifests (the on-disk contract any trainer can consume)
# ---------------------------------------------------------------------------

def write_split_manifests(result: SplitResult, directory: str | Path) -> list[Path]:
    """Write train/test/eval id lists plus a JSON sidecar with the recipe."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for subset in ("train", "test", "eval"):
        path = directory / f"{subset}.txt"
        path.write_text("".join(f"{m}\n" for m in getattr(result, subset)))
        written.append(path)
    sidecar = directory / "split.json"
    sidecar.write_text(
        json.dumps(
            {
                "ratio": {
                    "train": result.ratio.train,
                    "test": result.ratio.test,
                    "eval": result.ratio.eval,
                },
                "seed": result.seed,
                "strata": {k: list(v) for k, v in sorted(result.strata.items())},
                "sizes": list(result.sizes()),
            },
            indent=2,
            sort_keys=True,
        )
        + "\n"
    )
    written.append(sidecar)
    return written


def read_split_manifests(directory: str | Path) -> SplitResult:
    directory = Path(directory)
    sidecar = directory / "split.json"
    if not sidecar.exists():
        raise MissingSplit(f"no split manifests under {directory}")
    try:
        meta = json.loads(sidecar.read_text())
        subsets = {
            name: tuple(
                line.strip()
                for line in (directory / f"{name}.txt").read_text().splitlines()
                if line.strip()
            )
            for name in ("train", "test", "eval")
        }
        return SplitResult(
            train=subsets["train"],
            test=subsets["test"],
            eval=subsets["eval"],
            seed=meta["seed"],
            ratio=SplitRatio(**meta["ratio"]),
            strata={k: tuple(v) for k, v in meta.get("strata", {}).items()},
        )
    except (OSError, KeyError, ValueError, TypeError) as exc:
        raise ParseError(f"unreadable split manifests under {directory}: {exc}") from exc
