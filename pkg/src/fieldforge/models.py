"""On-device model registry and constrained model selection.

The registry is data, not code: a JSON file of entries ships with the
package so newer models can be added without touching the selector.
Selection maximizes detection precision (COCO mAP) within the caller's
latency / size / class-count constraints.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from .domain import Task
from .errors import ClassCapacityExceeded, NoFeasibleModel, ParseError


@dataclass(frozen=True)
class ModelRegistryEntry:
    """One supported model: latency, precision, and converted size.

    ``inference_ms`` is per-frame latency; the numbers are relative
    ranking data (the measurement device is not part of the registry).
    ``class_capacity`` is absent when the architecture has no defined
    hard limit.
    """

    name: str
    inference_ms: float
    map_coco: float
    size_mb: float
    task: Task = Task.DETECTION
    class_capacity: Optional[int] = None
    notes: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "task", Task(self.task))
        if self.inference_ms <= 0:
            raise ValueError(f"{self.name}: inference_ms must be positive")
        if not 0 < self.map_coco <= 100:
            raise ValueError(f"{self.name}: map_coco must be in (0, 100]")
        if self.size_mb <= 0:
            raise ValueError(f"{self.name}: size_mb must be positive")
        if self.class_capacity is not None and self.class_capacity <= 0:
            raise ValueError(f"{self.name}: class_capacity must be positive when set")


@dataclass(frozen=True)
class SelectionConstraints:
    num_classes: int
    task: Task = Task.DETECTION
    max_inference_ms: Optional[float] = None
    max_size_mb: Optional[float] = None
    min_map: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "task", Task(self.task))
        if self.num_classes <= 0:
            raise ValueError("num_classes must be positive")
        for bound_name in ("max_inference_ms", "max_size_mb", "min_map"):
            bound = getattr(self, bound_name)
            if bound is not None and bound <= 0:
                raise ValueError(f"{bound_name} must be positive when set")


def load_registry(path: str | Path) -> list[ModelRegistryEntry]:
    """Load a registry file (JSON array of entries)."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"unreadable registry file {path}: {exc}") from exc
    return _entries_from(data, origin=str(path))


def default_registry() -> list[ModelRegistryEntry]:
    """The registry shipped with the package."""
    text = resources.files("fieldforge").joinpath("data/model_registry.json").read_text()
    return _entries_from(json.loads(text), origin="builtin registry")


def _entries_from(data, origin: str) -> list[ModelRegistryEntry]:
    if not isinstance(data, list):
        raise ParseError(f"{origin}: registry must be a JSON array")
    entries = []
    for raw in data:
        try:
            entries.append(
                ModelRegistryEntry(
                    name=raw["name"],
                    inference_ms=raw["inference_ms"],
                    map_coco=raw["map_coco"],
                    size_mb=raw["size_mb"],
                    task=raw.get("task", "detection"),
                    class_capacity=raw.get("class_capacity"),
                    notes=raw.get("notes"),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{origin}: bad registry entry {raw!r}: {exc}") from exc
    return entries


def check_class_capacity(entry: ModelRegistryEntry, num_classes: int) -> None:
    """Raise unless the model can be trained with ``num_classes`` classes."""
    if num_classes <= 0:
        raise ValueError("num_classes must be positive")
    if entry.class_capacity is not None and num_classes > entry.class_capacity:
        raise ClassCapacityExceeded(
            f"{entry.name} supports at most {entry.class_capacity} classes, "
            f"requested {num_classes}"
        )


def _violations(entry: ModelRegistryEntry, constraints: SelectionConstraints) -> list[str]:
    violated = []
    if constraints.max_inference_ms is not None and entry.inference_ms > constraints.max_inference_ms:
        violated.append(f"max_inference_ms={constraints.max_inference_ms}")
    if constraints.max_size_mb is not None and entry.size_mb > constraints.max_size_mb:
        violated.append(f"max_size_mb={constraints.max_size_mb}")
    if constraints.min_map is not None and entry.map_coco < constraints.min_map:
        violated.append(f"min_map={constraints.min_map}")
    if entry.class_capacity is not None and constraints.num_classes > entry.class_capacity:
        violated.append(f"num_classes={constraints.num_classes}")
    return violated


def select_model(
    registry: Sequence[ModelRegistryEntry], constraints: SelectionConstraints
) -> ModelRegistryEntry:
    """Pick the feasible entry with the best precision.

    Feasible = matches the task, satisfies every present bound, and can
    hold the class count. Among feasible entries the highest ``map_coco``
    wins; ties break toward lower latency, then smaller size, then name.
    The latency-first trade-off is expressed by constraining
    ``max_inference_ms`` rather than by a different objective.
    """
    if not registry:
        raise NoFeasibleModel("registry is empty")
    candidates = [e for e in registry if e.task == constraints.task]
    if not candidates:
        raise NoFeasibleModel(f"no {constraints.task.value} models in registry")
    feasible = [e for e in candidates if not _violations(e, constraints)]
    if not feasible:
        binding = sorted(
            {v for e in candidates for v in _violations(e, constraints)}
        )
        raise NoFeasibleModel(
            f"no {constraints.task.value} model satisfies the constraints "
            f"(binding: {', '.join(binding)})"
        )
    return min(feasible, key=lambda e: (-e.map_coco, e.inference_ms, e.size_mb, e.name))
