"""Training orchestration around a pluggable trainer.

The engine never computes gradients. A :class:`TrainerAdapter` receives
a directory handoff (``config.json``, split manifests, dataset export)
and streams ``(step, loss)`` pairs back while writing ``loss.log``,
``model.bin`` and ``meta.json``; the orchestrator monitors the loss,
decides convergence, and packages the final artifact for app embedding.
:class:`MockTrainer` makes the whole pipeline testable offline.
"""

from __future__ import annotations

import hashlib
import json
import uuid
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Iterator, Mapping, Optional, Protocol, Sequence

from .annotations import FormatTag, export
from .dataset import SplitRatio, SplitResult, write_split_manifests
from .domain import AnnotationSet, LabelMap, Task
from .errors import (
    ArtifactMissing,
    FieldForgeError,
    MissingSplit,
    OutOfOrderStep,
    RunNotActive,
    RunNotFinished,
)
from .models import ModelRegistryEntry, check_class_capacity

DEFAULT_MAX_STEPS = 40_000
DEFAULT_LOSS_THRESHOLD = 0.1
DEFAULT_WINDOW = 100
DEFAULT_PATIENCE = 3


class TrainerFailed(FieldForgeError):
    """Raised by an adapter when the underlying trainer reports failure."""

    code = "TRAINER_FAILED"


@dataclass(frozen=True)
class ConvergencePolicy:
    """Windowed stop rule: training ends once the loss stays low.

    The run converges when each of the last ``patience`` consecutive
    windows of ``window`` recorded losses has a mean below
    ``loss_threshold``; the windowing guards against single-step noise.
    """

    loss_threshold: float = DEFAULT_LOSS_THRESHOLD
    window: int = DEFAULT_WINDOW
    patience: int = DEFAULT_PATIENCE

    def __post_init__(self):
        if self.loss_threshold <= 0 or self.window <= 0 or self.patience <= 0:
            raise ValueError("policy values must all be positive")


@dataclass(frozen=True)
class TrainingConfig:
    model: ModelRegistryEntry
    base_weights: str
    split: SplitResult
    label_map: LabelMap
    max_steps: int = DEFAULT_MAX_STEPS
    convergence: ConvergencePolicy = ConvergencePolicy()


class RunStatus(str, Enum):
    PENDING = "pending"
    RUNNING = "running"
    CONVERGED = "converged"
    MAX_STEPS_REACHED = "max_steps_reached"
    FAILED = "failed"


@dataclass(frozen=True)
class TrainingRun:
    """Loss history and status of one orchestrated job (immutable snapshot)."""

    run_id: str
    config: TrainingConfig
    loss_history: tuple[tuple[int, float], ...] = ()
    status: RunStatus = RunStatus.PENDING

    @property
    def last_step(self) -> Optional[int]:
        return self.loss_history[-1][0] if self.loss_history else None


@dataclass(frozen=True)
class ModelPackage:
    """A trained model ready for embedding into an app bundle."""

    weights_ref: str
    runtime_format_tag: str
    label_map: LabelMap
    input_size: tuple[int, int]
    checksum: str
    source_run: str
    task: Task = Task.DETECTION


@dataclass(frozen=True)
class TrainerArtifacts:
    weights_path: Path
    runtime_format_tag: str
    input_size: tuple[int, int]


class TrainerAdapter(Protocol):
    """Seam between the orchestrator and an actual training backend."""

    def start(self, handoff_dir: Path) -> None:
        """Accept the handoff; raise TrainerUnavailable if unreachable."""

    def stream_losses(self) -> Iterator[tuple[int, float]]:
        """Yield (step, loss) pairs; raise TrainerFailed on backend failure."""

    def finalize(self, handoff_dir: Path) -> TrainerArtifacts:
        """Write model.bin + meta.json into the handoff and describe them."""


def build_training_config(
    label_map: LabelMap,
    model_choice: ModelRegistryEntry,
    split: SplitResult | None,
    overrides: Mapping[str, object] | None = None,
) -> TrainingConfig:
    """Assemble a transfer-learning config with defaults filled in.

    Defaults: 40k max steps, convergence policy (0.1 threshold, window
    100, patience 3), base weights = the model's public-dataset
    pre-trained checkpoint reference.
    """
    check_class_capacity(model_choice, len(label_map))
    if split is None or not split.all_media_ids():
        raise MissingSplit("training requires split manifests for an existing dataset")
    overrides = dict(overrides or {})
    policy = ConvergencePolicy(
        loss_threshold=float(overrides.pop("loss_threshold", DEFAULT_LOSS_THRESHOLD)),
        window=int(overrides.pop("window", DEFAULT_WINDOW)),
        patience=int(overrides.pop("patience", DEFAULT_PATIENCE)),
    )
    config = TrainingConfig(
        model=model_choice,
        base_weights=str(overrides.pop("base_weights", _default_base_weights(model_choice))),
        split=split,
        label_map=label_map,
        max_steps=int(overrides.pop("max_steps", DEFAULT_MAX_STEPS)),
        convergence=policy,
    )
    if overrides:
        raise ValueError(f"unknown overrides: {sorted(overrides)}")
    return config


def _default_base_weights(model: ModelRegistryEntry) -> str:
    slug = "".join(c if c.isalnum() else "-" for c in model.name.lower()).strip("-")
    while "--" in slug:
        slug = slug.replace("--", "-")
    return f"pretrained://{slug}/mscoco"


def check_convergence(
    loss_history: Sequence[tuple[int, float]], policy: ConvergencePolicy
) -> bool:
    """Pure windowed-mean stop test over a recorded loss history.

    Converged iff each of the last ``patience`` windows of ``window``
    points has mean below the threshold; histories shorter than
    ``window * patience`` are never converged.
    """
    needed = policy.window * policy.patience
    if len(loss_history) < needed:
        return False
    tail = [loss for _, loss in loss_history[-needed:]]
    for i in range(policy.patience):
        window = tail[i * policy.window : (i + 1) * policy.window]
        if sum(window) / policy.window >= policy.loss_threshold:
            return False
    return True


def record_loss(run: TrainingRun, step: int, loss: float) -> TrainingRun:
    """Append one loss report; may flip the run to a terminal status."""
    if run.status != RunStatus.RUNNING:
        raise RunNotActive(f"run {run.run_id} is {run.status.value}")
    if run.last_step is not None and step <= run.last_step:
        raise OutOfOrderStep(f"step {step} not after {run.last_step}")
    if loss < 0:
        raise ValueError(f"loss must be nonnegative, got {loss}")
    history = run.loss_history + ((step, float(loss)),)
    status = RunStatus.RUNNING
    if check_convergence(history, run.config.convergence):
        status = RunStatus.CONVERGED
    elif step >= run.config.max_steps:
        status = RunStatus.MAX_STEPS_REACHED
    return replace(run, loss_history=history, status=status)


def start_training(
    config: TrainingConfig,
    trainer: TrainerAdapter,
    run_dir: str | Path,
    dataset: AnnotationSet | None = None,
    run_id: str | None = None,
) -> TrainingRun:
    """Hand the job to a trainer and return the run in ``running`` state.

    Writes the handoff directory (``config.json``, split manifests and,
    when the dataset is provided, its COCO export) under
    ``run_dir/handoff``. Each start gets a fresh ``run_id`` unless the
    caller names one.
    """
    run = TrainingRun(run_id=run_id or uuid.uuid4().hex[:12], config=config)
    run_dir = Path(run_dir)
    handoff = run_dir / "handoff"
    handoff.mkdir(parents=True, exist_ok=True)
    (handoff / "config.json").write_text(config_to_json(config))
    write_split_manifests(config.split, handoff)
    if dataset is not None and dataset.task == Task.DETECTION:
        doc = export(dataset, FormatTag.COCO_JSON)[0]
        (handoff / doc.name).write_text(doc.text)
    trainer.start(handoff)
    run = replace(run, status=RunStatus.RUNNING)
    save_run(run, run_dir)
    return run


def run_to_completion(
    run: TrainingRun, trainer: TrainerAdapter, run_dir: str | Path | None = None
) -> TrainingRun:
    """Consume the trainer's loss stream until the run leaves ``running``."""
    try:
        for step, loss in trainer.stream_losses():
            run = record_loss(run, step, loss)
            if run.status != RunStatus.RUNNING:
                break
    except TrainerFailed:
        run = replace(run, status=RunStatus.FAILED)
    if run_dir is not None:
        save_run(run, Path(run_dir))
    return run


def package_model(run: TrainingRun, artifacts: TrainerArtifacts) -> ModelPackage:
    """Seal a finished run's artifact for embedding.

    The checksum is a SHA-256 over the artifact bytes, so packaging the
    same run twice yields identical packages and bundle manifests can be
    bit-exact.
    """
    if run.status not in (RunStatus.CONVERGED, RunStatus.MAX_STEPS_REACHED):
        raise RunNotFinished(f"run {run.run_id} is {run.status.value}")
    weights = Path(artifacts.weights_path)
    if not weights.is_file():
        raise ArtifactMissing(f"no artifact at {weights}")
    checksum = hashlib.sha256(weights.read_bytes()).hexdigest()
    return ModelPackage(
        weights_ref=str(weights),
        runtime_format_tag=artifacts.runtime_format_tag,
        label_map=run.config.label_map,
        input_size=artifacts.input_size,
        checksum=checksum,
        source_run=run.run_id,
        task=run.config.model.task,
    )


def read_trainer_artifacts(handoff_dir: str | Path) -> TrainerArtifacts:
    """Locate model.bin + meta.json written by a trainer into the handoff."""
    handoff = Path(handoff_dir)
    weights = handoff / "model.bin"
    meta_path = handoff / "meta.json"
    if not weights.is_file() or not meta_path.is_file():
        raise ArtifactMissing(f"trainer artifacts missing under {handoff}")
    meta = json.loads(meta_path.read_text())
    return TrainerArtifacts(
        weights_path=weights,
        runtime_format_tag=meta["runtime_format_tag"],
        input_size=(int(meta["input_size"][0]), int(meta["input_size"][1])),
    )


# ---------------------------------------------------------------------------
# Serialization (run state survives orchestrator restarts)
# ---------------------------------------------------------------------------

def config_to_dict(config: TrainingConfig) -> dict:
    return {
        "model": {
            "name": config.model.name,
            "inference_ms": config.model.inference_ms,
            "map_coco": config.model.map_coco,
            "size_mb": config.model.size_mb,
            "task": config.model.task.value,
            "class_capacity": config.model.class_capacity,
            "notes": config.model.notes,
        },
        "base_weights": config.base_weights,
        "label_map": list(config.label_map),
        "max_steps": config.max_steps,
        "convergence": {
            "loss_threshold": config.convergence.loss_threshold,
            "window": config.convergence.window,
            "patience": config.convergence.patience,
        },
        "split": {
            "train": list(config.split.train),
            "test": list(config.split.test),
            "eval": list(config.split.eval),
            "seed": config.split.seed,
            "ratio": {
                "train": config.split.ratio.train,
                "test": config.split.ratio.test,
                "eval": config.split.ratio.eval,
            },
            "strata": {k: list(v) for k, v in sorted(config.split.strata.items())},
        },
    }


def config_to_json(config: TrainingConfig) -> str:
    return json.dumps(config_to_dict(config), indent=2, sort_keys=True) + "\n"


def config_from_dict(data: Mapping) -> TrainingConfig:
    model = ModelRegistryEntry(
        name=data["model"]["name"],
        inference_ms=data["model"]["inference_ms"],
        map_coco=data["model"]["map_coco"],
        size_mb=data["model"]["size_mb"],
        task=data["model"].get("task", "detection"),
        class_capacity=data["model"].get("class_capacity"),
        notes=data["model"].get("notes"),
    )
    split = SplitResult(
        train=tuple(data["split"]["train"]),
        test=tuple(data["split"]["test"]),
        eval=tuple(data["split"]["eval"]),
        seed=data["split"]["seed"],
        ratio=SplitRatio(**data["split"]["ratio"]),
        strata={k: tuple(v) for k, v in data["split"].get("strata", {}).items()},
    )
    return TrainingConfig(
        model=model,
        base_weights=data["base_weights"],
        split=split,
        label_map=LabelMap(data["label_map"]),
        max_steps=data["max_steps"],
        convergence=ConvergencePolicy(**data["convergence"]),
    )


def save_run(run: TrainingRun, run_dir: str | Path) -> Path:
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    path = run_dir / "run.json"
    path.write_text(
        json.dumps(
            {
                "run_id": run.run_id,
                "status": run.status.value,
                "loss_history": [[s, l] for s, l in run.loss_history],
                "config": config_to_dict(run.config),
            },
            indent=2,
            sort_keys=True,
        )
        + "\n"
    )
    return path


def load_run(run_dir: str | Path) -> TrainingRun:
    path = Path(run_dir) / "run.json"
    if not path.is_file():
        raise ArtifactMissing(f"no run state at {path}")
    data = json.loads(path.read_text())
    return TrainingRun(
        run_id=data["run_id"],
        config=config_from_dict(data["config"]),
        loss_history=tuple((int(s), float(l)) for s, l in data["loss_history"]),
        status=RunStatus(data["status"]),
    )


def package_to_json(package: ModelPackage) -> str:
    return json.dumps(
        {
            "weights_ref": package.weights_ref,
            "runtime_format_tag": package.runtime_format_tag,
            "label_map": list(package.label_map),
            "input_size": list(package.input_size),
            "checksum": package.checksum,
            "source_run": package.source_run,
            "task": package.task.value,
        },
        indent=2,
        sort_keys=True,
    ) + "\n"


def package_from_json(text: str) -> ModelPackage:
    data = json.loads(text)
    return ModelPackage(
        weights_ref=data["weights_ref"],
        runtime_format_tag=data["runtime_format_tag"],
        label_map=LabelMap(data["label_map"]),
        input_size=(int(data["input_size"][0]), int(data["input_size"][1])),
        checksum=data["checksum"],
        source_run=data["source_run"],
        task=Task(data.get("task", "detection")),
    )


# ---------------------------------------------------------------------------
# Mock trainer
# ---------------------------------------------------------------------------

class MockTrainer:
    """Scripted-loss trainer for offline pipeline runs.

    Streams a fixed loss curve and writes a deterministic dummy
    artifact whose bytes depend only on the handoff config and the
    curve, so repeated runs of the same job produce bit-identical
    packages.
    """

    def __init__(
        self,
        losses: Sequence[tuple[int, float]] | Sequence[float] | None = None,
        runtime_format_tag: str = "tflite",
        input_size: tuple[int, int] = (320, 320),
        refuse: bool = False,
        fail_after: Optional[int] = None,
    ):
        if losses is None:
            losses = [2.0 * (0.97 ** k) for k in range(450)]
        pairs: list[tuple[int, float]] = []
        for i, item in enumerate(losses):
            if isinstance(item, (int, float)):
                pairs.append((i + 1, float(item)))
            else:
                step, loss = item
                pairs.append((int(step), float(loss)))
        self.losses = pairs
        self.runtime_format_tag = runtime_format_tag
        self.input_size = input_size
        self.refuse = refuse
        self.fail_after = fail_after
        self._handoff: Optional[Path] = None

    def start(self, handoff_dir: Path) -> None:
        from .errors import TrainerUnavailable

        if self.refuse:
            raise TrainerUnavailable("mock trainer configured to refuse connections")
        handoff_dir = Path(handoff_dir)
        if not (handoff_dir / "config.json").is_file():
            raise TrainerUnavailable(f"handoff at {handoff_dir} has no config.json")
        self._handoff = handoff_dir

    def stream_losses(self) -> Iterator[tuple[int, float]]:
        assert self._handoff is not None, "start() must run first"
        log = self._handoff / "loss.log"
        with log.open("a") as fh:
            for count, (step, loss) in enumerate(self.losses, start=1):
                if self.fail_after is not None and count > self.fail_after:
                    raise TrainerFailed("scripted failure")
                fh.write(f"{step}\t{loss}\n")
                fh.flush()
                yield step, loss
        self.finalize(self._handoff)

    def finalize(self, handoff_dir: Path) -> TrainerArtifacts:
        handoff_dir = Path(handoff_dir)
        config_text = (handoff_dir / "config.json").read_text()
        script = ";".join(f"{s}:{l}" for s, l in self.losses)
        digest = hashlib.sha256((config_text + script).encode()).hexdigest()
        weights = handoff_dir / "model.bin"
        weights.write_bytes(b"mock-weights:" + digest.encode())
        meta = handoff_dir / "meta.json"
        meta.write_text(
            json.dumps(
                {
                    "runtime_format_tag": self.runtime_format_tag,
                    "input_size": list(self.input_size),
                },
                indent=2,
                sort_keys=True,
            )
            + "\n"
        )
        return TrainerArtifacts(
            weights_path=weights,
            runtime_format_tag=self.runtime_format_tag,
            input_size=self.input_size,
        )
