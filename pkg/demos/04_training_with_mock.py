"""
Training orchestration with the mock trainer
============================================

The orchestrator hands a directory to a trainer, watches the loss
stream, decides convergence with a windowed rule, and packages the
artifact. The mock trainer scripts the loss curve so this runs offline.
"""

import tempfile
from pathlib import Path

from fieldforge import (
    AnnotationSet,
    BoundingBox,
    ImageRecord,
    LabelMap,
    MockTrainer,
    SplitRatio,
    Task,
    build_training_config,
    default_registry,
    package_model,
    run_to_completion,
    split_dataset,
    start_training,
)

label_map = LabelMap(["rip_current", "breaking_wave"])
images = [ImageRecord(f"shore_{i:03d}", 640, 480) for i in range(20)]
boxes = {r.media_id: [BoundingBox(10, 10, 110, 110, i % 2)] for i, r in enumerate(images)}
dataset = AnnotationSet(Task.DETECTION, label_map, images, boxes=boxes)
split = split_dataset(dataset, SplitRatio.default(), seed=42)

model = next(e for e in default_registry() if e.name == "EfficientDet D2")
config = build_training_config(
    label_map, model, split, {"loss_threshold": 0.1, "window": 3, "patience": 1}
)
print("config: max_steps", config.max_steps, "| policy", config.convergence)

# a loss curve that settles under the threshold
trainer = MockTrainer(losses=[2.0, 1.1, 0.6, 0.3, 0.12, 0.09, 0.08, 0.07, 0.06])
with tempfile.TemporaryDirectory() as run_dir:
    run = start_training(config, trainer, run_dir, dataset)
    print("handoff written:", sorted(p.name for p in (Path(run_dir) / "handoff").iterdir()))
    run = run_to_completion(run, trainer, run_dir)
    print("status:", run.status.value, "| flipped at step", run.last_step)
    for step, loss in run.loss_history:
        bar = "#" * int(loss * 20)
        print(f"  step {step:>3}  loss {loss:<5} {bar}")

    package = package_model(run, trainer.finalize(Path(run_dir) / "handoff"))
    print("\npackaged:", package.runtime_format_tag, package.input_size)
    print("checksum:", package.checksum[:24], "...")
    print("label map rides along:", list(package.label_map))
