"""
On-device model selection
=========================

The registry holds each supported model's latency, precision, and
converted size; selection maximizes precision inside your constraints.
"""

from fieldforge import SelectionConstraints, default_registry, select_model
from fieldforge.errors import NoFeasibleModel

registry = default_registry()
print(f"{'model':<20} {'ms/frame':>9} {'mAP':>6} {'MB':>5}  classes")
for entry in registry:
    cap = entry.class_capacity if entry.class_capacity is not None else "no limit"
    print(f"{entry.name:<20} {entry.inference_ms:>9} {entry.map_coco:>6} {entry.size_mb:>5}  {cap}")

# older phones: keep the package small
small = select_model(registry, SelectionConstraints(num_classes=2, max_size_mb=10))
print("\nbest under 10 MB:", small.name, f"({small.map_coco} mAP)")

# smooth live view: cap the per-frame latency
fast = select_model(registry, SelectionConstraints(num_classes=2, max_inference_ms=35))
print("best under 35 ms:", fast.name)

# no constraints: highest precision wins, with field notes where we have them
best = select_model(registry, SelectionConstraints(num_classes=2))
print("unconstrained:", best.name)
d2 = next(e for e in registry if e.name == "EfficientDet D2")
print("field note on EfficientDet D2:", d2.notes)

# impossible asks fail loudly with the binding constraint
try:
    select_model(registry, SelectionConstraints(num_classes=2, min_map=60))
except NoFeasibleModel as exc:
    print("\ninfeasible:", exc)
