"""
From trained model to app bundle
================================

Templates plus customization plus an embedded model package become a
bundle descriptor; manifests and deploy lanes are deterministic
documents the platform toolchains consume.
"""

import json

from fieldforge import (
    Customization,
    LabelMap,
    ModelPackage,
    emit_build_manifest,
    emit_deploy_lanes,
    instantiate_template,
    template_by_id,
    template_catalog,
)
from fieldforge.appforge import deploy_config_to_json

print("templates:", [t.template_id for t in template_catalog()])

package = ModelPackage(
    weights_ref="runs/abc123/handoff/model.bin",
    runtime_format_tag="tflite",
    label_map=LabelMap(["rip_current", "breaking_wave"]),
    input_size=(320, 320),
    checksum="c0ffee" * 10 + "beef",
    source_run="abc123",
)

descriptor = instantiate_template(
    template_by_id("camera-detect"),
    Customization(
        app_name="RipWatch",
        gui_color="#FF0000",
        info_panel_text="Rip currents pull seaward past the breakers. Never swim against one.",
        confidence_threshold=0.5,
    ),
    package,
    platforms=["ios", "android"],
    upload_endpoint="https://observations.example.org",
)
print("bundle:", descriptor.bundle_id)

manifest = json.loads(emit_build_manifest(descriptor, "ios"))
print("\nbuild manifest sections:", sorted(manifest))
print("model in bundle at:", manifest["model"]["path"])
print("build tool:", manifest["build"]["tool_entry_point"])

# expert mode needs no model at all: useful for bootstrapping a dataset
expert = instantiate_template(
    template_by_id("camera-detect"),
    Customization(app_name="RipScout", gui_color="#0044AA", expert_mode_enabled=True),
    model_package=None,
)
print("\nexpert-only bundle has model:", expert.model)

for channel in ("beta", "release"):
    lanes = emit_deploy_lanes(descriptor, "ios", channel)
    steps = " -> ".join(step["id"] for step in lanes.lane_steps)
    print(f"{channel} lane: {steps}")
print("\nlane JSON:\n", deploy_config_to_json(emit_deploy_lanes(descriptor, "android", "beta")))
