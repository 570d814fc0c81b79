"""App building as descriptor generation.

"Building" here means producing the deterministic contracts the real
platform toolchains consume: a bundle descriptor (template +
customization + embedded model), a build manifest, and deploy-lane
configurations for beta and release channels. Invoking Xcode / Gradle
itself stays outside the engine.
"""

from __future__ import annotations

import json
import re
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from typing import Mapping, Optional, Sequence

from .domain import Task
from .errors import (
    ExpertModeUnsupported,
    InvalidCustomization,
    MissingModel,
    PlatformNotTargeted,
    TaskMismatch,
    UnsupportedCustomization,
)
from .training import ModelPackage

GUI_COLOR = "gui_color"
ICON = "icon"
LOGO = "logo"
APP_NAME = "app_name"
INFO_PANEL_TEXT = "info_panel_text"
ALL_CUSTOMIZABLE_KEYS = frozenset({GUI_COLOR, ICON, LOGO, APP_NAME, INFO_PANEL_TEXT})

_HEX_COLOR = re.compile(r"^#[0-9A-Fa-f]{6}$")

DEFAULT_CONFIDENCE_THRESHOLD = 0.5
DEFAULT_UPLOAD_ENDPOINT = "http://localhost:8000"

# In-bundle layout shared by every generated manifest.
MODEL_BUNDLE_PATH = "assets/model/model.bin"
LABELS_BUNDLE_PATH = "assets/model/labels.txt"

_TOOL_ENTRY_POINTS = {"ios": "xcodebuild", "android": "gradlew"}


class Platform(str, Enum):
    IOS = "ios"
    ANDROID = "android"


class Channel(str, Enum):
    BETA = "beta"
    RELEASE = "release"


@dataclass(frozen=True)
class AppTemplate:
    template_id: str
    supported_tasks: frozenset[Task]
    customizable_keys: frozenset[str]
    supports_expert_mode: bool = True


def template_catalog() -> list[AppTemplate]:
    """The two reference camera templates (detection and classification)."""
    return [
        AppTemplate(
            template_id="camera-detect",
            supported_tasks=frozenset({Task.DETECTION}),
            customizable_keys=ALL_CUSTOMIZABLE_KEYS,
            supports_expert_mode=True,
        ),
        AppTemplate(
            template_id="camera-classify",
            supported_tasks=frozenset({Task.CLASSIFICATION}),
            customizable_keys=ALL_CUSTOMIZABLE_KEYS,
            supports_expert_mode=True,
        ),
    ]


def template_by_id(template_id: str) -> AppTemplate:
    for template in template_catalog():
        if template.template_id == template_id:
            return template
    raise KeyError(template_id)


@dataclass(frozen=True)
class Customization:
    """User-facing knobs applied to a template."""

    app_name: str
    gui_color: str = "#2266AA"
    icon: Optional[str] = None
    logo: Optional[str] = None
    info_panel_text: Optional[str] = None
    expert_mode_enabled: bool = False
    confidence_threshold: float = DEFAULT_CONFIDENCE_THRESHOLD

    def __post_init__(self):
        if not self.app_name or not self.app_name.strip():
            raise InvalidCustomization("app_name must be non-empty")
        if not _HEX_COLOR.match(self.gui_color):
            raise InvalidCustomization(
                f"gui_color must look like #RRGGBB, got {self.gui_color!r}"
            )
        if not 0.0 < self.confidence_threshold < 1.0:
            raise InvalidCustomization(
                f"confidence_threshold must be in (0, 1), got {self.confidence_threshold}"
            )

    def used_keys(self) -> frozenset[str]:
        keys = {APP_NAME, GUI_COLOR}
        if self.icon is not None:
            keys.add(ICON)
        if self.logo is not None:
            keys.add(LOGO)
        if self.info_panel_text is not None:
            keys.add(INFO_PANEL_TEXT)
        return frozenset(keys)


@dataclass(frozen=True)
class AppBundleDescriptor:
    bundle_id: str
    template_id: str
    customization: Customization
    model: Optional[ModelPackage]
    target_platforms: tuple[Platform, ...]
    upload_endpoint: str
    created_at: str


@dataclass(frozen=True)
class DeployConfig:
    platform: Platform
    channel: Channel
    app_identifier: str
    lane_steps: tuple[Mapping[str, str], ...]


def instantiate_template(
    template: AppTemplate,
    customization: Customization,
    model_package: Optional[ModelPackage] = None,
    platforms: Sequence[Platform | str] = (Platform.IOS, Platform.ANDROID),
    upload_endpoint: str = DEFAULT_UPLOAD_ENDPOINT,
) -> AppBundleDescriptor:
    """Combine template, customization, and model into a bundle descriptor.

    Every descriptor either embeds a model package or runs expert-only;
    never neither.
    """
    if model_package is not None:
        if model_package.task not in template.supported_tasks:
            raise TaskMismatch(
                f"template {template.template_id} does not support "
                f"{model_package.task.value} models"
            )
        if len(model_package.label_map) == 0:
            raise MissingModel("model package has an empty label map")
    elif not customization.expert_mode_enabled:
        raise MissingModel("no model package and expert mode disabled")
    if customization.expert_mode_enabled and not template.supports_expert_mode:
        raise ExpertModeUnsupported(f"template {template.template_id} has no expert mode")
    extra = customization.used_keys() - template.customizable_keys
    if extra:
        raise UnsupportedCustomization(
            f"template {template.template_id} does not allow: {', '.join(sorted(extra))}"
        )
    normalized = tuple(Platform(p) for p in platforms)
    if not normalized:
        raise ValueError("at least one target platform is required")
    return AppBundleDescriptor(
        bundle_id=uuid.uuid4().hex,
        template_id=template.template_id,
        customization=customization,
        model=model_package,
        target_platforms=normalized,
        upload_endpoint=upload_endpoint,
        created_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
    )


def _require_platform(descriptor: AppBundleDescriptor, platform: Platform | str) -> Platform:
    platform = Platform(platform)
    if platform not in descriptor.target_platforms:
        raise PlatformNotTargeted(f"bundle does not target {platform.value}")
    return platform


def emit_build_manifest(descriptor: AppBundleDescriptor, platform: Platform | str) -> str:
    """Render the build manifest for one platform.

    The manifest is a pure function of the descriptor's content (never
    its identity fields), so rebuilding the same inputs yields
    byte-identical output.
    """
    platform = _require_platform(descriptor, platform)
    c = descriptor.customization
    manifest = {
        "template": {
            "id": descriptor.template_id,
            "source_ref": f"templates/{descriptor.template_id}",
        },
        "assets": {
            "app_name": c.app_name,
            "gui_color": c.gui_color,
            "icon": c.icon,
            "logo": c.logo,
            "info_panel_text": c.info_panel_text,
        },
        "model": (
            {
                "path": MODEL_BUNDLE_PATH,
                "checksum": descriptor.model.checksum,
                "format_tag": descriptor.model.runtime_format_tag,
                "input_size": list(descriptor.model.input_size),
            }
            if descriptor.model is not None
            else None
        ),
        "labels": (
            {
                "path": LABELS_BUNDLE_PATH,
                "classes": list(descriptor.model.label_map),
            }
            if descriptor.model is not None
            else None
        ),
        "runtime": {
            "confidence_threshold": c.confidence_threshold,
            "expert_mode": c.expert_mode_enabled,
            "upload_endpoint": descriptor.upload_endpoint,
        },
        "build": {
            "platform": platform.value,
            "tool_entry_point": _TOOL_ENTRY_POINTS[platform.value],
        },
    }
    return json.dumps(manifest, indent=2, sort_keys=True) + "\n"


def app_identifier(descriptor: AppBundleDescriptor) -> str:
    slug = re.sub(r"[^a-z0-9]", "", descriptor.customization.app_name.lower()) or "app"
    return f"org.fieldforge.{slug}"


def emit_deploy_lanes(
    descriptor: AppBundleDescriptor,
    platform: Platform | str,
    channel: Channel | str,
) -> DeployConfig:
    """Generate the deployment lane for one platform and channel.

    Both channels build and sign; the beta lane ends in a
    beta-distribution step, the release lane in a store submission.
    """
    platform = _require_platform(descriptor, platform)
    channel = Channel(channel)
    store = "App Store" if platform == Platform.IOS else "Play Store"
    beta_channel = "TestFlight" if platform == Platform.IOS else "Play internal testing"
    steps: list[dict[str, str]] = [
        {"id": "fetch_signing_credentials", "description": f"fetch {platform.value} signing material"},
        {"id": "build", "description": f"build via {_TOOL_ENTRY_POINTS[platform.value]}"},
        {"id": "sign", "description": "sign the build"},
    ]
    if channel == Channel.BETA:
        steps.append({"id": "distribute_beta", "description": f"upload to {beta_channel}"})
    else:
        steps.append({"id": "submit_store", "description": f"submit to {store}"})
    return DeployConfig(
        platform=platform,
        channel=channel,
        app_identifier=app_identifier(descriptor),
        lane_steps=tuple(steps),
    )


def deploy_config_to_json(config: DeployConfig) -> str:
    return json.dumps(
        {
            "platform": config.platform.value,
            "channel": config.channel.value,
            "app_identifier": config.app_identifier,
            "lane_steps": [dict(step) for step in config.lane_steps],
        },
        indent=2,
        sort_keys=True,
    ) + "\n"


# ---------------------------------------------------------------------------
# Descriptor serialization (bundles/<id>/descriptor.json)
# ---------------------------------------------------------------------------

def descriptor_to_json(descriptor: AppBundleDescriptor) -> str:
    c = descriptor.customization
    payload = {
        "bundle_id": descriptor.bundle_id,
        "template_id": descriptor.template_id,
        "customization": {
            "app_name": c.app_name,
            "gui_color": c.gui_color,
            "icon": c.icon,
            "logo": c.logo,
            "info_panel_text": c.info_panel_text,
            "expert_mode_enabled": c.expert_mode_enabled,
            "confidence_threshold": c.confidence_threshold,
        },
        "model": (
            {
                "weights_ref": descriptor.model.weights_ref,
                "runtime_format_tag": descriptor.model.runtime_format_tag,
                "label_map": list(descriptor.model.label_map),
                "input_size": list(descriptor.model.input_size),
                "checksum": descriptor.model.checksum,
                "source_run": descriptor.model.source_run,
                "task": descriptor.model.task.value,
            }
            if descriptor.model is not None
            else None
        ),
        "target_platforms": [p.value for p in descriptor.target_platforms],
        "upload_endpoint": descriptor.upload_endpoint,
        "created_at": descriptor.created_at,
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def descriptor_from_json(text: str) -> AppBundleDescriptor:
    from .domain import LabelMap

    data = json.loads(text)
    c = data["customization"]
    model = None
    if data.get("model") is not None:
        m = data["model"]
        model = ModelPackage(
            weights_ref=m["weights_ref"],
            runtime_format_tag=m["runtime_format_tag"],
            label_map=LabelMap(m["label_map"]),
            input_size=(int(m["input_size"][0]), int(m["input_size"][1])),
            checksum=m["checksum"],
            source_run=m["source_run"],
            task=Task(m.get("task", "detection")),
        )
    return AppBundleDescriptor(
        bundle_id=data["bundle_id"],
        template_id=data["template_id"],
        customization=Customization(
            app_name=c["app_name"],
            gui_color=c["gui_color"],
            icon=c.get("icon"),
            logo=c.get("logo"),
            info_panel_text=c.get("info_panel_text"),
            expert_mode_enabled=c.get("expert_mode_enabled", False),
            confidence_threshold=c.get("confidence_threshold", DEFAULT_CONFIDENCE_THRESHOLD),
        ),
        model=model,
        target_platforms=tuple(Platform(p) for p in data["target_platforms"]),
        upload_endpoint=data["upload_endpoint"],
        created_at=data["created_at"],
    )
