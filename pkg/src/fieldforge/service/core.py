"""Back-end operations: accounts, projects, observations, curation, export.

Transport-agnostic; the HTTP layer is a thin adapter over this class.
Records are stored as plain dicts so every backend serializes them
unchanged; domain types come into play where geometry must be
validated or exported.
"""

from __future__ import annotations

import hashlib
import re
import secrets
import uuid
from datetime import datetime, timezone
from enum import Enum
from typing import Mapping, Optional, Sequence

from ..domain import (
    AnnotationSet,
    BoundingBox,
    ImageRecord,
    LabelMap,
    Task,
    validate_annotation_set,
    validate_label_map,
)
from ..errors import (
    EmailTaken,
    Forbidden,
    PayloadTooLarge,
    Unauthenticated,
    UnknownObservation,
    UnknownProject,
    ValidationFailed,
    WeakCredential,
)
from .store import MemoryStore

DEFAULT_MEDIA_CAP_MB = 100

_EMAIL_RE = re.compile(r"^[^@\s]+@[^@\s]+\.[^@\s]+$")
_PBKDF2_ITERATIONS = 100_000


class Role(str, Enum):
    RESEARCHER = "researcher"
    PARTICIPANT = "participant"
    CURATOR = "curator"


class AuthMethod(str, Enum):
    EMAIL_PASSWORD = "email_password"
    ANONYMOUS = "anonymous"


class ObservationMode(str, Enum):
    ML_ASSISTED = "ml_assisted"
    EXPERT = "expert"


class Verdict(str, Enum):
    ACCEPTED = "accepted"
    REJECTED = "rejected"
    CORRECTED = "corrected"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _parse_timestamp(value: str, what: str) -> datetime:
    try:
        parsed = datetime.fromisoformat(str(value).replace("Z", "+00:00"))
    except ValueError as exc:
        raise ValidationFailed(f"{what} is not an ISO timestamp: {value!r}") from exc
    if parsed.tzinfo is None:
        parsed = parsed.replace(tzinfo=timezone.utc)
    return parsed


def hash_credential(credential: str) -> str:
    salt = secrets.token_bytes(16)
    digest = hashlib.pbkdf2_hmac("sha256", credential.encode(), salt, _PBKDF2_ITERATIONS)
    return f"pbkdf2-sha256${_PBKDF2_ITERATIONS}${salt.hex()}${digest.hex()}"


def verify_credential(credential: str, stored: str) -> bool:
    try:
        _, iterations, salt_hex, digest_hex = stored.split("$")
        digest = hashlib.pbkdf2_hmac(
            "sha256", credential.encode(), bytes.fromhex(salt_hex), int(iterations)
        )
        return secrets.compare_digest(digest.hex(), digest_hex)
    except (ValueError, AttributeError):
        return False


class ObservationService:
    """The collection-and-curation loop behind every generated app."""

    def __init__(self, store: MemoryStore | None = None, media_cap_mb: float = DEFAULT_MEDIA_CAP_MB):
        self.store = store if store is not None else MemoryStore()
        self.media_cap_bytes = int(media_cap_mb * 1024 * 1024)

    # -- accounts and tokens -------------------------------------------

    def register_account(
        self,
        method: AuthMethod | str,
        email: Optional[str] = None,
        credential: Optional[str] = None,
        role: Role | str = Role.PARTICIPANT,
    ) -> dict:
        method = AuthMethod(method)
        role = Role(role)
        if method == AuthMethod.EMAIL_PASSWORD:
            if not email or not _EMAIL_RE.match(email):
                raise ValidationFailed(f"invalid email: {email!r}")
            if not credential or len(credential) < 8:
                raise WeakCredential("credential must be at least 8 characters")
            if self.store.account_by_email(email):
                raise EmailTaken(f"{email} already registered")
            account = {
                "account_id": uuid.uuid4().hex,
                "method": method.value,
                "email": email,
                "credential_hash": hash_credential(credential),
                "role": role.value,
            }
        else:
            if email or credential:
                raise ValidationFailed("anonymous accounts carry no email or credential")
            account = {
                "account_id": uuid.uuid4().hex,
                "method": method.value,
                "email": None,
                "credential_hash": None,
                "role": role.value,
            }
        self.store.put_account(account)
        return {k: v for k, v in account.items() if k != "credential_hash"}

    def issue_token(
        self,
        email: Optional[str] = None,
        credential: Optional[str] = None,
        account_id: Optional[str] = None,
    ) -> dict:
        if email is not None:
            account = self.store.account_by_email(email)
            if (
                account is None
                or account["method"] != AuthMethod.EMAIL_PASSWORD.value
                or not credential
                or not verify_credential(credential, account["credential_hash"])
            ):
                raise Unauthenticated("bad email or credential")
        elif account_id is not None:
            account = self.store.account_by_id(account_id)
            if account is None or account["method"] != AuthMethod.ANONYMOUS.value:
                raise Unauthenticated("unknown anonymous account")
        else:
            raise ValidationFailed("supply email+credential or account_id")
        token = secrets.token_hex(16)
        self.store.put_token(token, account["account_id"])
        return {"token": token, "account_id": account["account_id"]}

    def authenticate(self, token: Optional[str]) -> dict:
        if not token:
            raise Unauthenticated("missing token")
        account = self.store.account_for_token(token)
        if account is None:
            raise Unauthenticated("invalid token")
        return account

    def _require_role(self, account: Mapping, *roles: Role) -> None:
        if Role(account["role"]) not in roles:
            raise Forbidden(
                f"requires {' or '.join(r.value for r in roles)}, "
                f"account has {account['role']}"
            )

    # -- projects --------------------------------------------------------

    def create_project(self, token: Optional[str], name: str, label_map: Sequence[str]) -> dict:
        account = self.authenticate(token)
        self._require_role(account, Role.RESEARCHER)
        if not name or not name.strip():
            raise ValidationFailed("project name must be non-empty")
        report = validate_label_map(LabelMap(label_map))
        if not report.ok:
            raise ValidationFailed(
                "; ".join(f"{i.code}: {i.message}" for i in report.errors)
            )
        project = {
            "project_id": uuid.uuid4().hex,
            "owner": account["account_id"],
            "name": name.strip(),
            "label_map": list(label_map),
            "created_at": _now(),
        }
        self.store.put_project(project)
        return project

    def _project(self, project_id: str) -> dict:
        project = self.store.project_by_id(project_id)
        if project is None:
            raise UnknownProject(f"no project {project_id}")
        return project

    # -- observations ------------------------------------------------------

    def upload_observation(
        self,
        token: Optional[str],
        project_id: str,
        metadata: Mapping,
        media: bytes,
        idempotency_key: Optional[str] = None,
    ) -> dict:
        account = self.authenticate(token)
        project = self._project(project_id)
        if len(media) > self.media_cap_bytes:
            raise PayloadTooLarge(
                f"media is {len(media)} bytes, cap is {self.media_cap_bytes}"
            )
        if not media:
            raise ValidationFailed("media payload is empty")
        if idempotency_key:
            previous = self.store.receipt_for_key(idempotency_key)
            if previous is not None:
                return dict(previous)

        checksum = hashlib.sha256(media).hexdigest()
        observation = self._validated_observation(account, project, metadata, checksum)
        claimed = metadata.get("checksum")
        if claimed and claimed != checksum:
            raise ValidationFailed("claimed checksum does not match received bytes")

        self.store.put_observation(observation, media)
        receipt = {
            "observation_id": observation["observation_id"],
            "stored_checksum": checksum,
        }
        if idempotency_key:
            self.store.put_receipt(idempotency_key, receipt)
        return receipt

    def _validated_observation(
        self, account: Mapping, project: Mapping, metadata: Mapping, checksum: str
    ) -> dict:
        mode_raw = metadata.get("mode", ObservationMode.ML_ASSISTED.value)
        try:
            mode = ObservationMode(mode_raw)
        except ValueError:
            raise ValidationFailed(f"unknown mode {mode_raw!r}") from None

        captured_at = metadata.get("captured_at") or _now()
        _parse_timestamp(captured_at, "captured_at")

        geo = metadata.get("geo")
        if geo is not None:
            try:
                lat, lon = float(geo["lat"]), float(geo["lon"])
            except (KeyError, TypeError, ValueError):
                raise ValidationFailed(f"geo must be {{lat, lon}}, got {geo!r}") from None
            if not -90 <= lat <= 90 or not -180 <= lon <= 180:
                raise ValidationFailed(f"geo out of range: lat={lat}, lon={lon}")
            geo = {"lat": lat, "lon": lon}

        try:
            width = int(metadata["media_width"])
            height = int(metadata["media_height"])
        except (KeyError, TypeError, ValueError):
            raise ValidationFailed("metadata needs integer media_width/media_height") from None

        observation_id = uuid.uuid4().hex
        detections = self._validated_detections(
            metadata.get("detections", []), project, observation_id, width, height
        )
        return {
            "observation_id": observation_id,
            "project_id": project["project_id"],
            "submitter": account["account_id"],
            "media_ref": observation_id,
            "checksum": checksum,
            "captured_at": captured_at,
            "geo": geo,
            "detections": detections,
            "mode": mode.value,
            "media_width": width,
            "media_height": height,
        }

    def _validated_detections(
        self,
        raw_detections,
        project: Mapping,
        media_id: str,
        width: int,
        height: int,
    ) -> list[dict]:
        if not isinstance(raw_detections, (list, tuple)):
            raise ValidationFailed("detections must be a list of boxes")
        boxes = []
        for raw in raw_detections:
            try:
                boxes.append(
                    BoundingBox(
                        float(raw["x_min"]),
                        float(raw["y_min"]),
                        float(raw["x_max"]),
                        float(raw["y_max"]),
                        class_id=int(raw["class_id"]),
                        confidence=(
                            float(raw["confidence"]) if raw.get("confidence") is not None else None
                        ),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ValidationFailed(f"bad detection {raw!r}: {exc}") from None
        probe = AnnotationSet(
            task=Task.DETECTION,
            label_map=LabelMap(project["label_map"]),
            images=[ImageRecord(media_id=media_id, width=width, height=height)],
            boxes={media_id: boxes},
        )
        report = validate_annotation_set(probe)
        if not report.ok:
            raise ValidationFailed(
                "; ".join(f"{i.code}: {i.message}" for i in report.errors)
            )
        return [
            {
                "x_min": b.x_min,
                "y_min": b.y_min,
                "x_max": b.x_max,
                "y_max": b.y_max,
                "class_id": b.class_id,
                "confidence": b.confidence,
            }
            for b in boxes
        ]

    def _observation(self, observation_id: str) -> dict:
        observation = self.store.observation_by_id(observation_id)
        if observation is None:
            raise UnknownObservation(f"no observation {observation_id}")
        return observation

    # -- curation ----------------------------------------------------------

    def curate_observation(
        self,
        token: Optional[str],
        observation_id: str,
        verdict: Verdict | str,
        corrected_boxes=None,
        feedback_text: Optional[str] = None,
    ) -> dict:
        account = self.authenticate(token)
        self._require_role(account, Role.CURATOR)
        observation = self._observation(observation_id)
        try:
            verdict = Verdict(verdict)
        except ValueError:
            raise ValidationFailed(f"unknown verdict {verdict!r}") from None
        corrected: Optional[list[dict]] = None
        if verdict == Verdict.CORRECTED:
            if not corrected_boxes:
                raise ValidationFailed("corrected verdict requires corrected_boxes")
            project = self._project(observation["project_id"])
            corrected = self._validated_detections(
                corrected_boxes,
                project,
                observation_id,
                observation["media_width"],
                observation["media_height"],
            )
        elif corrected_boxes:
            raise ValidationFailed("corrected_boxes only allowed with verdict=corrected")
        record = {
            "observation_id": observation_id,
            "curator": account["account_id"],
            "verdict": verdict.value,
            "corrected_boxes": corrected,
            "feedback_text": feedback_text,
            "decided_at": _now(),
        }
        self.store.append_curation(record)
        return record

    def get_feedback(self, token: Optional[str], observation_id: str) -> dict:
        account = self.authenticate(token)
        observation = self._observation(observation_id)
        is_submitter = account["account_id"] == observation["submitter"]
        if not is_submitter and Role(account["role"]) != Role.CURATOR:
            raise Forbidden("feedback is visible to the submitter and curators only")
        record = self.store.active_curation(observation_id)
        if record is None:
            return {"observation_id": observation_id, "status": "pending"}
        return {
            "observation_id": observation_id,
            "status": "decided",
            "verdict": record["verdict"],
            "feedback_text": record["feedback_text"],
            "decided_at": record["decided_at"],
        }

    # -- retraining export ---------------------------------------------------

    def export_retraining_set(
        self,
        token: Optional[str],
        project_id: str,
        since: Optional[str] = None,
        modes: Optional[Sequence[str]] = None,
    ) -> AnnotationSet:
        """Collect curated observations into a retraining delta.

        Includes exactly the observations whose active curation verdict
        is accepted or corrected; corrected ones contribute the
        curator's boxes, not the original detections.
        """
        account = self.authenticate(token)
        self._require_role(account, Role.RESEARCHER, Role.CURATOR)
        project = self._project(project_id)
        since_dt = _parse_timestamp(since, "since") if since else None
        mode_filter = {ObservationMode(m).value for m in modes} if modes else None

        images: list[ImageRecord] = []
        boxes: dict[str, list[BoundingBox]] = {}
        for observation in sorted(
            self.store.observations_for_project(project_id),
            key=lambda o: o["observation_id"],
        ):
            record = self.store.active_curation(observation["observation_id"])
            if record is None or record["verdict"] not in (
                Verdict.ACCEPTED.value,
                Verdict.CORRECTED.value,
            ):
                continue
            if since_dt and _parse_timestamp(observation["captured_at"], "captured_at") < since_dt:
                continue
            if mode_filter and observation["mode"] not in mode_filter:
                continue
            media_id = observation["observation_id"]
            images.append(
                ImageRecord(
                    media_id=media_id,
                    width=observation["media_width"],
                    height=observation["media_height"],
                )
            )
            source = (
                record["corrected_boxes"]
                if record["verdict"] == Verdict.CORRECTED.value
                else observation["detections"]
            )
            boxes[media_id] = [
                BoundingBox(
                    d["x_min"],
                    d["y_min"],
                    d["x_max"],
                    d["y_max"],
                    class_id=d["class_id"],
                    confidence=d.get("confidence"),
                )
                for d in source
            ]
        delta = AnnotationSet(
            task=Task.DETECTION,
            label_map=LabelMap(project["label_map"]),
            images=images,
            boxes=boxes,
        )
        report = validate_annotation_set(delta)
        if not report.ok:  # curation-time validation should make this unreachable
            raise ValidationFailed(
                "; ".join(f"{i.code}: {i.message}" for i in report.errors)
            )
        return delta
