import hashlib
import json

import pytest
from fastapi.testclient import TestClient

from fieldforge.domain import validate_annotation_set
from fieldforge.errors import (
    EmailTaken,
    Unauthenticated,
    ValidationFailed,
    WeakCredential,
)
from fieldforge.service import (
    FileStore,
    MemoryStore,
    ObservationService,
    Role,
    create_app,
)


@pytest.fixture
def service():
    return ObservationService(MemoryStore())


@pytest.fixture
def client(service):
    return TestClient(create_app(service))


def register_and_login(client, email, role, credential="sandy-beach-9"):
    client.post(
        "/accounts",
        json={"method": "email_password", "email": email, "credential": credential, "role": role},
    )
    token = client.post("/tokens", json={"email": email, "credential": credential}).json()["token"]
    return token


@pytest.fixture
def tokens(client):
    return {
        "researcher": register_and_login(client, "res@lab.org", "researcher"),
        "participant": register_and_login(client, "vol@lab.org", "participant"),
        "curator": register_and_login(client, "cur@lab.org", "curator"),
    }


@pytest.fixture
def project_id(client, tokens):
    response = client.post(
        "/projects",
        json={"name": "rip watch", "label_map": ["breaking_wave", "rip_current"]},
        headers=auth(tokens["researcher"]),
    )
    assert response.status_code == 201
    return response.json()["project_id"]


def auth(token):
    return {"Authorization": f"Bearer {token}"}


def upload(client, token, project_id, media=b"raw-video-bytes", key=None, **meta_overrides):
    metadata = {
        "media_width": 640,
        "media_height": 480,
        "mode": "ml_assisted",
        "captured_at": "2026-08-01T10:00:00+00:00",
        "geo": {"lat": 36.95, "lon": -122.03},
        "detections": [
            {"x_min": 10, "y_min": 20, "x_max": 200, "y_max": 240, "class_id": 1, "confidence": 0.87}
        ],
    }
    metadata.update(meta_overrides)
    headers = auth(token)
    if key:
        headers["Idempotency-Key"] = key
    return client.post(
        f"/projects/{project_id}/observations",
        data={"metadata": json.dumps(metadata)},
        files={"media": ("clip.mp4", media)},
        headers=headers,
    )


class TestAccounts:
    def test_anonymous_account_has_no_email(self, service):
        account = service.register_account("anonymous")
        assert account["email"] is None
        assert account["method"] == "anonymous"

    def test_duplicate_email(self, service):
        service.register_account("email_password", "a@b.co", "longenough")
        with pytest.raises(EmailTaken):
            service.register_account("email_password", "a@b.co", "otherlongone")

    def test_short_credential(self, service):
        with pytest.raises(WeakCredential):
            service.register_account("email_password", "a@b.co", "tiny")

    def test_invalid_email(self, service):
        with pytest.raises(ValidationFailed):
            service.register_account("email_password", "not-an-email", "longenough")

    def test_credential_stored_as_salted_hash(self, service):
        service.register_account("email_password", "a@b.co", "longenough")
        stored = service.store.account_by_email("a@b.co")["credential_hash"]
        assert "longenough" not in stored
        assert stored.startswith("pbkdf2-sha256$")

    def test_login_and_bad_credential(self, service):
        service.register_account("email_password", "a@b.co", "longenough")
        token = service.issue_token(email="a@b.co", credential="longenough")["token"]
        assert service.authenticate(token)["email"] == "a@b.co"
        with pytest.raises(Unauthenticated):
            service.issue_token(email="a@b.co", credential="wrongwrong")

    def test_anonymous_token_by_account_id(self, service):
        account = service.register_account("anonymous")
        token = service.issue_token(account_id=account["account_id"])["token"]
        assert service.authenticate(token)["account_id"] == account["account_id"]


class TestUpload:
    def test_receipt_checksum_matches_sent_bytes(self, client, tokens, project_id):
        media = b"field clip bytes"
        response = upload(client, tokens["participant"], project_id, media=media)
        assert response.status_code == 201
        assert response.json()["stored_checksum"] == hashlib.sha256(media).hexdigest()

    def test_missing_token_401(self, client, project_id):
        response = client.post(
            f"/projects/{project_id}/observations",
            data={"metadata": "{}"},
            files={"media": ("x", b"abc")},
        )
        assert response.status_code == 401
        assert response.json()["error"] == "UNAUTHENTICATED"

    def test_latitude_out_of_range_422(self, client, tokens, project_id):
        response = upload(
            client, tokens["participant"], project_id, geo={"lat": 100, "lon": 0}
        )
        assert response.status_code == 422
        assert response.json()["error"] == "VALIDATION_FAILED"

    def test_unknown_project_404(self, client, tokens):
        assert upload(client, tokens["participant"], "nope").status_code == 404

    def test_box_outside_media_422(self, client, tokens, project_id):
        response = upload(
            client,
            tokens["participant"],
            project_id,
            detections=[{"x_min": 0, "y_min": 0, "x_max": 900, "y_max": 10, "class_id": 0}],
        )
        assert response.status_code == 422

    def test_unknown_class_id_422(self, client, tokens, project_id):
        response = upload(
            client,
            tokens["participant"],
            project_id,
            detections=[{"x_min": 0, "y_min": 0, "x_max": 9, "y_max": 9, "class_id": 5}],
        )
        assert response.status_code == 422

    def test_payload_too_large_413(self, tokens_factory=None):
        service = ObservationService(MemoryStore(), media_cap_mb=0.0001)
        client = TestClient(create_app(service))
        token = register_and_login(client, "r@lab.org", "researcher")
        project = client.post(
            "/projects", json={"name": "p", "label_map": ["a"]}, headers=auth(token)
        ).json()["project_id"]
        response = upload(client, token, project, media=b"x" * 1024, detections=[])
        assert response.status_code == 413

    def test_expert_mode_upload_without_detections(self, client, tokens, project_id):
        response = upload(
            client, tokens["participant"], project_id, mode="expert", detections=[]
        )
        assert response.status_code == 201

    def test_idempotent_retry_single_store(self, client, tokens, project_id, service):
        first = upload(client, tokens["participant"], project_id, key="retry-1")
        second = upload(client, tokens["participant"], project_id, key="retry-1")
        assert first.json() == second.json()
        assert len(service.store.observations_for_project(project_id)) == 1

    def test_different_keys_store_twice(self, client, tokens, project_id, service):
        upload(client, tokens["participant"], project_id, key="k-1")
        upload(client, tokens["participant"], project_id, key="k-2")
        assert len(service.store.observations_for_project(project_id)) == 2

    def test_claimed_checksum_mismatch_422(self, client, tokens, project_id):
        response = upload(
            client, tokens["participant"], project_id, checksum="deadbeef"
        )
        assert response.status_code == 422


class TestCuration:
    def observation(self, client, tokens, project_id):
        return upload(client, tokens["participant"], project_id).json()["observation_id"]

    def test_curator_accepts(self, client, tokens, project_id):
        oid = self.observation(client, tokens, project_id)
        response = client.post(
            f"/observations/{oid}/curation",
            json={"verdict": "accepted", "feedback_text": "clear rip channel"},
            headers=auth(tokens["curator"]),
        )
        assert response.status_code == 201
        assert response.json()["verdict"] == "accepted"

    def test_participant_cannot_curate(self, client, tokens, project_id):
        oid = self.observation(client, tokens, project_id)
        response = client.post(
            f"/observations/{oid}/curation",
            json={"verdict": "accepted"},
            headers=auth(tokens["participant"]),
        )
        assert response.status_code == 403
        assert response.json()["error"] == "FORBIDDEN"

    def test_unknown_observation_404(self, client, tokens):
        response = client.post(
            "/observations/nope/curation",
            json={"verdict": "accepted"},
            headers=auth(tokens["curator"]),
        )
        assert response.status_code == 404

    def test_corrected_requires_boxes(self, client, tokens, project_id):
        oid = self.observation(client, tokens, project_id)
        response = client.post(
            f"/observations/{oid}/curation",
            json={"verdict": "corrected"},
            headers=auth(tokens["curator"]),
        )
        assert response.status_code == 422

    def test_later_decision_supersedes(self, client, tokens, project_id, service):
        oid = self.observation(client, tokens, project_id)
        headers = auth(tokens["curator"])
        client.post(f"/observations/{oid}/curation", json={"verdict": "rejected"}, headers=headers)
        client.post(f"/observations/{oid}/curation", json={"verdict": "accepted"}, headers=headers)
        assert service.store.active_curation(oid)["verdict"] == "accepted"

    def test_feedback_loop(self, client, tokens, project_id):
        oid = self.observation(client, tokens, project_id)
        pending = client.get(f"/observations/{oid}/feedback", headers=auth(tokens["participant"]))
        assert pending.json()["status"] == "pending"
        client.post(
            f"/observations/{oid}/curation",
            json={"verdict": "rejected", "feedback_text": "too blurry, hold steadier"},
            headers=auth(tokens["curator"]),
        )
        decided = client.get(f"/observations/{oid}/feedback", headers=auth(tokens["participant"]))
        assert decided.json()["feedback_text"] == "too blurry, hold steadier"

    def test_feedback_hidden_from_other_participants(self, client, tokens, project_id):
        oid = self.observation(client, tokens, project_id)
        other = register_and_login(client, "other@lab.org", "participant")
        assert (
            client.get(f"/observations/{oid}/feedback", headers=auth(other)).status_code == 403
        )


class TestRetrainingExport:
    def test_eligibility_counting(self, client, tokens, project_id):
        ids = [
            upload(client, tokens["participant"], project_id, media=f"clip{i}".encode()).json()[
                "observation_id"
            ]
            for i in range(5)
        ]
        headers = auth(tokens["curator"])
        for oid in ids[:3]:
            client.post(f"/observations/{oid}/curation", json={"verdict": "accepted"}, headers=headers)
        client.post(f"/observations/{ids[3]}/curation", json={"verdict": "rejected"}, headers=headers)
        # ids[4] stays pending
        response = client.get(
            f"/projects/{project_id}/retraining-export", headers=auth(tokens["researcher"])
        )
        assert response.status_code == 200
        delta = response.json()
        assert len(delta["images"]) == 3
        assert delta["label_map"] == ["breaking_wave", "rip_current"]

    def test_corrected_observation_carries_corrected_boxes(self, client, tokens, project_id):
        oid = upload(client, tokens["participant"], project_id).json()["observation_id"]
        corrected = [{"x_min": 5, "y_min": 6, "x_max": 50, "y_max": 60, "class_id": 0}]
        client.post(
            f"/observations/{oid}/curation",
            json={"verdict": "corrected", "corrected_boxes": corrected},
            headers=auth(tokens["curator"]),
        )
        delta = client.get(
            f"/projects/{project_id}/retraining-export", headers=auth(tokens["researcher"])
        ).json()
        (box,) = delta["boxes"][oid]
        assert (box["x_min"], box["y_min"], box["x_max"], box["y_max"]) == (5, 6, 50, 60)
        assert box["class_id"] == 0

    def test_empty_project_empty_valid_set(self, service):
        researcher = service.register_account("email_password", "r2@lab.org", "longenough", role="researcher")
        token = service.issue_token(email="r2@lab.org", credential="longenough")["token"]
        project = service.create_project(token, "empty", ["a", "b"])
        delta = service.export_retraining_set(token, project["project_id"])
        assert delta.images == ()
        assert validate_annotation_set(delta).ok

    def test_mode_filter(self, client, tokens, project_id):
        ml = upload(client, tokens["participant"], project_id).json()["observation_id"]
        expert = upload(
            client, tokens["participant"], project_id, mode="expert", detections=[]
        ).json()["observation_id"]
        headers = auth(tokens["curator"])
        for oid in (ml, expert):
            client.post(f"/observations/{oid}/curation", json={"verdict": "accepted"}, headers=headers)
        delta = client.get(
            f"/projects/{project_id}/retraining-export?modes=expert",
            headers=auth(tokens["researcher"]),
        ).json()
        assert [r["media_id"] for r in delta["images"]] == [expert]

    def test_since_filter(self, client, tokens, project_id):
        early = upload(
            client, tokens["participant"], project_id, captured_at="2026-01-01T00:00:00+00:00"
        ).json()["observation_id"]
        late = upload(
            client, tokens["participant"], project_id, captured_at="2026-08-01T00:00:00+00:00"
        ).json()["observation_id"]
        headers = auth(tokens["curator"])
        for oid in (early, late):
            client.post(f"/observations/{oid}/curation", json={"verdict": "accepted"}, headers=headers)
        delta = client.get(
            f"/projects/{project_id}/retraining-export?since=2026-06-01T00:00:00%2B00:00",
            headers=auth(tokens["researcher"]),
        ).json()
        assert [r["media_id"] for r in delta["images"]] == [late]

    def test_participant_cannot_export(self, client, tokens, project_id):
        response = client.get(
            f"/projects/{project_id}/retraining-export", headers=auth(tokens["participant"])
        )
        assert response.status_code == 403


class TestAuthorizationMatrix:
    CASES = [
        ("researcher", "create_project", 201),
        ("participant", "create_project", 403),
        ("curator", "create_project", 403),
        ("researcher", "upload", 201),
        ("participant", "upload", 201),
        ("curator", "upload", 201),
        ("researcher", "curate", 403),
        ("participant", "curate", 403),
        ("curator", "curate", 201),
        ("researcher", "export", 200),
        ("participant", "export", 403),
        ("curator", "export", 200),
    ]

    @pytest.mark.parametrize("role,action,expected", CASES)
    def test_role_endpoint_matrix(self, client, tokens, project_id, role, action, expected):
        token = tokens[role]
        target = upload(client, tokens["participant"], project_id).json()["observation_id"]
        if action == "create_project":
            response = client.post(
                "/projects", json={"name": "x", "label_map": ["a"]}, headers=auth(token)
            )
        elif action == "upload":
            response = upload(client, token, project_id)
        elif action == "curate":
            response = client.post(
                f"/observations/{target}/curation",
                json={"verdict": "accepted"},
                headers=auth(token),
            )
        else:
            response = client.get(
                f"/projects/{project_id}/retraining-export", headers=auth(token)
            )
        assert response.status_code == expected

    @pytest.mark.parametrize(
        "method,path",
        [
            ("POST", "/projects"),
            ("POST", "/projects/xyz/observations"),
            ("POST", "/observations/xyz/curation"),
            ("GET", "/projects/xyz/retraining-export"),
            ("GET", "/observations/xyz/feedback"),
        ],
    )
    def test_every_protected_endpoint_requires_token(self, client, method, path):
        if method == "POST" and path.endswith("observations"):
            response = client.post(path, data={"metadata": "{}"}, files={"media": ("x", b"b")})
        elif method == "POST":
            response = client.post(path, json={})
        else:
            response = client.get(path)
        assert response.status_code == 401


class TestFileStorePersistence:
    def test_state_survives_restart(self, tmp_path):
        store = FileStore(tmp_path)
        service = ObservationService(store)
        service.register_account("email_password", "r@lab.org", "longenough", role=Role.RESEARCHER)
        token = service.issue_token(email="r@lab.org", credential="longenough")["token"]
        project = service.create_project(token, "persisted", ["a"])
        receipt = service.upload_observation(
            token,
            project["project_id"],
            {"media_width": 10, "media_height": 10, "detections": []},
            b"bytes-on-disk",
        )
        reopened = ObservationService(FileStore(tmp_path))
        observation = reopened.store.observation_by_id(receipt["observation_id"])
        assert observation is not None
        assert reopened.store.media_bytes(observation["media_ref"]) == b"bytes-on-disk"
        assert reopened.authenticate(token)["email"] == "r@lab.org"
