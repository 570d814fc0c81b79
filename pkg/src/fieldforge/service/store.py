"""Persistence backends for the observation service.

The service talks to an abstract store; :class:`MemoryStore` backs the
tests and :class:`FileStore` backs deployments (JSON state file plus a
media blob directory). Mutations take a lock; reads work on the live
dicts, which is safe for the desk-scale request mix this serves.
"""

from __future__ import annotations

import json
import os
import threading
from pathlib import Path
from typing import Optional


class MemoryStore:
    """Ephemeral store; state lives only for the process lifetime."""

    def __init__(self):
        self._lock = threading.Lock()
        self.accounts: dict[str, dict] = {}
        self.tokens: dict[str, str] = {}
        self.projects: dict[str, dict] = {}
        self.observations: dict[str, dict] = {}
        self.curations: dict[str, list[dict]] = {}
        self.idempotency: dict[str, dict] = {}
        self.media: dict[str, bytes] = {}

    # -- accounts -----------------------------------------------------
    def put_account(self, account: dict) -> None:
        with self._lock:
            self.accounts[account["account_id"]] = account
            self._persist()

    def account_by_id(self, account_id: str) -> Optional[dict]:
        return self.accounts.get(account_id)

    def account_by_email(self, email: str) -> Optional[dict]:
        needle = email.strip().casefold()
        for account in self.accounts.values():
            if account.get("email") and account["email"].casefold() == needle:
                return account
        return None

    # -- tokens -------------------------------------------------------
    def put_token(self, token: str, account_id: str) -> None:
        with self._lock:
            self.tokens[token] = account_id
            self._persist()

    def account_for_token(self, token: str) -> Optional[dict]:
        account_id = self.tokens.get(token)
        return self.accounts.get(account_id) if account_id else None

    # -- projects -----------------------------------------------------
    def put_project(self, project: dict) -> None:
        with self._lock:
            self.projects[project["project_id"]] = project
            self._persist()

    def project_by_id(self, project_id: str) -> Optional[dict]:
        return self.projects.get(project_id)

    # -- observations ---------------------------------------------------
    def put_observation(self, observation: dict, media: bytes) -> None:
        with self._lock:
            self.observations[observation["observation_id"]] = observation
            self._store_media(observation["media_ref"], media)
            self._persist()

    def observation_by_id(self, observation_id: str) -> Optional[dict]:
        return self.observations.get(observation_id)

    def observations_for_project(self, project_id: str) -> list[dict]:
        return [o for o in self.observations.values() if o["project_id"] == project_id]

    def media_bytes(self, media_ref: str) -> Optional[bytes]:
        return self.media.get(media_ref)

    # -- curation -------------------------------------------------------
    def append_curation(self, record: dict) -> None:
        with self._lock:
            self.curations.setdefault(record["observation_id"], []).append(record)
            self._persist()

    def active_curation(self, observation_id: str) -> Optional[dict]:
        records = self.curations.get(observation_id)
        return records[-1] if records else None

    # -- idempotency ----------------------------------------------------
    def receipt_for_key(self, key: str) -> Optional[dict]:
        return self.idempotency.get(key)

    def put_receipt(self, key: str, receipt: dict) -> None:
        with self._lock:
            self.idempotency[key] = receipt
            self._persist()

    # -- backend hooks --------------------------------------------------
    def _store_media(self, media_ref: str, media: bytes) -> None:
        self.media[media_ref] = media

    def _persist(self) -> None:
        pass


class FileStore(MemoryStore):
    """Durable store: one JSON state file plus a media/ blob directory."""

    def __init__(self, root: str | Path):
        super().__init__()
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / "media").mkdir(exist_ok=True)
        self._state_path = self.root / "state.json"
        if self._state_path.exists():
            state = json.loads(self._state_path.read_text())
            self.accounts = state.get("accounts", {})
            self.tokens = state.get("tokens", {})
            self.projects = state.get("projects", {})
            self.observations = state.get("observations", {})
            self.curations = state.get("curations", {})
            self.idempotency = state.get("idempotency", {})

    def _store_media(self, media_ref: str, media: bytes) -> None:
        (self.root / "media" / media_ref).write_bytes(media)

    def media_bytes(self, media_ref: str) -> Optional[bytes]:
        path = self.root / "media" / media_ref
        return path.read_bytes() if path.exists() else None

    def _persist(self) -> None:
        state = {
            "accounts": self.accounts,
            "tokens": self.tokens,
            "projects": self.projects,
            "observations": self.observations,
            "curations": self.curations,
            "idempotency": self.idempotency,
        }
        tmp = self._state_path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(state, indent=2, sort_keys=True) + "\n")
        os.replace(tmp, self._state_path)
