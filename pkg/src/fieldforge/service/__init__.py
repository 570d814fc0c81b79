"""Observation collection, curation, and retraining-export service."""

from .core import (
    AuthMethod,
    ObservationMode,
    ObservationService,
    Role,
    Verdict,
)
from .http import create_app, serve, service_from_env
from .store import FileStore, MemoryStore

__all__ = [
    "AuthMethod",
    "FileStore",
    "MemoryStore",
    "ObservationMode",
    "ObservationService",
    "Role",
    "Verdict",
    "create_app",
    "serve",
    "service_from_env",
]
