"""HTTP+JSON adapter over :class:`ObservationService`.

Status mapping: 401 unauthenticated, 403 forbidden, 404 unknown ids,
413 payload too large, 422 validation failures (including taken emails
and weak credentials). Configuration comes from the environment:
``FIELDFORGE_PORT``, ``FIELDFORGE_STORAGE_ROOT``,
``FIELDFORGE_MEDIA_CAP_MB``.
"""

from __future__ import annotations

import os
from typing import Optional

from fastapi import Body, FastAPI, File, Form, Header, Request, Response
from fastapi.responses import JSONResponse

from ..annotations import annotation_set_to_json
from ..errors import FieldForgeError
from .core import DEFAULT_MEDIA_CAP_MB, ObservationService
from .store import FileStore, MemoryStore

_STATUS_BY_CODE = {
    "UNAUTHENTICATED": 401,
    "FORBIDDEN": 403,
    "UNKNOWN_PROJECT": 404,
    "UNKNOWN_OBSERVATION": 404,
    "PAYLOAD_TOO_LARGE": 413,
}

ENV_PORT = "FIELDFORGE_PORT"
ENV_STORAGE_ROOT = "FIELDFORGE_STORAGE_ROOT"
ENV_MEDIA_CAP_MB = "FIELDFORGE_MEDIA_CAP_MB"


def _bearer_token(authorization: Optional[str]) -> Optional[str]:
    if not authorization:
        return None
    scheme, _, token = authorization.partition(" ")
    if scheme.lower() != "bearer" or not token:
        return None
    return token.strip()


def create_app(service: ObservationService | None = None) -> FastAPI:
    if service is None:
        service = service_from_env()
    app = FastAPI(title="fieldforge observation service")

    @app.exception_handler(FieldForgeError)
    async def engine_error(_request: Request, exc: FieldForgeError):
        return JSONResponse(
            status_code=_STATUS_BY_CODE.get(exc.code, 422),
            content={"error": exc.code, "detail": exc.message},
        )

    @app.post("/accounts", status_code=201)
    async def create_account(payload: dict = Body(...)):
        return service.register_account(
            method=payload.get("method", "email_password"),
            email=payload.get("email"),
            credential=payload.get("credential"),
            role=payload.get("role", "participant"),
        )

    @app.post("/tokens", status_code=201)
    async def create_token(payload: dict = Body(...)):
        return service.issue_token(
            email=payload.get("email"),
            credential=payload.get("credential"),
            account_id=payload.get("account_id"),
        )

    @app.post("/projects", status_code=201)
    async def create_project(
        payload: dict = Body(...), authorization: Optional[str] = Header(None)
    ):
        return service.create_project(
            token=_bearer_token(authorization),
            name=payload.get("name", ""),
            label_map=payload.get("label_map", []),
        )

    @app.post("/projects/{project_id}/observations", status_code=201)
    async def upload_observation(
        project_id: str,
        metadata: str = Form(...),
        media: bytes = File(...),
        authorization: Optional[str] = Header(None),
        idempotency_key: Optional[str] = Header(None, alias="Idempotency-Key"),
    ):
        import json as _json

        from ..errors import ValidationFailed

        try:
            parsed = _json.loads(metadata)
        except _json.JSONDecodeError as exc:
            raise ValidationFailed(f"metadata is not valid JSON: {exc}") from exc
        if not isinstance(parsed, dict):
            raise ValidationFailed("metadata must be a JSON object")
        return service.upload_observation(
            token=_bearer_token(authorization),
            project_id=project_id,
            metadata=parsed,
            media=media,
            idempotency_key=idempotency_key,
        )

    @app.post("/observations/{observation_id}/curation", status_code=201)
    async def curate(
        observation_id: str,
        payload: dict = Body(...),
        authorization: Optional[str] = Header(None),
    ):
        return service.curate_observation(
            token=_bearer_token(authorization),
            observation_id=observation_id,
            verdict=payload.get("verdict", ""),
            corrected_boxes=payload.get("corrected_boxes"),
            feedback_text=payload.get("feedback_text"),
        )

    @app.get("/projects/{project_id}/retraining-export")
    async def retraining_export(
        project_id: str,
        since: Optional[str] = None,
        modes: Optional[str] = None,
        authorization: Optional[str] = Header(None),
    ):
        delta = service.export_retraining_set(
            token=_bearer_token(authorization),
            project_id=project_id,
            since=since,
            modes=[m for m in modes.split(",") if m] if modes else None,
        )
        return Response(content=annotation_set_to_json(delta), media_type="application/json")

    @app.get("/observations/{observation_id}/feedback")
    async def feedback(
        observation_id: str, authorization: Optional[str] = Header(None)
    ):
        return service.get_feedback(
            token=_bearer_token(authorization), observation_id=observation_id
        )

    return app


def service_from_env() -> ObservationService:
    storage_root = os.environ.get(ENV_STORAGE_ROOT)
    cap = float(os.environ.get(ENV_MEDIA_CAP_MB, DEFAULT_MEDIA_CAP_MB))
    store = FileStore(storage_root) if storage_root else MemoryStore()
    return ObservationService(store=store, media_cap_mb=cap)


def serve(port: Optional[int] = None) -> None:
    """Run the service until signaled (uvicorn loop)."""
    import uvicorn

    resolved = port if port is not None else int(os.environ.get(ENV_PORT, "8000"))
    uvicorn.run(create_app(), host="0.0.0.0", port=resolved)
