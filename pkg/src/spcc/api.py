"""HTTP API over the control center.

Bodies are JSON rendered canonically (sorted keys, compact), so any two
responses computed from the same (snapshot, catena) version pair are
byte-identical. Auth is `Authorization: Bearer <token>` against the
project's token table; registration itself is the unauthenticated
bootstrap step.
"""

from __future__ import annotations

from fastapi import FastAPI, Request, Response

from .access import Principal
from .errors import (
    AccessDenied,
    DuplicateBatch,
    DuplicateProject,
    EncodingError,
    InvalidToken,
    NoResults,
    SchemaViolation,
    SpccError,
    UnknownInstance,
    UnknownProject,
    UnknownSource,
    UnknownStep,
    UnknownView,
    ValidationFailed,
)
from .service import ControlCenter
from .util import canonical_json

_STATUS: tuple[tuple[type, int], ...] = (
    (InvalidToken, 401),
    (AccessDenied, 403),
    (UnknownProject, 404),
    (UnknownView, 404),
    (UnknownStep, 404),
    (UnknownInstance, 404),
    (UnknownSource, 404),
    (NoResults, 404),
    (DuplicateProject, 409),
    (DuplicateBatch, 409),
    (SchemaViolation, 422),
    (ValidationFailed, 422),
    (EncodingError, 400),
)


def _status_for(exc: SpccError) -> int:
    for etype, code in _STATUS:
        if isinstance(exc, etype):
            return code
    return 500


def _json_response(payload: dict, status_code: int = 200) -> Response:
    return Response(
        content=canonical_json(payload),
        status_code=status_code,
        media_type="application/json",
    )


def _error_payload(exc: SpccError) -> dict:
    payload: dict = {"error": type(exc).__name__, "detail": str(exc)}
    if isinstance(exc, ValidationFailed):
        if exc.report is not None:
            payload["report"] = exc.report.to_dict()
        if exc.coverage is not None:
            payload["coverage"] = exc.coverage.to_dict()
    if isinstance(exc, SchemaViolation):
        payload["param"] = exc.param
        payload["reason"] = exc.reason
    return payload


def create_app(center: ControlCenter) -> FastAPI:
    app = FastAPI(title="spcc", docs_url=None, redoc_url=None)

    @app.exception_handler(SpccError)
    async def _spcc_error(request: Request, exc: SpccError):
        return _json_response(_error_payload(exc), _status_for(exc))

    def _principal(request: Request, project_id: str) -> Principal:
        header = request.headers.get("authorization", "")
        if not header.lower().startswith("bearer "):
            raise InvalidToken("missing bearer token")
        return center.authenticate(project_id, header[7:].strip())

    @app.put("/projects/{project_id}")
    async def register(project_id: str, request: Request):
        bundle = dict(await request.json())
        bundle["project"] = project_id
        meta = center.register_project(bundle)
        return _json_response(meta, 201)

    @app.get("/projects/{project_id}")
    async def project_meta(project_id: str, request: Request):
        _principal(request, project_id)
        return _json_response(center.project_meta(project_id))

    @app.post("/projects/{project_id}/measurements")
    async def ingest(project_id: str, request: Request, source: str | None = None):
        principal = _principal(request, project_id)
        del principal  # any authenticated principal may push measurements
        payload = await request.body()
        source_id = source or _default_source(center, project_id)
        receipt = center.ingest(
            project_id,
            source_id,
            payload,
            content_type=request.headers.get("content-type"),
        )
        return _json_response(receipt.to_dict())

    @app.get("/projects/{project_id}/views")
    async def views(project_id: str, request: Request, role: str | None = None):
        principal = _principal(request, project_id)
        return _json_response(center.get_views(project_id, principal, role=role))

    @app.get("/projects/{project_id}/views/{view_id}/drill")
    async def drill(project_id: str, view_id: str, request: Request, step: str = "/"):
        principal = _principal(request, project_id)
        return _json_response(center.drill(project_id, view_id, step, principal))

    @app.patch("/projects/{project_id}/catena/functions/{fid}")
    async def patch_params(project_id: str, fid: str, request: Request):
        principal = _principal(request, project_id)
        params = await request.json()
        if not isinstance(params, dict):
            raise SchemaViolation("params", "request body must be a JSON object")
        return _json_response(center.update_parameters(project_id, fid, params, principal))

    @app.get("/projects/{project_id}/alerts")
    async def alerts(project_id: str, request: Request, since: int = 0):
        principal = _principal(request, project_id)
        return _json_response(center.list_alerts(project_id, principal, since=since))

    @app.post("/projects/{project_id}/package")
    async def package(project_id: str, request: Request):
        principal = _principal(request, project_id)
        return _json_response(center.package_project(project_id, principal), 201)

    @app.get("/projects/{project_id}/history")
    async def history(project_id: str, request: Request):
        _principal(request, project_id)
        return _json_response(center.history(project_id))

    return app


def _default_source(center: ControlCenter, project_id: str) -> str:
    sources = center.store.load_sources(project_id)
    push = [s for s in sources.values() if s.kind == "api-push"]
    if len(push) == 1:
        return push[0].source_id
    raise UnknownSource(
        "no unambiguous api-push source registered; pass ?source=<id>"
    )
