"""HTTP facade for interactive explanation clients.

Endpoints (JSON, UTF-8):

* ``GET  /v1/health``         - liveness plus whether a bundle is loaded.
* ``GET  /v1/schema``         - feature summary for form rendering.
* ``POST /v1/explain``        - one request, synchronous result.
* ``POST /v1/explain/batch``  - list in, NDJSON stream out, order kept.

Errors use the envelope ``{"code", "message", "field"?}``: 400 for
malformed bodies, 409 when no bundle is loaded, 422 for constraint
violations (immutable features, unknown names, bad hyperparameters).
A 200 with ``valid: false`` is a legitimate outcome - the search ran and
exhausted its budget.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Iterator

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, StreamingResponse

from .errors import ExplainRequestError, RecourseError, SchemaError
from .explain import ExplainRequest, explain
from .surrogate import SurrogateBundle
from .tabular import CONTINUOUS, RawRow


def _error(status: int, code: str, message: str, field: str | None = None):
    body: dict[str, Any] = {"code": code, "message": message}
    if field is not None:
        body["field"] = field
    return JSONResponse(status_code=status, content=body)


class _BadRequest(Exception):
    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


def _parse_request(body: Any, bundle: SurrogateBundle) -> ExplainRequest:
    """Structural problems raise _BadRequest (400); semantic constraint
    violations raise ExplainRequestError/SchemaError (422)."""
    if not isinstance(body, dict):
        raise _BadRequest("request body must be a JSON object")
    row_doc = body.get("row")
    if row_doc is None:
        raise _BadRequest("missing required field 'row'", field="row")
    if not isinstance(row_doc, dict):
        raise _BadRequest("'row' must be an object", field="row")
    for f in bundle.schema.features:
        if f.name not in row_doc:
            raise _BadRequest(f"row is missing feature {f.name!r}", field=f.name)

    def number(name: str, default: float) -> float:
        value = body.get(name, default)
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise _BadRequest(f"'{name}' must be a number", field=name)
        return float(value)

    def integer(name: str, default: int) -> int:
        value = body.get(name, default)
        if not isinstance(value, int) or isinstance(value, bool):
            raise _BadRequest(f"'{name}' must be an integer", field=name)
        return value

    variant = body.get("variant", "ce1")
    if not isinstance(variant, str):
        raise _BadRequest("'variant' must be a string", field="variant")
    feature = body.get("feature")
    if feature is not None and not isinstance(feature, str):
        raise _BadRequest("'feature' must be a string", field="feature")
    free = body.get("free", [])
    if not isinstance(free, list) or not all(isinstance(v, str) for v in free):
        raise _BadRequest("'free' must be a list of feature names", field="free")

    req = ExplainRequest(
        row=RawRow(row_doc),
        variant=variant,
        target_feature=feature,
        free_features=tuple(free),
        eps0=number("eps0", 0.0),
        d_eps=number("d_eps", 0.1),
        eps_max=number("eps_max", 10.0),
        robust_margin_steps=integer("margin_steps", 0),
        seed=integer("seed", 0),
    )
    req.validate(bundle.schema)  # raises ExplainRequestError / SchemaError
    return req


def _schema_summary(bundle: SurrogateBundle) -> dict:
    schema = bundle.schema
    return {
        "target_name": schema.target_name,
        "target_labels": list(schema.target_labels),
        "features": [
            {
                "name": f.name,
                "kind": f.kind,
                "categories": list(f.categories),
                "min": f.min if f.kind == CONTINUOUS else None,
                "max": f.max if f.kind == CONTINUOUS else None,
                "mutable": f.mutable,
            }
            for f in schema.features
        ],
        "defaults": {"d_eps": 0.1, "eps_max": 10.0, "margin_steps": 0},
    }


def create_app(
    bundle: SurrogateBundle | None = None, static_dir: Path | None = None
) -> FastAPI:
    app = FastAPI(title="recourse-forge", docs_url=None, redoc_url=None)
    app.state.bundle = bundle

    def current_bundle() -> SurrogateBundle | None:
        return app.state.bundle

    @app.get("/v1/health")
    def health():
        return {"status": "ok", "bundle_loaded": current_bundle() is not None}

    @app.get("/v1/schema")
    def schema_summary():
        loaded = current_bundle()
        if loaded is None:
            return _error(409, "no_bundle", "no bundle loaded")
        return _schema_summary(loaded)

    @app.post("/v1/explain")
    async def post_explain(request: Request):
        loaded = current_bundle()
        if loaded is None:
            return _error(409, "no_bundle", "no bundle loaded")
        try:
            body = await request.json()
        except json.JSONDecodeError:
            return _error(400, "malformed", "request body is not valid JSON")
        try:
            req = _parse_request(body, loaded)
        except _BadRequest as exc:
            return _error(400, "malformed", str(exc), exc.field)
        except (ExplainRequestError, SchemaError) as exc:
            return _error(422, "constraint", str(exc))
        try:
            result = explain(loaded, req)
        except RecourseError as exc:
            return _error(422, "constraint", str(exc))
        return JSONResponse(result.to_dict())

    @app.post("/v1/explain/batch")
    async def post_batch(request: Request):
        loaded = current_bundle()
        if loaded is None:
            return _error(409, "no_bundle", "no bundle loaded")
        try:
            body = await request.json()
        except json.JSONDecodeError:
            return _error(400, "malformed", "request body is not valid JSON")
        if not isinstance(body, list):
            return _error(400, "malformed", "batch body must be a JSON list")

        def lines() -> Iterator[str]:
            for item in body:
                try:
                    req = _parse_request(item, loaded)
                    result = explain(loaded, req)
                    yield json.dumps(result.to_dict()) + "\n"
                except _BadRequest as exc:
                    envelope = {"code": "malformed", "message": str(exc)}
                    if exc.field:
                        envelope["field"] = exc.field
                    yield json.dumps({"error": envelope}) + "\n"
                except RecourseError as exc:
                    yield json.dumps(
                        {"error": {"code": "constraint", "message": str(exc)}}
                    ) + "\n"

        return StreamingResponse(lines(), media_type="application/x-ndjson")

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")
    return app
