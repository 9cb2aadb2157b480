"""HTTP facade: stateless document classification plus live sessions.

The operator console drives exactly these endpoints; everything here is a
thin, schema-stable wrapper over the pipeline module.
"""

from __future__ import annotations

import base64
import binascii
import threading
import uuid
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response

from .backends.registry import resolve_backends
from .errors import BackendUnavailable, ConfigError, ImageFormatError, PipelineError
from .imaging import decode_image
from .pipeline import (
    LiveSession,
    PipelineConfig,
    apply_overrides,
    process_image,
)


def flatten_config(cfg: PipelineConfig) -> dict[str, object]:
    """Dotted-key view of a config, mirroring the config-file format."""
    return {
        "stage_order": list(cfg.stage_order),
        "hypothesis_template": cfg.hypothesis_template,
        "clahe.clip_factor": cfg.clahe.clip_factor,
        "clahe.grid_cols": cfg.clahe.grid_cols,
        "clahe.grid_rows": cfg.clahe.grid_rows,
        "tiles.scale": cfg.tiles.scale,
        "tiles.tile": cfg.tiles.tile,
        "tiles.overlap": cfg.tiles.overlap,
        "detect.global_thresh": cfg.detect.global_thresh,
        "detect.min_height": cfg.detect.min_height,
        "detect.max_height": cfg.detect.max_height,
        "detect.binarize_k": cfg.detect.binarize_k,
        "detect.connectivity": cfg.detect.connectivity,
        "detect.unclip_ratio": cfg.detect.unclip_ratio,
        "labels": list(cfg.labels.labels),
        "backends.scaler": cfg.backends.scaler,
        "backends.detector": cfg.backends.detector,
        "backends.recognizer": cfg.backends.recognizer,
        "backends.nli": cfg.backends.nli,
    }


class _SessionEntry:
    def __init__(self, session: LiveSession):
        self.session = session
        self.closed = False
        self.summary = None


async def _read_image_request(request: Request) -> tuple[bytes, dict]:
    """Extract image bytes + config overrides from JSON or multipart bodies."""
    content_type = request.headers.get("content-type", "")
    if content_type.startswith("multipart/form-data"):
        form = await request.form()
        upload = None
        overrides = {}
        for value in form.values():
            if hasattr(value, "read"):
                upload = value
                break
        if upload is None:
            raise ImageFormatError("multipart body without an image part")
        raw = await upload.read()
        overrides_field = form.get("config_overrides")
        if overrides_field:
            import json

            overrides = json.loads(overrides_field)
        return raw, overrides
    try:
        body = await request.json()
    except Exception as exc:
        raise ImageFormatError(f"body is neither JSON nor multipart: {exc}") from exc
    if not isinstance(body, dict) or "image_b64" not in body:
        raise ImageFormatError("missing image_b64 field")
    try:
        raw = base64.b64decode(body["image_b64"], validate=True)
    except (binascii.Error, TypeError, ValueError) as exc:
        raise ImageFormatError(f"invalid base64 image payload: {exc}") from exc
    overrides = body.get("config_overrides") or {}
    if not isinstance(overrides, dict):
        raise ConfigError("config_overrides must be an object")
    return raw, overrides


def create_app(config: PipelineConfig | None = None,
               backend_overrides: dict[str, object] | None = None,
               static_dir: str | Path | None = None) -> FastAPI:
    """Build the service app.

    ``backend_overrides`` pins specific backend instances by slot name
    (tests inject slow/failing backends this way; `serve --sidecar` injects
    sidecar clients).
    """
    base_cfg = config if config is not None else PipelineConfig()
    backend_overrides = backend_overrides or {}

    app = FastAPI(title="textriage", docs_url=None, redoc_url=None)
    state_lock = threading.Lock()
    sessions: dict[str, _SessionEntry] = {}
    doc_lock = threading.Lock()  # backends are exclusive-use; serialize documents
    base_backends = resolve_backends(base_cfg, overrides=backend_overrides)

    def _error(status: int, message: str) -> JSONResponse:
        return JSONResponse({"error": message}, status_code=status)

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "backends": base_backends.health()}

    @app.post("/v1/documents")
    async def documents(request: Request):
        try:
            raw, overrides = await _read_image_request(request)
        except ImageFormatError as exc:
            return _error(400, str(exc))
        except (ConfigError, ValueError) as exc:
            return _error(422, str(exc))
        try:
            img = decode_image(raw)
        except ImageFormatError as exc:
            return _error(400, str(exc))
        try:
            cfg = apply_overrides(base_cfg, overrides) if overrides else base_cfg
        except ConfigError as exc:
            return _error(422, str(exc))
        try:
            if any(key.startswith("backends.") for key in overrides):
                backends = resolve_backends(cfg, overrides=backend_overrides)
            else:
                backends = base_backends
            with doc_lock:
                result = process_image(img, cfg, backends=backends)
        except BackendUnavailable as exc:
            return _error(503, str(exc))
        except PipelineError as exc:
            if isinstance(exc.__cause__, BackendUnavailable):
                return _error(503, str(exc))
            return _error(500, str(exc))
        payload = result.to_payload()
        payload["id"] = uuid.uuid4().hex
        return payload

    @app.post("/v1/sessions")
    async def create_session(request: Request):
        overrides = {}
        body = await request.body()
        if body:
            import json

            try:
                parsed = json.loads(body)
                overrides = parsed.get("config_overrides") or {}
            except (ValueError, AttributeError) as exc:
                return _error(422, f"invalid session body: {exc}")
        try:
            cfg = apply_overrides(base_cfg, overrides) if overrides else base_cfg
            backends = resolve_backends(cfg, overrides=backend_overrides)
        except ConfigError as exc:
            return _error(422, str(exc))
        except BackendUnavailable as exc:
            return _error(503, str(exc))
        sid = uuid.uuid4().hex
        with state_lock:
            sessions[sid] = _SessionEntry(LiveSession(cfg, backends=backends))
        return {"session_id": sid}

    def _get_entry(sid: str) -> _SessionEntry | None:
        with state_lock:
            return sessions.get(sid)

    @app.post("/v1/sessions/{sid}/frames")
    async def post_frame(sid: str, request: Request):
        entry = _get_entry(sid)
        if entry is None:
            return _error(404, "unknown session")
        if entry.closed:
            return _error(409, "session is closed")
        try:
            raw, _ = await _read_image_request(request)
            img = decode_image(raw)
        except ImageFormatError as exc:
            return _error(400, str(exc))
        except ConfigError as exc:
            return _error(422, str(exc))
        try:
            seq, accepted = entry.session.submit(img)
        except ConfigError:
            return _error(409, "session is closed")
        return JSONResponse({"seq": seq, "accepted": accepted}, status_code=202)

    @app.get("/v1/sessions/{sid}/result")
    def get_result(sid: str):
        entry = _get_entry(sid)
        if entry is None:
            return _error(404, "unknown session")
        session = entry.session
        result = session.last_result
        if result is None:
            return Response(status_code=204)
        payload = result.to_payload()
        payload["seq"] = result.seq
        payload["counters"] = session.counters()
        return payload

    @app.patch("/v1/sessions/{sid}/config")
    async def patch_config(sid: str, request: Request):
        entry = _get_entry(sid)
        if entry is None:
            return _error(404, "unknown session")
        if entry.closed:
            return _error(409, "session is closed")
        try:
            overrides = await request.json()
        except Exception as exc:
            return _error(422, f"invalid JSON body: {exc}")
        if not isinstance(overrides, dict):
            return _error(422, "config patch must be an object of dotted keys")
        try:
            cfg = apply_overrides(entry.session.config, overrides)
        except ConfigError as exc:
            return _error(422, str(exc))
        entry.session.update_config(cfg)
        return flatten_config(cfg)

    @app.delete("/v1/sessions/{sid}")
    def delete_session(sid: str):
        entry = _get_entry(sid)
        if entry is None:
            return _error(404, "unknown session")
        if not entry.closed:
            summary = entry.session.close()
            entry.closed = True
            entry.summary = summary
        s = entry.summary
        return {
            "session_id": sid,
            "received": s.received,
            "processed": s.processed,
            "dropped": s.dropped,
            "failed": s.failed,
            "mean_latency_ms": s.mean_latency_ms,
        }

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
