"""Protocol loop: one JSON request per stdin line, one response per request.

The process never exits on a bad request: malformed lines answer with id -1,
unknown methods with a 404-style code, handler failures with 500/503. Output
lines are compact JSON with stable key order, so transcripts are
byte-reproducible.
"""

from __future__ import annotations

import json
import os
import sys

from .wire import WireError

ERR_PARSE = 400
ERR_UNKNOWN_METHOD = 404
ERR_BAD_PARAMS = 422
ERR_INTERNAL = 500
ERR_MODEL_UNAVAILABLE = 503


def _handlers():
    if os.environ.get("SIDECAR_ECHO") == "1":
        from . import echo

        return echo.HANDLERS
    from . import models

    return models.HANDLERS


def _emit(out, payload: dict) -> None:
    out.write(json.dumps(payload, separators=(",", ":")) + "\n")
    out.flush()


def _error(rid, code: int, message: str) -> dict:
    return {"id": rid, "error": {"code": code, "message": message}}


def handle_line(line: str, handlers) -> dict:
    try:
        request = json.loads(line)
    except ValueError as exc:
        return _error(-1, ERR_PARSE, f"unparseable request line: {exc}")
    if not isinstance(request, dict) or not isinstance(request.get("id"), int):
        return _error(-1, ERR_PARSE, "request must be an object with an integer id")
    rid = request["id"]
    method = request.get("method")
    handler = handlers.get(method)
    if handler is None:
        return _error(rid, ERR_UNKNOWN_METHOD, f"unknown method: {method!r}")
    params = request.get("params")
    if not isinstance(params, dict):
        return _error(rid, ERR_BAD_PARAMS, "params must be an object")
    try:
        result = handler(params)
    except (WireError, KeyError) as exc:
        return _error(rid, ERR_BAD_PARAMS, f"bad params: {exc}")
    except Exception as exc:  # keep serving whatever a model throws
        from .models import ModelUnavailable

        code = ERR_MODEL_UNAVAILABLE if isinstance(exc, ModelUnavailable) else ERR_INTERNAL
        return _error(rid, code, str(exc))
    return {"id": rid, "result": result}


def serve(stdin=None, stdout=None) -> None:
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    handlers = _handlers()
    for line in stdin:
        if not line.strip():
            continue
        _emit(stdout, handle_line(line, handlers))


def main() -> int:
    serve()
    return 0


if __name__ == "__main__":
    sys.exit(main())
