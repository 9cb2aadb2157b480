"""Backend clients speaking the sidecar line-delimited JSON protocol.

The sidecar is a child process exposing the real pretrained models; these
clients frame requests, match responses by id, and surface failures as typed
backend errors. One SidecarProcess may serve several client objects but a
single pipeline worker owns them all (exclusive-use contract).
"""

from __future__ import annotations

import base64
import json
import shlex
import subprocess
import threading

import numpy as np

from ..classify import NLIScore
from ..detect import ScoreMaps
from ..errors import BackendError, BackendUnavailable, ProtocolError
from ..imaging import ImageBuffer, read_raw, write_raw


class SidecarProcess:
    """Child process with a one-line-JSON request/response protocol on stdio."""

    def __init__(self, command: str | list[str]):
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        try:
            self._proc = subprocess.Popen(
                argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise BackendUnavailable(f"cannot launch sidecar {argv!r}: {exc}") from exc
        self._lock = threading.Lock()
        self._next_id = 0

    def alive(self) -> bool:
        return self._proc.poll() is None

    def health(self) -> str:
        return "ok" if self.alive() else "unavailable"

    def close(self) -> None:
        if self.alive():
            self._proc.stdin.close()
            self._proc.wait(timeout=10)

    def call(self, method: str, params: dict) -> dict:
        """Send one request and block for its response."""
        with self._lock:
            if not self.alive():
                raise BackendUnavailable("sidecar process is not running")
            self._next_id += 1
            rid = self._next_id
            line = json.dumps({"id": rid, "method": method, "params": params},
                              separators=(",", ":"))
            try:
                self._proc.stdin.write(line + "\n")
                self._proc.stdin.flush()
                response = self._proc.stdout.readline()
            except (BrokenPipeError, OSError) as exc:
                raise BackendUnavailable(f"sidecar pipe failed: {exc}") from exc
            if not response:
                raise BackendUnavailable("sidecar closed its output")
            try:
                payload = json.loads(response)
            except ValueError as exc:
                raise ProtocolError(f"sidecar sent invalid JSON: {response!r}") from exc
            if payload.get("id") != rid:
                raise ProtocolError(
                    f"sidecar answered id {payload.get('id')} to request {rid}"
                )
            if "error" in payload:
                err = payload["error"]
                raise BackendError(f"sidecar {method} failed: "
                                   f"[{err.get('code')}] {err.get('message')}")
            result = payload.get("result")
            if not isinstance(result, dict):
                raise ProtocolError("sidecar response missing result object")
            return result


def _encode_image(img: ImageBuffer) -> str:
    return base64.b64encode(write_raw(img)).decode("ascii")


def _decode_map(b64: str, shape: list[int]) -> np.ndarray:
    raw = base64.b64decode(b64)
    arr = np.frombuffer(raw, dtype="<f4")
    h, w = int(shape[0]), int(shape[1])
    if arr.size != h * w:
        raise ProtocolError(f"map payload has {arr.size} floats, shape says {h}x{w}")
    return arr.reshape(h, w).astype(np.float64)


class SidecarScaler:
    def __init__(self, proc: SidecarProcess, scale: int = 2):
        self.proc = proc
        self.scale = scale

    def health(self) -> str:
        return self.proc.health()

    def upscale(self, tile: ImageBuffer) -> ImageBuffer:
        result = self.proc.call("upscale2x", {"image": _encode_image(tile)})
        try:
            return read_raw(base64.b64decode(result["image"]))
        except (KeyError, ValueError) as exc:
            raise ProtocolError(f"bad upscale2x result: {exc}") from exc


class SidecarDetector:
    def __init__(self, proc: SidecarProcess):
        self.proc = proc

    def health(self) -> str:
        return self.proc.health()

    def score(self, img: ImageBuffer) -> ScoreMaps:
        result = self.proc.call("detect_maps", {"image": _encode_image(img)})
        try:
            shape = result["shape"]
            prob = _decode_map(result["prob"], shape)
            thresh = _decode_map(result["thresh"], shape)
            shrunk = bool(result.get("shrunk", False))
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"bad detect_maps result: {exc}") from exc
        return ScoreMaps(prob=prob, thresh=thresh, shrunk=shrunk)


class SidecarNLIScorer:
    def __init__(self, proc: SidecarProcess):
        self.proc = proc

    def health(self) -> str:
        return self.proc.health()

    def score(self, premise: str, hypothesis: str) -> NLIScore:
        result = self.proc.call("nli_score",
                                {"premise": premise, "hypotheses": [hypothesis]})
        try:
            entail, neutral, contradict = result["logits"][0]
        except (KeyError, IndexError, ValueError, TypeError) as exc:
            raise ProtocolError(f"bad nli_score result: {exc}") from exc
        return NLIScore(entail=float(entail), neutral=float(neutral),
                        contradict=float(contradict))


class SidecarRecognizer:
    def __init__(self, proc: SidecarProcess):
        self.proc = proc

    def health(self) -> str:
        return self.proc.health()

    def recognize(self, crop: ImageBuffer) -> str:
        result = self.proc.call("recognize", {"image": _encode_image(crop)})
        text = result.get("text")
        if not isinstance(text, str):
            raise ProtocolError("recognize result missing text string")
        return text


class SidecarSummarizer:
    """Pass-through to the sidecar's summarization model; no native logic."""

    def __init__(self, proc: SidecarProcess):
        self.proc = proc

    def summarize(self, text: str) -> str:
        result = self.proc.call("summarize", {"text": text})
        summary = result.get("summary")
        if not isinstance(summary, str):
            raise ProtocolError("summarize result missing summary string")
        return summary


def sidecar_backend_overrides(proc: SidecarProcess, scale: int = 2) -> dict[str, object]:
    """Backend-slot overrides wiring every stage to one sidecar process."""
    return {
        "scaler": SidecarScaler(proc, scale=scale),
        "detector": SidecarDetector(proc),
        "recognizer": SidecarRecognizer(proc),
        "nli": SidecarNLIScorer(proc),
    }
