import base64
import json
import re
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from textriage_sidecar.bridge import handle_line
from textriage_sidecar.echo import HANDLERS
from textriage_sidecar.wire import decode_image, encode_image

GOLDEN = Path(__file__).parent / "golden" / "transcript.jsonl"

_ID_FIELD = re.compile(r'"id":-?\d+')


class SidecarProc:
    """Line-oriented driver for a live echo-mode sidecar process."""

    def __init__(self):
        self.proc = subprocess.Popen(
            [sys.executable, "-m", "textriage_sidecar"],
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
            env={"SIDECAR_ECHO": "1", "PATH": "/usr/bin:/bin",
                 "PYTHONPATH": str(Path(__file__).resolve().parents[1] / "src")},
        )

    def send_line(self, line: str) -> str:
        self.proc.stdin.write(line + "\n")
        self.proc.stdin.flush()
        return self.proc.stdout.readline().rstrip("\n")

    def call(self, request: dict) -> str:
        return self.send_line(json.dumps(request, separators=(",", ":")))

    def alive(self) -> bool:
        return self.proc.poll() is None

    def close(self):
        if self.alive():
            self.proc.stdin.close()
            self.proc.wait(timeout=10)


@pytest.fixture
def sidecar():
    proc = SidecarProc()
    yield proc
    proc.close()


def normalize_id(line: str) -> str:
    return _ID_FIELD.sub('"id":0', line, count=1)


def golden_pairs():
    return [json.loads(line) for line in GOLDEN.read_text("utf-8").splitlines()]


# ---------------------------------------------------------------------------
# golden transcript conformance


def test_golden_transcript_byte_match_modulo_id(sidecar):
    pairs = golden_pairs()
    assert {p["request"]["method"] for p in pairs} == {
        "upscale2x", "detect_maps", "nli_score", "recognize", "summarize"
    }
    for offset, pair in enumerate(pairs):
        request = dict(pair["request"])
        request["id"] = request["id"] + 1000 + offset  # fresh ids on replay
        got = sidecar.call(request)
        assert json.loads(got)["id"] == request["id"]
        assert normalize_id(got) == normalize_id(pair["response_line"])


def test_golden_upscale_shape_is_doubled():
    pair = next(p for p in golden_pairs() if p["request"]["method"] == "upscale2x")
    response = json.loads(pair["response_line"])
    assert response["result"]["shape"] == [128, 128]
    tile = decode_image(pair["request"]["params"]["image"])
    out = decode_image(response["result"]["image"])
    assert tile.shape == (64, 64) and out.shape == (128, 128)
    assert np.array_equal(out[::2, ::2], tile)  # nearest-neighbour duplication


def test_golden_nli_has_one_triple_per_hypothesis():
    pair = next(p for p in golden_pairs() if p["request"]["method"] == "nli_score")
    response = json.loads(pair["response_line"])
    logits = response["result"]["logits"]
    assert len(logits) == len(pair["request"]["params"]["hypotheses"]) == 4
    assert all(len(triple) == 3 for triple in logits)


def test_golden_detect_maps_match_stencil_formula():
    pair = next(p for p in golden_pairs() if p["request"]["method"] == "detect_maps")
    img = decode_image(pair["request"]["params"]["image"])
    response = json.loads(pair["response_line"])
    result = response["result"]
    assert result["shrunk"] is False
    h, w = result["shape"]
    prob = np.frombuffer(base64.b64decode(result["prob"]), dtype="<f4").reshape(h, w)
    expected = (1.0 - img.astype(np.float64) / 255.0).astype("<f4")
    assert np.array_equal(prob, expected)


# ---------------------------------------------------------------------------
# resilience


def test_malformed_line_answers_id_minus_one_and_survives(sidecar):
    got = json.loads(sidecar.send_line("this is { not json"))
    assert got["id"] == -1
    assert got["error"]["code"] == 400
    assert sidecar.alive()
    # still serving afterwards
    follow_up = json.loads(sidecar.call(
        {"id": 7, "method": "summarize", "params": {"text": "abc"}}
    ))
    assert follow_up == {"id": 7, "result": {"summary": "abc"}}


def test_unknown_method_is_404_and_survives(sidecar):
    got = json.loads(sidecar.call({"id": 3, "method": "teleport", "params": {}}))
    assert got["id"] == 3
    assert got["error"]["code"] == 404
    assert sidecar.alive()


def test_bad_params_is_422_and_survives(sidecar):
    got = json.loads(sidecar.call(
        {"id": 4, "method": "upscale2x", "params": {"image": "!!!"}}
    ))
    assert got["error"]["code"] == 422
    got = json.loads(sidecar.call({"id": 5, "method": "upscale2x", "params": {}}))
    assert got["error"]["code"] == 422
    assert sidecar.alive()


def test_pipelined_requests_each_answered_once(sidecar):
    requests = [
        {"id": i, "method": "summarize", "params": {"text": f"t{i}"}}
        for i in range(1, 6)
    ]
    blob = "".join(json.dumps(r, separators=(",", ":")) + "\n" for r in requests)
    sidecar.proc.stdin.write(blob)
    sidecar.proc.stdin.flush()
    answered = [json.loads(sidecar.proc.stdout.readline()) for _ in requests]
    assert sorted(r["id"] for r in answered) == [1, 2, 3, 4, 5]
    by_id = {r["id"]: r for r in answered}
    assert by_id[3]["result"]["summary"] == "t3"


# ---------------------------------------------------------------------------
# handler-level units (no subprocess)


def test_handle_line_rejects_non_integer_id():
    got = handle_line('{"id": "seven", "method": "summarize", "params": {}}', HANDLERS)
    assert got["id"] == -1 and got["error"]["code"] == 400


def test_handle_line_requires_params_object():
    got = handle_line('{"id": 1, "method": "summarize", "params": 5}', HANDLERS)
    assert got["error"]["code"] == 422


def test_echo_recognize_returns_empty_text():
    crop = encode_image(np.zeros((4, 4), dtype=np.uint8))
    got = handle_line(
        json.dumps({"id": 9, "method": "recognize", "params": {"image": crop}}),
        HANDLERS,
    )
    assert got == {"id": 9, "result": {"text": ""}}


def test_echo_summarize_truncates():
    long_text = "x" * 500
    got = handle_line(
        json.dumps({"id": 2, "method": "summarize", "params": {"text": long_text}}),
        HANDLERS,
    )
    assert got["result"]["summary"] == "x" * 120


# ---------------------------------------------------------------------------
# interop with the primary component's clients (External Interfaces only)


def test_primary_clients_round_trip_echo_sidecar():
    textriage = pytest.importorskip("textriage")
    from textriage.backends.sidecar import (
        SidecarDetector,
        SidecarNLIScorer,
        SidecarProcess,
        SidecarScaler,
    )
    from textriage.imaging import ImageBuffer

    src = Path(__file__).resolve().parents[1] / "src"
    proc = SidecarProcess(
        [sys.executable, "-c",
         f"import sys; sys.path.insert(0, {str(src)!r}); import os; "
         "os.environ['SIDECAR_ECHO']='1'; "
         "from textriage_sidecar.bridge import main; main()"]
    )
    try:
        tile = ImageBuffer(np.arange(64 * 64, dtype=np.int64).reshape(64, 64).astype(np.uint8))
        scaled = SidecarScaler(proc, scale=2).upscale(tile)
        assert (scaled.height, scaled.width) == (128, 128)

        page = np.full((20, 30), 255, dtype=np.uint8)
        page[5:15, 5:25] = 32
        maps = SidecarDetector(proc).score(ImageBuffer(page))
        assert maps.shape == (20, 30)
        assert not maps.shrunk
        assert maps.prob[10, 10] == pytest.approx(1.0 - 32 / 255.0, abs=1e-6)

        score = SidecarNLIScorer(proc).score("invoice amount due",
                                             "This text is about Invoice.")
        assert score.as_tuple() == (4.0, 1.0, 0.0)
    finally:
        proc.close()
