"""Real-model handlers, loaded lazily on first call per method.

Each loader pulls heavyweight dependencies only when its method is first
invoked; a missing package, missing weights or offline cache surfaces as a
ModelUnavailable error response while the process keeps serving. First-call
responses carry the observed load time in ``meta.load_ms``.
"""

from __future__ import annotations

import time

import numpy as np

from .wire import WireError, decode_image, encode_image, encode_map


class ModelUnavailable(RuntimeError):
    pass


class _Lazy:
    def __init__(self, loader):
        self._loader = loader
        self._value = None
        self._load_ms = None

    def get(self):
        first = self._value is None
        if first:
            start = time.perf_counter()
            try:
                self._value = self._loader()
            except Exception as exc:
                raise ModelUnavailable(f"model load failed: {exc}") from exc
            self._load_ms = (time.perf_counter() - start) * 1000.0
        return self._value, (self._load_ms if first else None)


def _load_upscaler():
    from realesrgan import RealESRGANer  # noqa: F401  (weights resolved by the lib)

    raise ModelUnavailable(
        "RealESRGAN_x2 weights are not bundled; place them on disk and wire the "
        "loader, or run with SIDECAR_ECHO=1"
    )


def _load_detector():
    try:
        from mmocr.apis import TextDetInferencer
    except ImportError as exc:
        raise ModelUnavailable(f"mmocr is not installed: {exc}") from exc
    return TextDetInferencer(model="DBNetpp")


def _load_nli():
    from transformers import pipeline

    return pipeline("zero-shot-classification", model="facebook/bart-large-mnli")


def _load_recognizer():
    from transformers import pipeline

    # no recognition model is mandated anywhere; TrOCR is the bridge's
    # documented choice
    return pipeline("image-to-text", model="microsoft/trocr-base-printed")


def _load_summarizer():
    from transformers import pipeline

    return pipeline("summarization", model="facebook/bart-large-cnn")


_upscaler = _Lazy(_load_upscaler)
_detector = _Lazy(_load_detector)
_nli = _Lazy(_load_nli)
_recognizer = _Lazy(_load_recognizer)
_summarizer = _Lazy(_load_summarizer)


def _with_meta(result: dict, load_ms: float | None) -> dict:
    if load_ms is not None:
        result["meta"] = {"load_ms": load_ms}
    return result


def upscale2x(params: dict) -> dict:
    model, load_ms = _upscaler.get()
    img = decode_image(params["image"])
    out, _ = model.enhance(img, outscale=2)
    return _with_meta(
        {"image": encode_image(out), "shape": [int(out.shape[0]), int(out.shape[1])]},
        load_ms,
    )


def detect_maps(params: dict) -> dict:
    model, load_ms = _detector.get()
    img = decode_image(params["image"])
    pred = model(img, return_datasamples=True)["predictions"][0]
    prob = np.asarray(pred.prob_map, dtype=np.float64)
    thresh = np.asarray(pred.thresh_map, dtype=np.float64)
    return _with_meta(
        {
            "prob": encode_map(prob),
            "thresh": encode_map(thresh),
            "shape": [int(prob.shape[0]), int(prob.shape[1])],
            "shrunk": True,
        },
        load_ms,
    )


def nli_score(params: dict) -> dict:
    model, load_ms = _nli.get()
    premise = str(params.get("premise", ""))
    hypotheses = params.get("hypotheses")
    if not isinstance(hypotheses, list) or not hypotheses:
        raise WireError("nli_score needs a non-empty hypotheses list")
    tokenizer = model.tokenizer
    mdl = model.model
    logits = []
    for hypothesis in hypotheses:
        encoded = tokenizer(premise, str(hypothesis), return_tensors="pt",
                            truncation=True)
        out = mdl(**encoded).logits[0].tolist()
        # bart-mnli ordering is (contradiction, neutral, entailment)
        logits.append([out[2], out[1], out[0]])
    return _with_meta({"logits": logits}, load_ms)


def recognize(params: dict) -> dict:
    model, load_ms = _recognizer.get()
    img = decode_image(params["image"])
    if img.ndim == 2:
        img = np.repeat(img[:, :, None], 3, axis=2)
    from PIL import Image

    out = model(Image.fromarray(img))
    text = out[0]["generated_text"] if out else ""
    return _with_meta({"text": text}, load_ms)


def summarize(params: dict) -> dict:
    model, load_ms = _summarizer.get()
    text = str(params.get("text", ""))
    if not text.strip():
        return _with_meta({"summary": ""}, load_ms)
    out = model(text, truncation=True)
    return _with_meta({"summary": out[0]["summary_text"]}, load_ms)


HANDLERS = {
    "upscale2x": upscale2x,
    "detect_maps": detect_maps,
    "nli_score": nli_score,
    "recognize": recognize,
    "summarize": summarize,
}
