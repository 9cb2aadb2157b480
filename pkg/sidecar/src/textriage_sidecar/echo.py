"""Deterministic echo-mode handlers: protocol conformance without any weights.

upscale2x duplicates pixels, detect_maps applies the intensity stencil
(P = 1 - v/255, T = 0.3, shrunk false), nli_score counts keyword hits,
recognize reads nothing, summarize truncates.
"""

from __future__ import annotations

import numpy as np

from .wire import WireError, decode_image, encode_image, encode_map

KEYWORDS = {
    "invoice": ("invoice", "amount due", "bill to"),
    "form": ("form", "field", "checkbox", "fill"),
    "letter": ("dear", "sincerely", "regards"),
    "report": ("report", "summary", "findings", "quarter"),
}

SUMMARY_LIMIT = 120


def upscale2x(params: dict) -> dict:
    img = decode_image(params["image"])
    out = np.repeat(np.repeat(img, 2, axis=0), 2, axis=1)
    return {"image": encode_image(out), "shape": [int(out.shape[0]), int(out.shape[1])]}


def detect_maps(params: dict) -> dict:
    img = decode_image(params["image"])
    if img.ndim != 2:
        raise WireError("detect_maps expects a grayscale image")
    prob = 1.0 - img.astype(np.float64) / 255.0
    thresh = np.full_like(prob, 0.3)
    return {
        "prob": encode_map(prob),
        "thresh": encode_map(thresh),
        "shape": [int(img.shape[0]), int(img.shape[1])],
        "shrunk": False,
    }


def nli_score(params: dict) -> dict:
    premise = str(params.get("premise", "")).lower()
    hypotheses = params.get("hypotheses")
    if not isinstance(hypotheses, list) or not hypotheses:
        raise WireError("nli_score needs a non-empty hypotheses list")
    logits = []
    for hypothesis in hypotheses:
        label = str(hypothesis).rstrip(" .!?").rsplit(" ", 1)[-1].lower()
        hits = sum(premise.count(k) for k in KEYWORDS.get(label, ()))
        logits.append([2.0 * hits, 1.0, 0.0])
    return {"logits": logits}


def recognize(params: dict) -> dict:
    decode_image(params["image"])  # validate the payload even though we read nothing
    return {"text": ""}


def summarize(params: dict) -> dict:
    text = str(params.get("text", ""))
    return {"summary": text[:SUMMARY_LIMIT]}


HANDLERS = {
    "upscale2x": upscale2x,
    "detect_maps": detect_maps,
    "nli_score": nli_score,
    "recognize": recognize,
    "summarize": summarize,
}
