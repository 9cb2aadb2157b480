"""Deterministic reference backends: no neural networks, fully testable.

These back every stage when no sidecar is configured and serve as the fixed
points the test suite reasons about.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np

from ..classify import NLIScore
from ..detect import ScoreMaps
from ..errors import BackendError, ConfigError, ImageFormatError
from ..imaging import ImageBuffer


class NearestNeighborScaler:
    """Pointwise integer upscaler; translation-equivariant, so tiled output is
    bit-identical to untiled output."""

    def __init__(self, scale: int = 2):
        if scale < 1:
            raise ConfigError(f"scale must be >= 1, got {scale}")
        self.scale = scale

    def upscale(self, tile: ImageBuffer) -> ImageBuffer:
        data = np.repeat(np.repeat(tile.data, self.scale, axis=0), self.scale, axis=1)
        return ImageBuffer(data)


class StencilDetector:
    """Intensity-stencil score maps: P = 1 - intensity/255, T = 0.3, not shrunk."""

    THRESH = 0.3

    def score(self, img: ImageBuffer) -> ScoreMaps:
        if img.channels != 1:
            raise BackendError("stencil detector requires grayscale input")
        prob = 1.0 - img.data.astype(np.float64) / 255.0
        thresh = np.full_like(prob, self.THRESH)
        return ScoreMaps(prob=prob, thresh=thresh, shrunk=False)


def _default_keyword_table() -> dict[str, tuple[str, ...]]:
    text = resources.files("textriage.data").joinpath("keywords.txt").read_text("utf-8")
    return parse_keyword_table(text)


def parse_keyword_table(text: str) -> dict[str, tuple[str, ...]]:
    """Parse ``label: word,word,...`` lines into a lowercase keyword table."""
    table: dict[str, tuple[str, ...]] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if ":" not in line:
            raise ConfigError(f"keyword table line {lineno}: expected 'label: words'")
        label, words = line.split(":", 1)
        keywords = tuple(w.strip().lower() for w in words.split(",") if w.strip())
        if not keywords:
            raise ConfigError(f"keyword table line {lineno}: no keywords for {label!r}")
        table[label.strip().lower()] = keywords
    return table


class KeywordNLIScorer:
    """Keyword-count NLI stub: entail = 2 * hits, neutral = 1, contradict = 0.

    Hits are occurrences of the hypothesis label's keywords in the lowercased
    premise. The label is taken as the last word of the hypothesis (matching
    the default "This text is about {label}." template).
    """

    def __init__(self, table: dict[str, tuple[str, ...]] | None = None):
        self.table = table if table is not None else _default_keyword_table()

    @classmethod
    def from_file(cls, path: str | Path) -> "KeywordNLIScorer":
        return cls(parse_keyword_table(Path(path).read_text("utf-8")))

    def score(self, premise: str, hypothesis: str) -> NLIScore:
        label = hypothesis.rstrip(" .!?").rsplit(" ", 1)[-1].lower()
        keywords = self.table.get(label, ())
        haystack = premise.lower()
        hits = sum(haystack.count(k) for k in keywords)
        return NLIScore(entail=2.0 * hits, neutral=1.0, contradict=0.0)


class NullRecognizer:
    """Recognizer stub that reads nothing from any crop."""

    def recognize(self, crop: ImageBuffer) -> str:
        return ""


class FixtureRecognizer:
    """Recognition stub backed by fixture sidecar annotations.

    Annotations are ``(bbox, text)`` pairs in source-image coordinates. The
    interface only sees the crop, so lookup keys on crop dimensions (adjusted
    by the preprocessing ``scale``); fixtures give their blocks distinct sizes
    to keep this unambiguous. Unknown crops recognize as "".
    """

    def __init__(self, annotations: list[tuple[tuple[int, int, int, int], str]],
                 scale: int = 1, tolerance: int = 6):
        self.annotations = list(annotations)
        self.scale = scale
        self.tolerance = tolerance

    @classmethod
    def from_file(cls, path: str | Path, scale: int = 1) -> "FixtureRecognizer":
        import json

        payload = json.loads(Path(path).read_text("utf-8"))
        annotations = [
            (tuple(entry["bbox"]), entry["text"]) for entry in payload["annotations"]
        ]
        return cls(annotations, scale=scale)

    def recognize(self, crop: ImageBuffer) -> str:
        if crop.width == 0 or crop.height == 0:
            raise ImageFormatError("empty crop")
        best_text = ""
        best_dist = None
        for (x, y, w, h), text in self.annotations:
            dist = abs(w * self.scale - crop.width) + abs(h * self.scale - crop.height)
            if dist <= self.tolerance * self.scale and (best_dist is None or dist < best_dist):
                best_dist = dist
                best_text = text
        return best_text
