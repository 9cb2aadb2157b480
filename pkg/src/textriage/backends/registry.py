"""Name-based backend resolution for pipeline configs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from ..classify import NLIScorerBackend, RecognizerBackend
from ..detect import DetectorBackend
from ..errors import BackendUnavailable
from ..imaging import ScalerBackend
from .reference import (
    FixtureRecognizer,
    KeywordNLIScorer,
    NearestNeighborScaler,
    NullRecognizer,
    StencilDetector,
)


@dataclass
class BackendSet:
    """Resolved backends a pipeline worker owns exclusively."""

    scaler: ScalerBackend
    detector: DetectorBackend
    recognizer: RecognizerBackend
    nli: NLIScorerBackend

    def health(self) -> dict[str, str]:
        out = {}
        for name in ("scaler", "detector", "recognizer", "nli"):
            backend = getattr(self, name)
            probe = getattr(backend, "health", None)
            out[name] = probe() if callable(probe) else "ok"
        return out


def _canned_fixture_recognizer(scale: int) -> FixtureRecognizer:
    from ..fixtures import canned_annotations

    return FixtureRecognizer(canned_annotations(), scale=scale)


def default_factories(scale: int = 2) -> dict[str, dict[str, Callable]]:
    return {
        "scaler": {"nearest": lambda: NearestNeighborScaler(scale)},
        "detector": {"stencil": StencilDetector},
        "recognizer": {
            "fixture": lambda: _canned_fixture_recognizer(scale),
            "none": NullRecognizer,
        },
        "nli": {"keyword": KeywordNLIScorer},
    }


def resolve_backends(cfg, overrides: dict[str, object] | None = None) -> BackendSet:
    """Build a BackendSet from cfg.backends names; ``overrides`` wins per slot.

    Unknown names raise BackendUnavailable (the service maps that to 503).
    """
    overrides = overrides or {}
    scale = cfg.tiles.scale
    upscale_factor = scale if "upscale" in cfg.stage_order else 1
    factories = default_factories(scale)
    # recognizer fixture matching happens in source coordinates; crops come from
    # the (possibly upscaled) detector image
    factories["recognizer"]["fixture"] = lambda: _canned_fixture_recognizer(upscale_factor)

    resolved = {}
    for slot in ("scaler", "detector", "recognizer", "nli"):
        if slot in overrides:
            resolved[slot] = overrides[slot]
            continue
        name = getattr(cfg.backends, slot)
        try:
            resolved[slot] = factories[slot][name]()
        except KeyError:
            raise BackendUnavailable(f"no {slot} backend named {name!r}") from None
    return BackendSet(**resolved)
