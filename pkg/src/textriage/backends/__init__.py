"""Pluggable backend implementations and name-based resolution."""

from .reference import (
    FixtureRecognizer,
    KeywordNLIScorer,
    NearestNeighborScaler,
    NullRecognizer,
    StencilDetector,
)
from .registry import BackendSet, resolve_backends

__all__ = [
    "BackendSet",
    "FixtureRecognizer",
    "KeywordNLIScorer",
    "NearestNeighborScaler",
    "NullRecognizer",
    "StencilDetector",
    "resolve_backends",
]
