"""Zero-shot document classification via NLI entailment scoring.

Detected text is assembled into a premise in reading order; each candidate
label becomes a hypothesis scored by a pluggable NLI backend; entailment
probabilities are normalized across labels and the argmax wins (first label
on exact ties).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Protocol, Sequence, runtime_checkable

from .detect import TextInstance
from .errors import BackendError, ConfigError
from .imaging import ImageBuffer

DEFAULT_LABELS = ("Invoice", "Form", "Letter", "Report")
DEFAULT_HYPOTHESIS_TEMPLATE = "This text is about {label}."


@dataclass(frozen=True)
class LabelSet:
    """Ordered candidate labels; order breaks ties."""

    labels: tuple[str, ...] = DEFAULT_LABELS

    def __post_init__(self):
        if not self.labels:
            raise ConfigError("label set must be non-empty")
        if len(set(self.labels)) != len(self.labels):
            raise ConfigError(f"duplicate labels: {self.labels}")
        object.__setattr__(self, "labels", tuple(self.labels))

    def __iter__(self):
        return iter(self.labels)

    def __len__(self):
        return len(self.labels)


@dataclass(frozen=True)
class NLIScore:
    """Raw entailment / neutral / contradiction logits for one hypothesis."""

    entail: float
    neutral: float
    contradict: float

    def __post_init__(self):
        for name in ("entail", "neutral", "contradict"):
            if not math.isfinite(getattr(self, name)):
                raise BackendError(f"non-finite {name} logit")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.entail, self.neutral, self.contradict)


@dataclass(frozen=True)
class ClassDecision:
    """Normalized per-label probabilities, the winning label, and the premise."""

    probs: tuple[float, ...]
    label: str
    premise: str
    labels: tuple[str, ...] = ()

    def label_probs(self) -> dict[str, float]:
        return dict(zip(self.labels, self.probs))


@runtime_checkable
class NLIScorerBackend(Protocol):
    def score(self, premise: str, hypothesis: str) -> NLIScore:
        ...


@runtime_checkable
class RecognizerBackend(Protocol):
    def recognize(self, crop: ImageBuffer) -> str:
        ...


def softmax(logits: Sequence[float]) -> list[float]:
    """Numerically stabilized softmax; rejects empty input."""
    if len(logits) == 0:
        raise ConfigError("softmax of an empty vector")
    m = max(logits)
    exps = [math.exp(v - m) for v in logits]
    total = sum(exps)
    return [e / total for e in exps]


def assemble_premise(instances: Iterable[TextInstance]) -> str:
    """Join recognized texts in reading order (top-to-bottom, left-to-right)."""
    ordered = sorted(instances, key=lambda t: (t.bbox[1], t.bbox[0]))
    return " ".join(t.text for t in ordered if t.text)


def zero_shot_classify(
    premise: str,
    labels: LabelSet,
    scorer: NLIScorerBackend,
    template: str = DEFAULT_HYPOTHESIS_TEMPLATE,
) -> ClassDecision:
    """Score one hypothesis per label, normalize entailment probabilities, argmax.

    Ties go to the first label in ``labels`` order. A scorer failure on any
    hypothesis aborts the decision.
    """
    entail_probs = []
    for label in labels:
        hypothesis = template.format(label=label)
        score = scorer.score(premise, hypothesis)
        entail_probs.append(softmax(score.as_tuple())[0])
    total = sum(entail_probs)
    if total <= 0.0:  # unreachable with softmax outputs, kept as a guard
        raise BackendError("all entailment probabilities are zero")
    probs = tuple(e / total for e in entail_probs)
    best = max(range(len(probs)), key=lambda i: (probs[i], -i))
    return ClassDecision(probs=probs, label=labels.labels[best], premise=premise,
                         labels=labels.labels)
