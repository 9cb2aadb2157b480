"""End-to-end orchestration: staged preprocessing, detection, recognition,
classification, with per-stage timing; batch (gallery) and live (frame stream)
execution modes."""

from __future__ import annotations

import logging
import math
import os
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Iterator

import numpy as np

from .backends.registry import BackendSet, resolve_backends
from .classify import (
    DEFAULT_HYPOTHESIS_TEMPLATE,
    ClassDecision,
    LabelSet,
    assemble_premise,
    zero_shot_classify,
)
from .detect import DetectConfig, TextInstance, extract_instances
from .errors import ConfigError, PipelineError, TextriageError
from .imaging import ClaheConfig, ImageBuffer, TileConfig, clahe, to_grayscale, upscale_tiled

log = logging.getLogger(__name__)

STAGES = ("grayscale", "upscale", "clahe")
CONFIG_ENV_VAR = "TEXTRIAGE_CONFIG"


@dataclass(frozen=True)
class BackendSelection:
    scaler: str = "nearest"
    detector: str = "stencil"
    recognizer: str = "fixture"
    nli: str = "keyword"


@dataclass(frozen=True)
class PipelineConfig:
    stage_order: tuple[str, ...] = STAGES
    clahe: ClaheConfig = field(default_factory=ClaheConfig)
    tiles: TileConfig = field(default_factory=TileConfig)
    detect: DetectConfig = field(default_factory=DetectConfig)
    labels: LabelSet = field(default_factory=LabelSet)
    hypothesis_template: str = DEFAULT_HYPOTHESIS_TEMPLATE
    backends: BackendSelection = field(default_factory=BackendSelection)

    def __post_init__(self):
        order = tuple(self.stage_order)
        object.__setattr__(self, "stage_order", order)
        unknown = set(order) - set(STAGES)
        if unknown:
            raise ConfigError(f"unknown stages: {sorted(unknown)}")
        if order.count("grayscale") != 1:
            raise ConfigError("stage_order must contain grayscale exactly once")
        if "clahe" in order and order.index("grayscale") > order.index("clahe"):
            raise ConfigError("grayscale must run before clahe")


@dataclass
class DocumentResult:
    """One processed document: instances (source coordinates), decision, timings."""

    instances: list[TextInstance]
    decision: ClassDecision | None
    timings: dict[str, float]  # milliseconds per stage + total
    source: str = ""
    seq: int | None = None

    def to_payload(self) -> dict:
        """Service/CLI JSON shape (without the response id)."""
        label_probs = {}
        label = None
        if self.decision is not None:
            label = self.decision.label
            label_probs = self.decision.label_probs()
        return {
            "instances": [
                {
                    "polygon": [[x, y] for x, y in inst.polygon],
                    "bbox": list(inst.bbox),
                    "score": inst.score,
                    "text": inst.text or "",
                }
                for inst in self.instances
            ],
            "label": label,
            "label_probs": label_probs,
            "timings_ms": dict(self.timings),
        }


def _scale_instance(inst: TextInstance, factor: int) -> TextInstance:
    if factor == 1:
        return inst
    poly = tuple((x / factor, y / factor) for x, y in inst.polygon)
    x, y, w, h = inst.bbox
    bbox = (
        int(x // factor),
        int(y // factor),
        max(1, int(math.ceil(w / factor))),
        max(1, int(math.ceil(h / factor))),
    )
    return TextInstance(polygon=poly, bbox=bbox, score=inst.score, text=inst.text)


def process_image(img: ImageBuffer, cfg: PipelineConfig,
                  backends: BackendSet | None = None,
                  source: str = "") -> DocumentResult:
    """Run the full pipeline on one image.

    Preprocessing stages run in ``cfg.stage_order``; recognition failures on a
    single instance degrade to empty text; detection/classification backend
    failures raise PipelineError naming the stage. Reported instances are in
    source-image coordinates.
    """
    if backends is None:
        backends = resolve_backends(cfg)
    timings: dict[str, float] = {}
    t_total = time.perf_counter()

    current = img
    upscale_factor = 1
    t0 = time.perf_counter()
    try:
        for stage in cfg.stage_order:
            if stage == "grayscale":
                current = to_grayscale(current, allow_gray=True)
            elif stage == "upscale":
                current = upscale_tiled(current, cfg.tiles, backends.scaler)
                upscale_factor *= cfg.tiles.scale
            elif stage == "clahe":
                current = clahe(current, cfg.clahe)
    except TextriageError as exc:
        raise PipelineError("preprocess", str(exc)) from exc
    timings["preprocess"] = (time.perf_counter() - t0) * 1000.0

    t0 = time.perf_counter()
    try:
        maps = backends.detector.score(current)
        instances = extract_instances(maps, cfg.detect)
    except TextriageError as exc:
        raise PipelineError("detect", str(exc)) from exc
    timings["detect"] = (time.perf_counter() - t0) * 1000.0

    t0 = time.perf_counter()
    recognized = []
    for inst in instances:
        x, y, w, h = inst.bbox
        crop = ImageBuffer(np.ascontiguousarray(current.data[y:y + h, x:x + w]))
        try:
            text = backends.recognizer.recognize(crop)
        except TextriageError as exc:
            log.warning("recognizer failed on %s bbox=%s: %s", source or "<image>",
                        inst.bbox, exc)
            text = ""
        recognized.append(_scale_instance(inst.with_text(text), upscale_factor))
    instances = recognized
    timings["recognize"] = (time.perf_counter() - t0) * 1000.0

    t0 = time.perf_counter()
    try:
        premise = assemble_premise(instances)
        decision = zero_shot_classify(premise, cfg.labels, backends.nli,
                                      template=cfg.hypothesis_template)
    except TextriageError as exc:
        raise PipelineError("classify", str(exc)) from exc
    timings["classify"] = (time.perf_counter() - t0) * 1000.0

    timings["total"] = (time.perf_counter() - t_total) * 1000.0
    return DocumentResult(instances=instances, decision=decision, timings=timings,
                          source=source)


# ---------------------------------------------------------------------------
# live mode


class LatestFrameSlot:
    """Capacity-1 frame buffer: a new frame overwrites a pending one.

    The only shared mutable state between frame producer and worker.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._cond = threading.Condition(self._lock)
        self._item = None
        self._closed = False

    def offer(self, item) -> bool:
        """Store ``item``; returns False when it replaced a pending frame."""
        with self._cond:
            if self._closed:
                raise ConfigError("slot is closed")
            replaced = self._item is not None
            self._item = item
            self._cond.notify()
            return not replaced

    def take(self, timeout: float | None = None):
        """Blocking take-and-clear; None once closed and drained."""
        deadline = None if timeout is None else time.monotonic() + timeout
        with self._cond:
            while self._item is None and not self._closed:
                remaining = None if deadline is None else deadline - time.monotonic()
                if remaining is not None and remaining <= 0:
                    return None
                self._cond.wait(remaining)
            item, self._item = self._item, None
            return item

    def close(self):
        with self._cond:
            self._closed = True
            self._cond.notify_all()


@dataclass
class StreamSummary:
    received: int
    processed: int
    dropped: int
    failed: int
    mean_latency_ms: float


class LiveSession:
    """Single-worker live pipeline with a latest-wins frame slot.

    Frames never process concurrently within a session; config updates apply
    from the next frame onward.
    """

    def __init__(self, cfg: PipelineConfig, backends: BackendSet | None = None,
                 on_result: Callable[[DocumentResult], None] | None = None,
                 on_error: Callable[[int, Exception], None] | None = None):
        self._cfg = cfg
        self._backends = backends if backends is not None else resolve_backends(cfg)
        self._slot = LatestFrameSlot()
        self._lock = threading.Lock()
        self._on_result = on_result
        self._on_error = on_error
        self.received = 0
        self.processed = 0
        self.dropped = 0
        self.failed = 0
        self.last_result: DocumentResult | None = None
        self._latency_total = 0.0
        self._worker = threading.Thread(target=self._run, daemon=True)
        self._worker.start()

    @property
    def config(self) -> PipelineConfig:
        with self._lock:
            return self._cfg

    def update_config(self, cfg: PipelineConfig) -> None:
        with self._lock:
            self._cfg = cfg

    def submit(self, img: ImageBuffer) -> tuple[int, bool]:
        """Queue a frame; returns (sequence number, accepted flag).

        accepted=False means the new frame replaced a queued one (a drop).
        """
        with self._lock:
            self.received += 1
            seq = self.received
        accepted = self._slot.offer((seq, img, time.perf_counter()))
        if not accepted:
            with self._lock:
                self.dropped += 1
        return seq, accepted

    def _run(self):
        while True:
            item = self._slot.take()
            if item is None:
                return
            seq, img, t_in = item
            cfg = self.config
            try:
                result = process_image(img, cfg, backends=self._backends,
                                       source=f"frame:{seq}")
            except TextriageError as exc:
                with self._lock:
                    self.failed += 1
                if self._on_error is not None:
                    self._on_error(seq, exc)
                continue
            result.seq = seq
            latency = (time.perf_counter() - t_in) * 1000.0
            with self._lock:
                self.processed += 1
                self._latency_total += latency
                self.last_result = result
            if self._on_result is not None:
                self._on_result(result)

    def counters(self) -> dict[str, int]:
        with self._lock:
            return {
                "received": self.received,
                "processed": self.processed,
                "dropped": self.dropped,
                "failed": self.failed,
            }

    def close(self) -> StreamSummary:
        self._slot.close()
        self._worker.join(timeout=60.0)
        with self._lock:
            mean = self._latency_total / self.processed if self.processed else 0.0
            return StreamSummary(self.received, self.processed, self.dropped,
                                 self.failed, mean)


def process_stream(frames: Iterable[tuple[int, ImageBuffer]] | Iterator,
                   cfg: PipelineConfig,
                   sink: Callable[[DocumentResult], None],
                   backends: BackendSet | None = None) -> StreamSummary:
    """Drive a LiveSession from a frame source; blocks until the source ends.

    The source yields ``(seq, ImageBuffer)`` at its own pace (it may sleep to
    emulate a camera); results go to ``sink`` as they complete.
    """
    session = LiveSession(cfg, backends=backends, on_result=sink,
                          on_error=lambda seq, exc: sink(
                              DocumentResult([], None, {}, source=f"error:{exc}", seq=seq)))
    for _, img in frames:
        session.submit(img)
    return session.close()


# ---------------------------------------------------------------------------
# configuration files and overrides

_OVERRIDE_KINDS = {
    "stage_order": "strlist",
    "hypothesis_template": "str",
    "clahe.clip_factor": "float",
    "clahe.grid_cols": "int",
    "clahe.grid_rows": "int",
    "tiles.scale": "int",
    "tiles.tile": "int",
    "tiles.overlap": "int",
    "detect.global_thresh": "float",
    "detect.min_height": "int",
    "detect.max_height": "int",
    "detect.binarize_k": "float",
    "detect.connectivity": "int",
    "detect.unclip_ratio": "float",
    "labels": "strlist",
    "backends.scaler": "str",
    "backends.detector": "str",
    "backends.recognizer": "str",
    "backends.nli": "str",
}


def _coerce(key: str, value) -> object:
    kind = _OVERRIDE_KINDS[key]
    try:
        if kind == "int":
            return int(value)
        if kind == "float":
            return float(value)
        if kind == "strlist":
            if isinstance(value, str):
                return tuple(v.strip() for v in value.split(",") if v.strip())
            return tuple(str(v) for v in value)
        return str(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {value!r}") from exc


def apply_overrides(cfg: PipelineConfig, overrides: dict[str, object]) -> PipelineConfig:
    """Return a new config with dotted-key overrides applied (flags-over-file style)."""
    updates: dict[str, object] = {}
    nested: dict[str, dict[str, object]] = {}
    for key, value in overrides.items():
        if key not in _OVERRIDE_KINDS:
            raise ConfigError(f"unknown config key: {key}")
        coerced = _coerce(key, value)
        if "." in key:
            group, leaf = key.split(".", 1)
            nested.setdefault(group, {})[leaf] = coerced
        elif key == "labels":
            updates["labels"] = LabelSet(coerced)
        else:
            updates[key] = coerced
    for group, values in nested.items():
        updates[group] = replace(getattr(cfg, group), **values)
    return replace(cfg, **updates)


def parse_config_text(text: str) -> dict[str, str]:
    """Parse the flat ``key = value`` config format; # starts a comment line."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def load_config(path: str | Path | None = None) -> PipelineConfig:
    """Defaults, overlaid with the config file from ``path`` or $TEXTRIAGE_CONFIG."""
    cfg = PipelineConfig()
    if path is None:
        path = os.environ.get(CONFIG_ENV_VAR)
    if path:
        try:
            text = Path(path).read_text("utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        cfg = apply_overrides(cfg, parse_config_text(text))
    return cfg
