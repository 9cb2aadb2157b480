"""textriage: document text-image triage pipeline.

Deterministic preprocessing (grayscale, CLAHE, tiled upscaling), detector
score-map post-processing, zero-shot NLI classification, an evaluation
harness, an HTTP service and a CLI. Neural inference is isolated behind
pluggable backends; the reference backends are fully deterministic.
"""

from .classify import (
    ClassDecision,
    LabelSet,
    NLIScore,
    assemble_premise,
    softmax,
    zero_shot_classify,
)
from .detect import (
    DetectConfig,
    ScoreMaps,
    TextInstance,
    extract_instances,
    soft_binarize,
)
from .errors import (
    BackendError,
    BackendUnavailable,
    ConfigError,
    ImageFormatError,
    PipelineError,
    ProtocolError,
    TextriageError,
    TileProtocolError,
)
from .evaluation import (
    DatasetManifest,
    EvalReport,
    match_detections,
    polygon_iou,
    run_eval,
)
from .imaging import (
    ClaheConfig,
    ImageBuffer,
    TileConfig,
    clahe,
    to_grayscale,
    upscale_tiled,
)
from .pipeline import (
    DocumentResult,
    LiveSession,
    PipelineConfig,
    process_image,
    process_stream,
)

__version__ = "0.1.0"

__all__ = [
    "BackendError",
    "BackendUnavailable",
    "ClaheConfig",
    "ClassDecision",
    "ConfigError",
    "DatasetManifest",
    "DetectConfig",
    "DocumentResult",
    "EvalReport",
    "ImageBuffer",
    "ImageFormatError",
    "LabelSet",
    "LiveSession",
    "NLIScore",
    "PipelineConfig",
    "PipelineError",
    "ProtocolError",
    "ScoreMaps",
    "TextInstance",
    "TextriageError",
    "TileConfig",
    "TileProtocolError",
    "assemble_premise",
    "clahe",
    "extract_instances",
    "match_detections",
    "polygon_iou",
    "process_image",
    "process_stream",
    "run_eval",
    "soft_binarize",
    "softmax",
    "to_grayscale",
    "upscale_tiled",
    "zero_shot_classify",
]
