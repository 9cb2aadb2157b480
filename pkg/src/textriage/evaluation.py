"""Dataset evaluation: polygon IoU matching, detection rate and timing report.

The match criterion is recall at a fixed IoU threshold with greedy one-to-one
matching; the report always embeds its own metric definition because headline
rates are meaningless without one.
"""

from __future__ import annotations

import json
import math
import re
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, ImageFormatError, TextriageError
from .imaging import load_image

Polygon = list[tuple[float, float]]

DEFAULT_IOU_RESOLUTION = 512
MATCH_IOU_RESOLUTION = 256


@dataclass(frozen=True)
class ManifestEntry:
    image_path: str
    gt_polygons: list[Polygon]
    gt_label: str | None = None

    def __post_init__(self):
        if not self.image_path:
            raise ConfigError("manifest entry with empty image path")
        for poly in self.gt_polygons:
            if len(poly) < 3:
                raise ConfigError(f"ground-truth polygon with {len(poly)} vertices")


@dataclass(frozen=True)
class DatasetManifest:
    entries: list[ManifestEntry]

    @classmethod
    def from_json(cls, text: str) -> "DatasetManifest":
        payload = json.loads(text)
        entries = []
        for item in payload["images"]:
            entries.append(
                ManifestEntry(
                    image_path=item["path"],
                    gt_polygons=[[(float(x), float(y)) for x, y in poly]
                                 for poly in item["gt_polygons"]],
                    gt_label=item.get("gt_label"),
                )
            )
        return cls(entries)

    @classmethod
    def load(cls, path: str | Path) -> "DatasetManifest":
        return cls.from_json(Path(path).read_text("utf-8"))

    def to_json(self) -> str:
        return json.dumps(
            {
                "images": [
                    {
                        "path": e.image_path,
                        "gt_polygons": [[[x, y] for x, y in poly] for poly in e.gt_polygons],
                        "gt_label": e.gt_label,
                    }
                    for e in self.entries
                ]
            },
            indent=2,
        )


# ---------------------------------------------------------------------------
# rasterized polygon IoU


def _poly_bbox(poly: Polygon) -> tuple[float, float, float, float]:
    xs = [p[0] for p in poly]
    ys = [p[1] for p in poly]
    return min(xs), min(ys), max(xs), max(ys)


def _rasterize(poly: Polygon, x0: float, y0: float, cell: float,
               nx: int, ny: int) -> np.ndarray:
    """Even-odd fill of ``poly`` sampled at pixel centres of the given grid."""
    px = x0 + (np.arange(nx, dtype=np.float64) + 0.5) * cell
    py = (y0 + (np.arange(ny, dtype=np.float64) + 0.5) * cell)[:, None]
    inside = np.zeros((ny, nx), dtype=bool)
    n = len(poly)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        if y1 == y2:
            continue
        crosses = (y1 > py) != (y2 > py)
        xint = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (px[None, :] < xint)
    return inside


def polygon_iou(a: Polygon, b: Polygon, resolution: int = DEFAULT_IOU_RESOLUTION,
                return_flags: bool = False):
    """Intersection-over-union of two polygons on a shared raster grid.

    The joint bounding box is sampled with square cells sized so the longer
    side gets ``resolution`` samples. A polygon covering zero cells is
    degenerate and scores 0; ``return_flags`` additionally returns the two
    degeneracy flags.
    """
    if len(a) < 3 or len(b) < 3:
        raise ConfigError("polygons need at least 3 vertices")
    if resolution < 1:
        raise ConfigError(f"resolution must be >= 1, got {resolution}")
    ax0, ay0, ax1, ay1 = _poly_bbox(a)
    bx0, by0, bx1, by1 = _poly_bbox(b)
    x0, y0 = min(ax0, bx0), min(ay0, by0)
    x1, y1 = max(ax1, bx1), max(ay1, by1)
    w, h = x1 - x0, y1 - y0
    if w <= 0.0 and h <= 0.0:
        result = (0.0, True, True)
        return result if return_flags else 0.0
    cell = max(w, h) / resolution
    nx = max(1, math.ceil(w / cell)) if w > 0 else 1
    ny = max(1, math.ceil(h / cell)) if h > 0 else 1
    ra = _rasterize(a, x0, y0, cell, nx, ny)
    rb = _rasterize(b, x0, y0, cell, nx, ny)
    deg_a = not ra.any()
    deg_b = not rb.any()
    union = np.count_nonzero(ra | rb)
    if union == 0:
        iou = 0.0
    else:
        iou = float(np.count_nonzero(ra & rb) / union)
    if deg_a or deg_b:
        iou = 0.0
    return (iou, deg_a, deg_b) if return_flags else iou


def match_detections(pred: list[Polygon], gt: list[Polygon], iou_thresh: float,
                     resolution: int = MATCH_IOU_RESOLUTION) -> dict:
    """Greedy one-to-one matching in descending IoU order.

    Returns ``{"tp", "fp", "fn", "matching"}`` where matching is a list of
    ``(pred_idx, gt_idx, iou)`` triples. Bbox-disjoint pairs skip
    rasterization entirely.
    """
    if not 0.0 < iou_thresh <= 1.0:
        raise ConfigError(f"iou_thresh must be in (0, 1], got {iou_thresh}")
    pairs = []
    pred_boxes = [_poly_bbox(p) if len(p) >= 1 else (0, 0, 0, 0) for p in pred]
    gt_boxes = [_poly_bbox(g) for g in gt]
    for i, p in enumerate(pred):
        if len(p) < 3:
            continue  # sub-polygon prediction: can never match, stays a false positive
        px0, py0, px1, py1 = pred_boxes[i]
        for j, g in enumerate(gt):
            gx0, gy0, gx1, gy1 = gt_boxes[j]
            if px0 > gx1 or gx0 > px1 or py0 > gy1 or gy0 > py1:
                continue
            iou = polygon_iou(p, g, resolution=resolution)
            if iou >= iou_thresh:
                pairs.append((iou, i, j))
    pairs.sort(key=lambda t: (-t[0], t[1], t[2]))
    used_pred: set[int] = set()
    used_gt: set[int] = set()
    matching = []
    for iou, i, j in pairs:
        if i in used_pred or j in used_gt:
            continue
        used_pred.add(i)
        used_gt.add(j)
        matching.append((i, j, iou))
    tp = len(matching)
    return {"tp": tp, "fp": len(pred) - tp, "fn": len(gt) - tp, "matching": matching}


# ---------------------------------------------------------------------------
# harness


@dataclass
class ImageEval:
    path: str
    tp: int = 0
    fp: int = 0
    fn: int = 0
    failed: bool = False
    label_correct: bool | None = None
    timings_ms: dict = field(default_factory=dict)


@dataclass
class EvalReport:
    per_image: list[ImageEval]
    detection_rate: float
    precision: float
    f_measure: float
    classification_accuracy: float | None
    wall_time_s: float
    iou_thresh: float
    metric_definition: str

    def to_dict(self) -> dict:
        return {
            "detection_rate": self.detection_rate,
            "precision": self.precision,
            "f_measure": self.f_measure,
            "classification_accuracy": self.classification_accuracy,
            "wall_time_s": self.wall_time_s,
            "iou_thresh": self.iou_thresh,
            "metric_definition": self.metric_definition,
            "images": [
                {
                    "path": im.path,
                    "tp": im.tp,
                    "fp": im.fp,
                    "fn": im.fn,
                    "failed": im.failed,
                    "label_correct": im.label_correct,
                    "timings_ms": im.timings_ms,
                }
                for im in self.per_image
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def aggregate_report(per_image: list[ImageEval], iou_thresh: float,
                     wall_time_s: float) -> EvalReport:
    """Fold per-image counts into the aggregate rates (order-independent)."""
    tp = sum(im.tp for im in per_image)
    fp = sum(im.fp for im in per_image)
    fn = sum(im.fn for im in per_image)
    recall = 100.0 * tp / (tp + fn) if tp + fn else 0.0
    precision = 100.0 * tp / (tp + fp) if tp + fp else 0.0
    f = 2.0 * precision * recall / (precision + recall) if precision + recall else 0.0
    labeled = [im for im in per_image if im.label_correct is not None]
    accuracy = (
        100.0 * sum(im.label_correct for im in labeled) / len(labeled) if labeled else None
    )
    return EvalReport(
        per_image=per_image,
        detection_rate=recall,
        precision=precision,
        f_measure=f,
        classification_accuracy=accuracy,
        wall_time_s=wall_time_s,
        iou_thresh=iou_thresh,
        metric_definition=(
            f"detection_rate = recall at IoU >= {iou_thresh} with greedy "
            "one-to-one matching on rasterized polygon IoU"
        ),
    )


def run_eval(manifest: DatasetManifest, cfg, iou_thresh: float = 0.5,
             backends=None) -> EvalReport:
    """Process every manifest entry through the pipeline and score detections.

    Unreadable images are marked failed and count their ground truth as
    misses; the run continues.
    """
    from .pipeline import process_image, resolve_backends

    if backends is None:
        backends = resolve_backends(cfg)
    start = time.perf_counter()
    per_image = []
    for entry in manifest.entries:
        record = ImageEval(path=entry.image_path)
        try:
            img = load_image(entry.image_path)
        except (ImageFormatError, OSError):
            record.failed = True
            record.fn = len(entry.gt_polygons)
            per_image.append(record)
            continue
        try:
            result = process_image(img, cfg, backends=backends, source=entry.image_path)
        except TextriageError:
            record.failed = True
            record.fn = len(entry.gt_polygons)
            per_image.append(record)
            continue
        pred_polys = [list(inst.polygon) for inst in result.instances]
        counts = match_detections(pred_polys, entry.gt_polygons, iou_thresh)
        record.tp, record.fp, record.fn = counts["tp"], counts["fp"], counts["fn"]
        record.timings_ms = dict(result.timings)
        if entry.gt_label is not None and result.decision is not None:
            record.label_correct = result.decision.label == entry.gt_label
        per_image.append(record)
    return aggregate_report(per_image, iou_thresh, time.perf_counter() - start)


# ---------------------------------------------------------------------------
# Total-Text ground-truth converter

_TT_LIST = re.compile(r"\[\[(.*?)\]\]")


def parse_totaltext_gt(text: str) -> list[Polygon]:
    """Parse one Total-Text annotation file: per line, an x list and a y list."""
    polygons = []
    for line in text.splitlines():
        if "x:" not in line or "y:" not in line:
            continue
        lists = _TT_LIST.findall(line)
        if len(lists) < 2:
            continue
        xs = [float(v) for v in lists[0].replace(",", " ").split()]
        ys = [float(v) for v in lists[1].replace(",", " ").split()]
        if len(xs) != len(ys) or len(xs) < 3:
            continue
        polygons.append(list(zip(xs, ys)))
    return polygons


def convert_totaltext(gt_dir: str | Path, image_dir: str | Path) -> DatasetManifest:
    """Pair ``poly_gt_<stem>.txt`` annotation files with their images."""
    gt_dir, image_dir = Path(gt_dir), Path(image_dir)
    entries = []
    for gt_path in sorted(gt_dir.glob("*.txt")):
        stem = gt_path.stem
        if stem.startswith("poly_gt_"):
            stem = stem[len("poly_gt_"):]
        image_path = None
        for suffix in (".jpg", ".jpeg", ".png", ".JPG"):
            candidate = image_dir / f"{stem}{suffix}"
            if candidate.exists():
                image_path = candidate
                break
        if image_path is None:
            continue
        polygons = parse_totaltext_gt(gt_path.read_text("utf-8", errors="replace"))
        if polygons:
            entries.append(ManifestEntry(str(image_path), polygons))
    return DatasetManifest(entries)
