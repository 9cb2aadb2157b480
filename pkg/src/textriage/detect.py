"""Detector post-processing: score maps to text instances.

Takes the probability/threshold map pair a detector backend emits and turns
it into polygons via hard masking, connected components, Moore-neighbour
contour tracing and height filtering. The soft binarization used at training
time in DB-style detectors is exposed for analysis.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Protocol, runtime_checkable

import numpy as np

from .errors import ConfigError, ImageFormatError
from .imaging import ImageBuffer


@dataclass(frozen=True)
class ScoreMaps:
    """Paired text-probability and adaptive-threshold maps over [0, 1].

    ``shrunk`` records whether the producing backend emits shrunk text masks
    (real DB-family networks do); it gates polygon unclipping downstream.
    """

    prob: np.ndarray
    thresh: np.ndarray
    shrunk: bool = False

    def __post_init__(self):
        p = np.asarray(self.prob, dtype=np.float64)
        t = np.asarray(self.thresh, dtype=np.float64)
        if p.ndim != 2 or t.ndim != 2:
            raise ImageFormatError("score maps must be 2-D")
        if p.shape != t.shape:
            raise ImageFormatError(f"map shape mismatch: {p.shape} vs {t.shape}")
        for name, m in (("prob", p), ("thresh", t)):
            if m.size and (m.min() < 0.0 or m.max() > 1.0):
                raise ImageFormatError(f"{name} map values outside [0, 1]")
        object.__setattr__(self, "prob", p)
        object.__setattr__(self, "thresh", t)

    @property
    def shape(self) -> tuple[int, int]:
        return self.prob.shape


@dataclass(frozen=True)
class DetectConfig:
    global_thresh: float = 0.25
    min_height: int = 5
    max_height: int = 1024
    binarize_k: float = 50.0
    connectivity: int = 8
    unclip_ratio: float = 1.5

    def __post_init__(self):
        if not 0.0 <= self.global_thresh <= 1.0:
            raise ConfigError(f"global_thresh must be in [0, 1], got {self.global_thresh}")
        if not 0 < self.min_height <= self.max_height:
            raise ConfigError(
                f"require 0 < min_height <= max_height, got {self.min_height}/{self.max_height}"
            )
        if self.binarize_k <= 0:
            raise ConfigError(f"binarize_k must be > 0, got {self.binarize_k}")
        if self.connectivity not in (4, 8):
            raise ConfigError(f"connectivity must be 4 or 8, got {self.connectivity}")


@dataclass(frozen=True)
class TextInstance:
    """One detected text region: polygon, bbox, mean-probability score, text."""

    polygon: tuple[tuple[float, float], ...]
    bbox: tuple[int, int, int, int]  # x, y, w, h
    score: float
    text: str | None = None

    def with_text(self, text: str) -> "TextInstance":
        return replace(self, text=text)


@runtime_checkable
class DetectorBackend(Protocol):
    """Produces score maps for a grayscale image."""

    def score(self, img: ImageBuffer) -> ScoreMaps:
        ...


def dump_maps(maps: ScoreMaps) -> dict:
    """Debug dump in the sidecar wire shape: base64 little-endian float32 maps."""
    import base64

    h, w = maps.shape
    return {
        "prob": base64.b64encode(maps.prob.astype("<f4").tobytes()).decode("ascii"),
        "thresh": base64.b64encode(maps.thresh.astype("<f4").tobytes()).decode("ascii"),
        "shape": [h, w],
        "shrunk": maps.shrunk,
    }


def soft_binarize(maps: ScoreMaps, k: float) -> np.ndarray:
    """Differentiable binarization B = 1 / (1 + exp(-k * (P - T))), elementwise."""
    if k <= 0:
        raise ConfigError(f"steepness k must be > 0, got {k}")
    z = k * (maps.prob - maps.thresh)
    # piecewise-stable sigmoid: avoids overflow for large |z|
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


# ---------------------------------------------------------------------------
# connected components (run-based union-find)


class _UnionFind:
    __slots__ = ("parent",)

    def __init__(self):
        self.parent: list[int] = []

    def make(self) -> int:
        self.parent.append(len(self.parent))
        return len(self.parent) - 1

    def find(self, a: int) -> int:
        parent = self.parent
        root = a
        while parent[root] != root:
            root = parent[root]
        while parent[a] != root:
            parent[a], a = root, parent[a]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _row_runs(row: np.ndarray) -> list[tuple[int, int]]:
    """Half-open [start, end) column runs of True pixels."""
    padded = np.zeros(row.size + 2, dtype=np.int8)
    padded[1:-1] = row
    d = np.diff(padded)
    starts = np.flatnonzero(d == 1)
    ends = np.flatnonzero(d == -1)
    return list(zip(starts.tolist(), ends.tolist()))


@dataclass
class _Component:
    pixel_count: int = 0
    min_row: int = 1 << 30
    max_row: int = -1
    min_col: int = 1 << 30
    max_col: int = -1
    prob_sum: float = 0.0
    runs: list[tuple[int, int, int]] = field(default_factory=list)  # (row, start, end)


def label_components(mask: np.ndarray, connectivity: int = 8,
                     prob: np.ndarray | None = None) -> list[_Component]:
    """Connected components of a boolean mask via run merging.

    Returns one record per component with pixel count, bbox extents, the
    covered runs and (when ``prob`` is given) the probability sum.
    """
    if connectivity not in (4, 8):
        raise ConfigError(f"connectivity must be 4 or 8, got {connectivity}")
    uf = _UnionFind()
    run_rows: list[tuple[int, int, int, int]] = []  # (row, start, end, uf id)
    prev: list[tuple[int, int, int]] = []  # (start, end, uf id)
    reach = 0 if connectivity == 4 else 1
    for r in range(mask.shape[0]):
        cur = []
        p = 0
        for start, end in _row_runs(mask[r]):
            rid = uf.make()
            # merge with previous-row runs whose column span touches this one
            while p < len(prev) and prev[p][1] + reach <= start:
                p += 1
            q = p
            while q < len(prev) and prev[q][0] < end + reach:
                uf.union(rid, prev[q][2])
                q += 1
            if q > p:
                q -= 1  # last overlapping run may also touch the next run
            cur.append((start, end, rid))
            run_rows.append((r, start, end, rid))
            p = q
        prev = cur

    comps: dict[int, _Component] = {}
    for r, start, end, rid in run_rows:
        root = uf.find(rid)
        comp = comps.get(root)
        if comp is None:
            comp = comps[root] = _Component()
        comp.pixel_count += end - start
        comp.min_row = min(comp.min_row, r)
        comp.max_row = max(comp.max_row, r)
        comp.min_col = min(comp.min_col, start)
        comp.max_col = max(comp.max_col, end - 1)
        comp.runs.append((r, start, end))
        if prob is not None:
            comp.prob_sum += float(prob[r, start:end].sum())
    return list(comps.values())


# ---------------------------------------------------------------------------
# contour tracing

# clockwise Moore neighbourhood starting west, as (drow, dcol)
_MOORE = ((0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1))
_MOORE_INDEX = {d: i for i, d in enumerate(_MOORE)}


def trace_outer_contour(mask: np.ndarray) -> list[tuple[int, int]]:
    """Moore-neighbour boundary trace of the first (topmost-leftmost) component.

    Returns boundary pixels as (row, col), clockwise, one full cycle. A single
    isolated pixel yields a one-element list.
    """
    h, w = mask.shape
    flat = int(np.argmax(mask))
    sr, sc = divmod(flat, w)
    if not mask[sr, sc]:
        return []

    def fg(r: int, c: int) -> bool:
        return 0 <= r < h and 0 <= c < w and bool(mask[r, c])

    contour: list[tuple[int, int]] = [(sr, sc)]
    p = (sr, sc)
    b = (sr, sc - 1)  # entered from the west; guaranteed background for the scan start
    seen: dict[tuple[tuple[int, int], tuple[int, int]], int] = {(p, b): 0}
    limit = 4 * h * w + 8
    for _ in range(limit):
        db = _MOORE_INDEX[(b[0] - p[0], b[1] - p[1])]
        nxt = None
        last_bg = b
        for k in range(1, 9):
            d = _MOORE[(db + k) % 8]
            cand = (p[0] + d[0], p[1] + d[1])
            if fg(cand[0], cand[1]):
                nxt = cand
                break
            last_bg = cand
        if nxt is None:
            return contour  # isolated pixel
        p, b = nxt, last_bg
        state = (p, b)
        if state in seen:
            return contour[seen[state]:]
        seen[state] = len(contour)
        contour.append(p)
    return contour  # unreachable for well-formed masks; safety bound


def _dilate(mask: np.ndarray, radius: int) -> np.ndarray:
    """Binary dilation by a square structuring element, ``radius`` iterations."""
    out = mask
    for _ in range(radius):
        padded = np.pad(out, 1)
        acc = padded[1:-1, 1:-1].copy()
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                if dr or dc:
                    acc |= padded[1 + dr:padded.shape[0] - 1 + dr,
                                  1 + dc:padded.shape[1] - 1 + dc]
        out = acc
    return out


def _polygon_perimeter(points: list[tuple[float, float]]) -> float:
    if len(points) < 2:
        return 0.0
    total = 0.0
    for i in range(len(points)):
        x1, y1 = points[i]
        x2, y2 = points[(i + 1) % len(points)]
        total += ((x2 - x1) ** 2 + (y2 - y1) ** 2) ** 0.5
    return total


def extract_instances(maps: ScoreMaps, cfg: DetectConfig) -> list[TextInstance]:
    """Score maps -> sorted text instances.

    Mask predicate is ``P > T AND P >= global_thresh``; components outside
    [min_height, max_height] are rejected; score is the mean probability over
    the component; the polygon is the Moore outer contour (pixel centres),
    dilated by Area*unclip_ratio/Perimeter when the maps are shrunk.
    """
    h, w = maps.shape
    mask = (maps.prob > maps.thresh) & (maps.prob >= cfg.global_thresh)
    if not mask.any():
        return []

    instances = []
    for comp in label_components(mask, cfg.connectivity, prob=maps.prob):
        bh = comp.max_row - comp.min_row + 1
        if not cfg.min_height <= bh <= cfg.max_height:
            continue
        bw = comp.max_col - comp.min_col + 1
        local = np.zeros((bh, bw), dtype=bool)
        for r, start, end in comp.runs:
            local[r - comp.min_row, start - comp.min_col:end - comp.min_col] = True

        score = comp.prob_sum / comp.pixel_count
        oy, ox = comp.min_row, comp.min_col

        if maps.shrunk:
            contour = trace_outer_contour(local)
            poly = [(float(c + ox), float(r + oy)) for r, c in contour]
            perimeter = _polygon_perimeter(poly)
            delta = comp.pixel_count * cfg.unclip_ratio / max(perimeter, 1.0)
            radius = int(_round_int(delta))
            if radius > 0:
                grown = _dilate(np.pad(local, radius), radius)
                contour = trace_outer_contour(grown)
                oy, ox = oy - radius, ox - radius
                # clip to image bounds
                contour = [
                    (min(max(r + oy, 0), h - 1), min(max(c + ox, 0), w - 1))
                    for r, c in contour
                ]
                poly_pts = [(float(c), float(r)) for r, c in contour]
                xs = [p[0] for p in poly_pts]
                ys = [p[1] for p in poly_pts]
                bbox = (int(min(xs)), int(min(ys)),
                        int(max(xs)) - int(min(xs)) + 1, int(max(ys)) - int(min(ys)) + 1)
                instances.append(TextInstance(tuple(poly_pts), bbox, score))
                continue

        contour = trace_outer_contour(local)
        poly_pts = tuple((float(c + ox), float(r + oy)) for r, c in contour)
        bbox = (ox, oy, bw, bh)
        instances.append(TextInstance(poly_pts, bbox, score))

    instances.sort(key=lambda t: (t.bbox[1], t.bbox[0]))
    return instances


def _round_int(v: float) -> int:
    return int(np.floor(v + 0.5))
