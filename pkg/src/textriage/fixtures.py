"""Deterministic test fixtures: canned documents and the synthetic eval corpus.

Documents are white pages with solid dark blocks standing in for text lines;
each block carries a sidecar annotation with the string a real recognizer
would read. Ink intensity is 32 (not 0) so the stencil detector's probability
stays strictly below 1.0.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .evaluation import DatasetManifest, ManifestEntry
from .imaging import ImageBuffer, save_image

INK = 32
PAGE_W, PAGE_H = 640, 480

Bbox = tuple[int, int, int, int]

# (bbox, text) per canned document; block sizes are unique across the whole
# set so dimension-keyed recognizer lookup is unambiguous
CANNED_DOCS: dict[str, list[tuple[Bbox, str]]] = {
    "invoice": [
        ((40, 40, 200, 24), "INVOICE"),
        ((360, 44, 180, 14), "No. 2024-0113"),
        ((40, 100, 260, 16), "Bill To: Meridian Supply Co."),
        ((40, 140, 240, 18), "Amount Due: $1,204.00"),
    ],
    "form": [
        ((40, 40, 220, 26), "Application Form"),
        ((40, 110, 300, 15), "Fill in every field below"),
        ((40, 150, 280, 20), "Checkbox: [ ] I agree to the terms"),
    ],
    "letter": [
        ((40, 40, 150, 17), "Dear Ms. Okafor,"),
        ((40, 100, 340, 19), "Thank you for your inquiry about our services."),
        ((40, 160, 170, 21), "Kind regards,"),
        ((40, 214, 120, 23), "Sincerely, J. Hart"),
    ],
    "report": [
        ((40, 40, 230, 25), "Quarterly Report"),
        ((40, 110, 310, 17), "Summary of findings"),
        ((40, 160, 320, 24), "Findings for the third quarter"),
    ],
}

CANNED_LABELS = {"invoice": "Invoice", "form": "Form", "letter": "Letter",
                 "report": "Report"}


def render_blocks(blocks: list[tuple[Bbox, int]], width: int = PAGE_W,
                  height: int = PAGE_H) -> ImageBuffer:
    """White page with filled rectangles at the given intensities."""
    page = np.full((height, width), 255, dtype=np.uint8)
    for (x, y, w, h), intensity in blocks:
        page[y:y + h, x:x + w] = intensity
    return ImageBuffer(page)


def canned_document(name: str) -> tuple[ImageBuffer, list[tuple[Bbox, str]]]:
    """One of the four canned documents plus its annotations."""
    annotations = CANNED_DOCS[name]
    img = render_blocks([(bbox, INK) for bbox, _ in annotations])
    return img, annotations


def canned_annotations() -> list[tuple[Bbox, str]]:
    """All annotations across the canned set (the service recognizer's table)."""
    out = []
    for annotations in CANNED_DOCS.values():
        out.extend(annotations)
    return out


def write_canned_document(directory: str | Path, name: str) -> Path:
    """Write ``<name>.png`` plus its ``<name>.json`` annotation sidecar."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    img, annotations = canned_document(name)
    image_path = directory / f"{name}.png"
    save_image(image_path, img)
    sidecar = {
        "label": CANNED_LABELS[name],
        "annotations": [{"bbox": list(bbox), "text": text} for bbox, text in annotations],
    }
    (directory / f"{name}.json").write_text(json.dumps(sidecar, indent=2), "utf-8")
    return image_path


def _place_block(rng: np.random.Generator, occupied: list[Bbox], width: int,
                 height: int, bw: int, bh: int, margin: int = 2) -> Bbox | None:
    for _ in range(80):
        x = int(rng.integers(margin, width - bw - margin))
        y = int(rng.integers(margin, height - bh - margin))
        candidate = (x - margin, y - margin, bw + 2 * margin, bh + 2 * margin)
        if all(not _overlaps(candidate, other) for other in occupied):
            occupied.append(candidate)
            return (x, y, bw, bh)
    return None


def _overlaps(a: Bbox, b: Bbox) -> bool:
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    return ax < bx + bw and bx < ax + aw and ay < by + bh and by < ay + ah


def synthetic_corpus(directory: str | Path, count: int = 50,
                     seed: int = 20240601, width: int = 480,
                     height: int = 360) -> Path:
    """Generate the acceptance corpus: ``count`` pages of dark blocks on white.

    Every ground-truth block height is within the detector's [5, 1024] limits;
    each page also renders a couple of sub-minimum noise blocks that must be
    filtered out rather than counted. Returns the manifest path.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    entries = []
    for idx in range(count):
        occupied: list[Bbox] = []
        blocks = []
        gt_polygons = []
        for _ in range(int(rng.integers(6, 13))):
            bw = int(rng.integers(30, 301))
            bh = int(rng.integers(6, 49))
            bbox = _place_block(rng, occupied, width, height, bw, bh)
            if bbox is None:
                continue
            x, y, w, h = bbox
            blocks.append((bbox, int(rng.integers(10, 61))))
            gt_polygons.append([(x, y), (x + w, y), (x + w, y + h), (x, y + h)])
        # noise below min_height: rendered but absent from ground truth
        for _ in range(2):
            bbox = _place_block(rng, occupied, width, height,
                                int(rng.integers(20, 60)), int(rng.integers(2, 4)))
            if bbox is not None:
                blocks.append((bbox, int(rng.integers(10, 61))))
        img = render_blocks(blocks, width=width, height=height)
        image_path = directory / f"doc_{idx:03d}.png"
        save_image(image_path, img)
        entries.append(ManifestEntry(str(image_path), gt_polygons))
    manifest = DatasetManifest(entries)
    manifest_path = directory / "manifest.json"
    manifest_path.write_text(manifest.to_json(), "utf-8")
    return manifest_path
