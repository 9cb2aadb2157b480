"""Deterministic preprocessing: grayscale conversion, CLAHE, tiled upscaling.

Everything here is a pure function over immutable inputs; neural
super-resolution is isolated behind the ScalerBackend protocol.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from io import BytesIO
from pathlib import Path
from typing import Protocol, runtime_checkable

import numpy as np

from .errors import BackendError, ConfigError, ImageFormatError, TileProtocolError

# Rec.601 luma weights
GRAY_WEIGHTS = (0.299, 0.587, 0.114)

_RAW_HEADER = struct.Struct("<IIB")


def _round_half_up(values: np.ndarray | float) -> np.ndarray:
    """Round with .5 always going up; np.round's banker's rounding is not bit-stable
    across refactors, so pixel math pins this variant."""
    return np.floor(np.asarray(values, dtype=np.float64) + 0.5)


@dataclass(frozen=True)
class ImageBuffer:
    """8-bit raster, grayscale ``(H, W)`` or RGB ``(H, W, 3)``, row-major uint8."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.dtype != np.uint8:
            raise ImageFormatError(f"expected uint8 samples, got {arr.dtype}")
        if not (arr.ndim == 2 or (arr.ndim == 3 and arr.shape[2] == 3)):
            raise ImageFormatError(
                f"expected shape (H, W) or (H, W, 3), got {arr.shape}"
            )
        if arr.shape[0] == 0 or arr.shape[1] == 0:
            raise ImageFormatError("zero-dimension image")
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.data.ndim == 2 else 3

    @classmethod
    def blank(cls, width: int, height: int, value: int = 255, channels: int = 1) -> "ImageBuffer":
        shape = (height, width) if channels == 1 else (height, width, 3)
        return cls(np.full(shape, value, dtype=np.uint8))


@dataclass(frozen=True)
class ClaheConfig:
    """Contrast-limited adaptive histogram equalization parameters."""

    clip_factor: float = 8.0
    grid_cols: int = 8
    grid_rows: int = 8

    def __post_init__(self):
        if not self.clip_factor > 0:
            raise ConfigError(f"clip_factor must be > 0, got {self.clip_factor}")
        if self.grid_cols < 1 or self.grid_rows < 1:
            raise ConfigError("grid dimensions must be >= 1")


@dataclass(frozen=True)
class TileConfig:
    """Tiled-upscaling schedule: integer scale, tile size, even overlap."""

    scale: int = 2
    tile: int = 64
    overlap: int = 16

    def __post_init__(self):
        if self.scale < 1:
            raise ConfigError(f"scale must be >= 1, got {self.scale}")
        if not 0 <= self.overlap < self.tile:
            raise ConfigError(
                f"overlap must satisfy 0 <= overlap < tile, got {self.overlap}/{self.tile}"
            )
        if self.overlap % 2 != 0:
            raise ConfigError(f"overlap must be even, got {self.overlap}")


@runtime_checkable
class ScalerBackend(Protocol):
    """Upscales a single tile by a fixed integer factor."""

    scale: int

    def upscale(self, tile: ImageBuffer) -> ImageBuffer:
        ...


# ---------------------------------------------------------------------------
# codecs


def decode_image(data: bytes) -> ImageBuffer:
    """Decode PNG/JPEG bytes to an ImageBuffer (grayscale stays 1ch, rest becomes RGB)."""
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(BytesIO(data)) as im:
            if im.mode == "L":
                arr = np.asarray(im, dtype=np.uint8)
            else:
                arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise ImageFormatError(f"cannot decode image bytes: {exc}") from exc
    return ImageBuffer(arr)


def encode_image(img: ImageBuffer, format: str = "PNG") -> bytes:
    """Encode to PNG or JPEG bytes."""
    from PIL import Image

    mode = "L" if img.channels == 1 else "RGB"
    out = BytesIO()
    Image.fromarray(img.data, mode=mode).save(out, format=format)
    return out.getvalue()


def load_image(path: str | Path) -> ImageBuffer:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ImageFormatError(f"cannot read {path}: {exc}") from exc
    return decode_image(data)


def save_image(path: str | Path, img: ImageBuffer) -> None:
    path = Path(path)
    fmt = "JPEG" if path.suffix.lower() in (".jpg", ".jpeg") else "PNG"
    path.write_bytes(encode_image(img, format=fmt))


def write_raw(img: ImageBuffer) -> bytes:
    """Raw fixture format: little-endian u32 width, u32 height, u8 channels, samples."""
    return _RAW_HEADER.pack(img.width, img.height, img.channels) + img.data.tobytes()


def read_raw(data: bytes) -> ImageBuffer:
    if len(data) < _RAW_HEADER.size:
        raise ImageFormatError("raw image shorter than header")
    width, height, channels = _RAW_HEADER.unpack_from(data)
    if channels not in (1, 3):
        raise ImageFormatError(f"raw image channels must be 1 or 3, got {channels}")
    expected = width * height * channels
    samples = data[_RAW_HEADER.size:]
    if len(samples) != expected:
        raise ImageFormatError(
            f"raw payload length {len(samples)} != {width}x{height}x{channels}"
        )
    arr = np.frombuffer(samples, dtype=np.uint8)
    shape = (height, width) if channels == 1 else (height, width, 3)
    return ImageBuffer(arr.reshape(shape).copy())


# ---------------------------------------------------------------------------
# grayscale


def to_grayscale(img: ImageBuffer, allow_gray: bool = False) -> ImageBuffer:
    """Rec.601 luma conversion, rounded and clamped to [0, 255].

    1-channel input raises unless ``allow_gray`` makes it a pass-through.
    """
    if img.channels == 1:
        if allow_gray:
            return img
        raise ImageFormatError("input is already grayscale")
    rgb = img.data.astype(np.float64)
    luma = rgb[..., 0] * GRAY_WEIGHTS[0] + rgb[..., 1] * GRAY_WEIGHTS[1] + rgb[..., 2] * GRAY_WEIGHTS[2]
    gray = np.clip(_round_half_up(luma), 0, 255).astype(np.uint8)
    return ImageBuffer(gray)


# ---------------------------------------------------------------------------
# CLAHE


def _grid_edges(dim: int, cells: int) -> np.ndarray:
    # integer edges, exact: edge[i] = floor(i * dim / cells)
    return (np.arange(cells + 1, dtype=np.int64) * dim) // cells


def _tile_mapping(tile: np.ndarray, clip_factor: float) -> np.ndarray:
    """256-entry lookup: clipped histogram -> CDF -> round(255 * cdf / n)."""
    n = tile.size
    hist = np.bincount(tile.ravel(), minlength=256).astype(np.float64)
    if math.isfinite(clip_factor):
        ceiling = max(1.0, float(_round_half_up(clip_factor * n / 256.0)))
        excess = np.maximum(hist - ceiling, 0.0).sum()
        hist = np.minimum(hist, ceiling) + excess / 256.0
    cdf = np.cumsum(hist)
    return np.clip(_round_half_up(255.0 * cdf / n), 0, 255)


def clahe(img: ImageBuffer, cfg: ClaheConfig) -> ImageBuffer:
    """Contrast-limited adaptive histogram equalization on a grayscale image.

    Per-tile 256-bin histograms are clipped at
    ``max(1, round(clip_factor * tile_pixels / 256))`` with the excess spread
    uniformly over all bins; each tile's mapping is
    ``round(255 * cdf(v) / tile_pixels)`` and output pixels bilinearly
    interpolate the four nearest tile-centre mappings (clamped at borders).
    """
    if img.channels != 1:
        raise ImageFormatError("clahe requires a grayscale image")
    h, w = img.height, img.width
    rows, cols = cfg.grid_rows, cfg.grid_cols
    if rows > h or cols > w:
        raise ConfigError(f"grid {rows}x{cols} larger than image {h}x{w}")

    row_edges = _grid_edges(h, rows)
    col_edges = _grid_edges(w, cols)

    mappings = np.empty((rows, cols, 256), dtype=np.float64)
    for r in range(rows):
        for c in range(cols):
            tile = img.data[row_edges[r]:row_edges[r + 1], col_edges[c]:col_edges[c + 1]]
            mappings[r, c] = _tile_mapping(tile, cfg.clip_factor)

    # tile centres in pixel coordinates
    cy = (row_edges[:-1] + row_edges[1:] - 1) / 2.0
    cx = (col_edges[:-1] + col_edges[1:] - 1) / 2.0

    def _axis_weights(centres: np.ndarray, dim: int):
        pos = np.arange(dim, dtype=np.float64)
        i0 = np.clip(np.searchsorted(centres, pos, side="right") - 1, 0, len(centres) - 1)
        i1 = np.clip(i0 + 1, 0, len(centres) - 1)
        span = centres[i1] - centres[i0]
        with np.errstate(invalid="ignore", divide="ignore"):
            frac = np.where(span > 0, (pos - centres[i0]) / np.where(span > 0, span, 1.0), 0.0)
        return i0, i1, np.clip(frac, 0.0, 1.0)

    r0, r1, wy = _axis_weights(cy, h)
    c0, c1, wx = _axis_weights(cx, w)

    v = img.data
    g00 = mappings[r0[:, None], c0[None, :], v]
    g01 = mappings[r0[:, None], c1[None, :], v]
    g10 = mappings[r1[:, None], c0[None, :], v]
    g11 = mappings[r1[:, None], c1[None, :], v]

    wyc = wy[:, None]
    wxr = wx[None, :]
    blended = (
        (1.0 - wyc) * ((1.0 - wxr) * g00 + wxr * g01)
        + wyc * ((1.0 - wxr) * g10 + wxr * g11)
    )
    out = np.clip(_round_half_up(blended), 0, 255).astype(np.uint8)
    return ImageBuffer(out)


# ---------------------------------------------------------------------------
# tiled upscaling


def _tile_origins(dim: int, tile: int, stride: int) -> list[int]:
    """0, stride, 2*stride, ... with the final origin clamped to dim - tile."""
    if dim <= tile:
        return [0]
    origins = []
    k = 0
    while k * stride + tile < dim:
        origins.append(k * stride)
        k += 1
    last = dim - tile
    if not origins or origins[-1] != last:
        origins.append(last)
    return origins


def _keep_spans(origins: list[int], tile: int, dim: int) -> list[tuple[int, int]]:
    """Half-open [lo, hi) input span each tile contributes after halo-discard.

    Consecutive tiles cut at the midpoint of their actual overlap region, which
    equals discarding overlap/2 per interior edge for uniform stride and keeps
    every output pixel written exactly once when the final origin was clamped.
    """
    spans = []
    size = min(tile, dim)
    for i, o in enumerate(origins):
        lo = 0 if i == 0 else _cut(origins[i - 1], o, size)
        hi = dim if i == len(origins) - 1 else _cut(o, origins[i + 1], size)
        spans.append((lo, hi))
    return spans


def _cut(prev_origin: int, origin: int, tile: int) -> int:
    overlap = prev_origin + tile - origin
    return origin + overlap // 2


def upscale_tiled(img: ImageBuffer, cfg: TileConfig, scaler: ScalerBackend) -> ImageBuffer:
    """Upscale via tiles of ``cfg.tile`` at stride ``tile - overlap``, reassembled
    by halo-discard; bit-identical to untiled scaling for pointwise scalers."""
    if scaler.scale != cfg.scale:
        raise ConfigError(
            f"scaler declares scale {scaler.scale}, config expects {cfg.scale}"
        )
    s = cfg.scale
    h, w = img.height, img.width
    stride = cfg.tile - cfg.overlap
    ys = _tile_origins(h, cfg.tile, stride)
    xs = _tile_origins(w, cfg.tile, stride)
    keep_y = _keep_spans(ys, cfg.tile, h)
    keep_x = _keep_spans(xs, cfg.tile, w)

    out_shape = (h * s, w * s) if img.channels == 1 else (h * s, w * s, 3)
    out = np.empty(out_shape, dtype=np.uint8)

    for i, (oy, (ky0, ky1)) in enumerate(zip(ys, keep_y)):
        th = min(cfg.tile, h)
        for j, (ox, (kx0, kx1)) in enumerate(zip(xs, keep_x)):
            tw = min(cfg.tile, w)
            sub = ImageBuffer(np.ascontiguousarray(img.data[oy:oy + th, ox:ox + tw]))
            try:
                scaled = scaler.upscale(sub)
            except BackendError as exc:
                raise BackendError(f"scaler failed on tile ({i}, {j}): {exc}") from exc
            if scaled.height != th * s or scaled.width != tw * s or scaled.channels != img.channels:
                raise TileProtocolError(
                    f"tile ({i}, {j}): expected {th * s}x{tw * s} output, "
                    f"got {scaled.height}x{scaled.width}"
                )
            out[ky0 * s:ky1 * s, kx0 * s:kx1 * s] = scaled.data[
                (ky0 - oy) * s:(ky1 - oy) * s, (kx0 - ox) * s:(kx1 - ox) * s
            ]
    return ImageBuffer(out)
