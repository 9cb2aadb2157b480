"""Wire payload helpers: raw image format and float-map encoding.

Images travel as base64 of the raw fixture format (little-endian u32 width,
u32 height, u8 channels, then row-major uint8 samples); float maps as base64
row-major little-endian float32 with an explicit [H, W] shape.
"""

from __future__ import annotations

import base64
import struct

import numpy as np

_HEADER = struct.Struct("<IIB")


class WireError(ValueError):
    """Malformed payload inside an otherwise well-formed request."""


def decode_image(b64: str) -> np.ndarray:
    try:
        blob = base64.b64decode(b64, validate=True)
    except Exception as exc:
        raise WireError(f"image is not valid base64: {exc}") from exc
    if len(blob) < _HEADER.size:
        raise WireError("image payload shorter than the raw header")
    width, height, channels = _HEADER.unpack_from(blob)
    if channels not in (1, 3):
        raise WireError(f"channels must be 1 or 3, got {channels}")
    samples = np.frombuffer(blob, dtype=np.uint8, offset=_HEADER.size)
    if samples.size != width * height * channels:
        raise WireError(
            f"payload holds {samples.size} samples, header says "
            f"{width}x{height}x{channels}"
        )
    shape = (height, width) if channels == 1 else (height, width, 3)
    return samples.reshape(shape).copy()


def encode_image(arr: np.ndarray) -> str:
    if arr.ndim == 2:
        channels = 1
    elif arr.ndim == 3 and arr.shape[2] == 3:
        channels = 3
    else:
        raise WireError(f"unsupported image shape {arr.shape}")
    height, width = arr.shape[:2]
    blob = _HEADER.pack(width, height, channels) + arr.astype(np.uint8).tobytes()
    return base64.b64encode(blob).decode("ascii")


def encode_map(arr: np.ndarray) -> str:
    return base64.b64encode(arr.astype("<f4").tobytes()).decode("ascii")
