"""File formats: the TGTMRAW1 integer raster container and 8-bit PNG.

TGTMRAW1 layout (all integers little-endian)::

    offset  size  field
    0       8     magic  b"TGTMRAW1"
    8       4     width            uint32
    12      4     height           uint32
    16      4     bit_depth        uint32, 1..26
    20      4     channel_count    uint32, 1 or 3
    24      ...   samples          uint32 each, row-major, pixel-interleaved
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .raster import HdrImage, LumaImage

MAGIC = b"TGTMRAW1"
_HEADER = struct.Struct("<8sIIII")
MAX_RAW_BITS = 26


class RawFormatError(ValueError):
    """Malformed TGTMRAW1 file."""


class UnsupportedImageError(ValueError):
    """Image file that is not 8-bit RGB or grayscale."""


def parse_raw(data: bytes) -> HdrImage | LumaImage:
    if len(data) < _HEADER.size:
        raise RawFormatError(f"file too short for header ({len(data)} bytes)")
    magic, width, height, bit_depth, channels = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise RawFormatError(f"bad magic {magic!r}")
    if not 1 <= bit_depth <= MAX_RAW_BITS:
        raise RawFormatError(f"bit_depth {bit_depth} outside [1, {MAX_RAW_BITS}]")
    if channels not in (1, 3):
        raise RawFormatError(f"channel_count must be 1 or 3, got {channels}")
    expected = width * height * channels * 4
    payload = data[_HEADER.size :]
    if len(payload) != expected:
        raise RawFormatError(
            f"payload is {len(payload)} bytes, header implies {expected}"
        )
    samples = np.frombuffer(payload, dtype="<u4")
    bad = np.flatnonzero(samples >> np.uint32(bit_depth))
    if bad.size:
        i = int(bad[0])
        raise RawFormatError(
            f"sample {int(samples[i])} at index {i} exceeds {bit_depth}-bit range"
        )
    samples = samples.astype(np.uint32)
    if channels == 3:
        return HdrImage(samples.reshape(height, width, 3), bit_depth)
    return LumaImage(samples.reshape(height, width), bit_depth)


def read_raw(path) -> HdrImage | LumaImage:
    return parse_raw(Path(path).read_bytes())


def encode_raw(img: HdrImage | LumaImage) -> bytes:
    px = np.asarray(img.pixels)
    if img.bit_depth > MAX_RAW_BITS:
        raise RawFormatError(f"bit_depth {img.bit_depth} exceeds {MAX_RAW_BITS}")
    channels = 3 if px.ndim == 3 else 1
    height, width = px.shape[:2]
    header = _HEADER.pack(MAGIC, width, height, img.bit_depth, channels)
    return header + px.astype("<u4").tobytes()


def write_raw(img: HdrImage | LumaImage, path) -> None:
    Path(path).write_bytes(encode_raw(img))


_EIGHT_BIT_MODES = {"RGB", "RGBA", "L", "LA", "P"}


def read_png8(path) -> np.ndarray:
    """Load an 8-bit image as ``(H, W, 3)`` uint8.

    Grayscale is promoted by channel replication, palettes are expanded,
    and alpha is dropped. Anything wider than 8 bits is rejected.
    """
    with Image.open(path) as im:
        if im.mode not in _EIGHT_BIT_MODES:
            raise UnsupportedImageError(
                f"{path}: unsupported mode {im.mode!r}; only 8-bit RGB/grayscale is accepted"
            )
        if im.mode in ("L", "LA"):
            gray = np.asarray(im.convert("L"))
            return np.repeat(gray[:, :, None], 3, axis=2)
        return np.asarray(im.convert("RGB")).copy()


def write_png8(img: np.ndarray, path) -> None:
    arr = np.asarray(img)
    if arr.dtype != np.uint8 or arr.ndim != 3 or arr.shape[2] != 3:
        raise UnsupportedImageError("write_png8 expects (H, W, 3) uint8")
    Image.fromarray(arr, mode="RGB").save(path, format="PNG")
