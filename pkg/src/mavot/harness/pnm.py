"""Minimal binary PPM (P6) / PGM (P5) reader and writer, 8-bit only."""
from __future__ import annotations

import numpy as np

from ..errors import SequenceFormatError


def _tokens(data: bytes, count: int, pos: int):
    out = []
    n = len(data)
    while len(out) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise SequenceFormatError("truncated PNM header")
        out.append(data[start:pos])
    # exactly one whitespace byte separates the header from the raster
    return out, pos + 1


def decode_pnm(data: bytes) -> np.ndarray:
    magic = data[:2]
    if magic not in (b"P5", b"P6"):
        raise SequenceFormatError(f"unsupported image format {magic!r} (need binary P5/P6)")
    (w, h, maxval), pos = _tokens(data, 3, 2)
    try:
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError as e:
        raise SequenceFormatError(f"bad PNM header: {e}") from None
    if maxval != 255:
        raise SequenceFormatError(f"only 8-bit images are supported (maxval {maxval})")
    channels = 3 if magic == b"P6" else 1
    size = w * h * channels
    raster = data[pos:pos + size]
    if len(raster) != size:
        raise SequenceFormatError(f"image data truncated: {len(raster)} of {size} bytes")
    img = np.frombuffer(raster, dtype=np.uint8).reshape(h, w, channels)
    return img if channels == 3 else img[:, :, 0]


def encode_pnm(img: np.ndarray) -> bytes:
    img = np.asarray(img)
    if img.dtype != np.uint8:
        raise ValueError(f"expected uint8 pixels, got {img.dtype}")
    if img.ndim == 2:
        magic, h, w = b"P5", img.shape[0], img.shape[1]
    elif img.ndim == 3 and img.shape[2] == 3:
        magic, h, w = b"P6", img.shape[0], img.shape[1]
    else:
        raise ValueError(f"cannot encode image of shape {img.shape}")
    return magic + f"\n{w} {h}\n255\n".encode() + np.ascontiguousarray(img).tobytes()


def read_pnm(path) -> np.ndarray:
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as e:
        raise SequenceFormatError(f"cannot read {path}: {e}") from None
    try:
        return decode_pnm(data)
    except SequenceFormatError as e:
        raise SequenceFormatError(f"{path}: {e}") from None


def write_pnm(path, img: np.ndarray) -> None:
    with open(path, "wb") as f:
        f.write(encode_pnm(img))


def to_uint8(img: np.ndarray) -> np.ndarray:
    """Float image in [0, 1] to uint8 with round-half-up."""
    return np.floor(np.clip(img, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
