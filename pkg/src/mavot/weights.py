"""Reading and writing the ``MAVW`` extractor weight container.

Layout (all integers little-endian)::

    b"MAVW"  u32 version  u32 tensor_count
    per tensor:
        u16 name_len, name (UTF-8), u8 rank, u32 dims[rank],
        f32 data[prod(dims)]  (row-major)

Canonical tensor names are ``conv1_1.kernel``, ``conv1_1.bias``, ... through
``conv3_3.bias`` and ``reduce.kernel``. Kernels are laid out
``kh x kw x c_in x c_out``; the reduction kernel is ``20 x 20 x 256 x 256``.
Pixels are fed in as RGB scaled to [0, 1] with no mean subtraction, so any
imported weights must be exported for that convention.
"""
from __future__ import annotations

import struct
from collections.abc import Mapping

import numpy as np

from .errors import (BadMagicError, MissingTensorError, ShapeMismatchError,
                     TruncatedFileError, WeightFormatError)
from .features import CONV_LAYERS, FEATURE_DIM, GRID_SIDE, REDUCE_KERNEL

MAGIC = b"MAVW"
VERSION = 1


def expected_shapes() -> dict[str, tuple[int, ...]]:
    shapes = {}
    for name, cin, cout in CONV_LAYERS:
        shapes[f"{name}.kernel"] = (3, 3, cin, cout)
        shapes[f"{name}.bias"] = (cout,)
    shapes[REDUCE_KERNEL] = (GRID_SIDE, GRID_SIDE, FEATURE_DIM, FEATURE_DIM)
    return shapes


class ExtractorWeights(Mapping):
    """Immutable, validated set of named float32 tensors."""

    def __init__(self, tensors: Mapping[str, np.ndarray]):
        shapes = expected_shapes()
        for name in tensors:
            if name not in shapes:
                raise WeightFormatError(f"unexpected tensor: {name}")
        for name, shape in shapes.items():
            if name not in tensors:
                raise MissingTensorError(name)
            if tuple(np.shape(tensors[name])) != shape:
                raise ShapeMismatchError(name, shape, np.shape(tensors[name]))
        self._tensors = {}
        for name, t in tensors.items():
            arr = np.array(t, dtype=np.float32)
            if not np.all(np.isfinite(arr)):
                raise WeightFormatError(f"tensor {name} contains non-finite values")
            arr.setflags(write=False)
            self._tensors[name] = arr

    def __getitem__(self, name):
        return self._tensors[name]

    def __iter__(self):
        return iter(self._tensors)

    def __len__(self):
        return len(self._tensors)

    @classmethod
    def random(cls, seed: int = 0) -> "ExtractorWeights":
        """He-initialised weights; useful for tests and throughput checks."""
        rng = np.random.default_rng(seed)
        tensors = {}
        for name, shape in expected_shapes().items():
            if name.endswith(".bias"):
                t = rng.uniform(-0.05, 0.05, shape)
            else:
                fan_in = int(np.prod(shape[:-1]))
                t = rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)
            tensors[name] = t
        return cls(tensors)


def dump_weights(weights: Mapping[str, np.ndarray]) -> bytes:
    parts = [MAGIC, struct.pack("<II", VERSION, len(weights))]
    for name, t in weights.items():
        raw = name.encode("utf-8")
        t = np.asarray(t, dtype="<f4")
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(struct.pack("<B", t.ndim) + struct.pack(f"<{t.ndim}I", *t.shape))
        parts.append(t.tobytes())
    return b"".join(parts)


def parse_weights(data: bytes) -> ExtractorWeights:
    if data[:4] != MAGIC:
        raise BadMagicError(f"bad magic {data[:4]!r}, expected {MAGIC!r}")
    pos = 4

    def take(n):
        nonlocal pos
        if pos + n > len(data):
            raise TruncatedFileError(f"file truncated at byte {pos} (needed {n} more)")
        chunk = data[pos:pos + n]
        pos += n
        return chunk

    version, count = struct.unpack("<II", take(8))
    if version != VERSION:
        raise WeightFormatError(f"unsupported weight file version {version}")
    tensors = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2))
        name = take(name_len).decode("utf-8")
        (rank,) = struct.unpack("<B", take(1))
        dims = struct.unpack(f"<{rank}I", take(4 * rank))
        size = int(np.prod(dims, dtype=np.int64))
        tensors[name] = np.frombuffer(take(4 * size), dtype="<f4").reshape(dims)
    if pos != len(data):
        raise WeightFormatError(f"{len(data) - pos} trailing bytes after last tensor")
    return ExtractorWeights(tensors)


def save_weights(weights: Mapping[str, np.ndarray], path) -> None:
    with open(path, "wb") as f:
        f.write(dump_weights(weights))


def load_weights(path) -> ExtractorWeights:
    with open(path, "rb") as f:
        return parse_weights(f.read())
