"""Content-addressable external memory.

A :class:`MemoryModule` stores up to ``slot_count`` unit-norm blobs. Writes are
gated by similarity (near-duplicates are skipped), addressed to the least-used
slot, and every write attempt decays and reinforces the per-slot usage weights.
Reads return the exp-similarity weighted sum of the occupied blobs.

Blobs are kept L2-normalised and every incoming vector is normalised once, so
cosine similarity reduces to a dot product. Unoccupied slots never take part
in addressing: they score 0 and carry read weight 0.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ConfigError, ContractError

SNAPSHOT_MAGIC = b"MAVM"
SNAPSHOT_VERSION = 1


@dataclass(frozen=True)
class MemoryConfig:
    slot_count: int = 128
    blob_dim: int = 256
    write_threshold: float = 0.9
    decay: float = 0.99
    init_usage: float = 1.0

    def __post_init__(self):
        if int(self.slot_count) != self.slot_count or self.slot_count < 1:
            raise ConfigError(f"slot_count must be a positive integer, got {self.slot_count}")
        if int(self.blob_dim) != self.blob_dim or self.blob_dim < 1:
            raise ConfigError(f"blob_dim must be a positive integer, got {self.blob_dim}")
        if not 0.0 < self.write_threshold <= 1.0:
            raise ConfigError(f"write_threshold must lie in (0, 1], got {self.write_threshold}")
        if not 0.0 < self.decay < 1.0:
            raise ConfigError(f"decay must lie in (0, 1), got {self.decay}")
        if not self.init_usage > 0.0:
            raise ConfigError(f"init_usage must be positive, got {self.init_usage}")


@dataclass(frozen=True)
class Skipped:
    """Write rejected by similarity protection."""

    max_similarity: float


@dataclass(frozen=True)
class Written:
    slot: int


WriteOutcome = Union[Skipped, Written]


def normalize(v: np.ndarray) -> np.ndarray:
    """L2-normalise along the last axis; zero rows stay exactly zero."""
    v = np.asarray(v, dtype=np.float64)
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    safe = np.where(norm > 0.0, norm, 1.0)
    return np.where(norm > 0.0, v / safe, 0.0)


def update_usage(usage, sim, write_onehot, cfg: MemoryConfig) -> np.ndarray:
    """Usage weights after one write attempt.

    ``(decay * usage + max(sim, 0)) * (1 - w) + w * init_usage``

    ``sim`` is the per-slot similarity of the vector being written. Negative
    similarities are clipped so that usage stays non-negative.
    """
    usage = np.asarray(usage, dtype=np.float64)
    sim = np.asarray(sim, dtype=np.float64)
    w = np.asarray(write_onehot, dtype=np.float64)
    if not (usage.shape == sim.shape == w.shape):
        raise ContractError(f"shape mismatch: usage {usage.shape}, sim {sim.shape}, onehot {w.shape}")
    nonzero = np.count_nonzero(w)
    if nonzero > 1 or (nonzero == 1 and not np.all((w == 0.0) | (w == 1.0))):
        raise ContractError("write weight must be all-zero or one-hot")
    return (cfg.decay * usage + np.maximum(sim, 0.0)) * (1.0 - w) + w * cfg.init_usage


class MemoryModule:
    """Matrix of ``slot_count x blob_dim`` blobs with usage weights.

    Requires exclusive access for :meth:`write` and :meth:`reset`; reads may be
    shared.
    """

    def __init__(self, config: MemoryConfig | None = None):
        self.config = config or MemoryConfig()
        n, d = self.config.slot_count, self.config.blob_dim
        self.blobs = np.zeros((n, d), dtype=np.float64)
        self.usage = np.zeros(n, dtype=np.float64)
        self.occupied = np.zeros(n, dtype=bool)

    def __repr__(self):
        return (f"MemoryModule(slots={self.config.slot_count}, dim={self.config.blob_dim}, "
                f"occupied={self.occupied_count})")

    @property
    def occupied_count(self) -> int:
        return int(self.occupied.sum())

    def _prepare(self, v) -> np.ndarray:
        v = np.asarray(v)
        if v.ndim not in (1, 2) or v.shape[-1] != self.config.blob_dim:
            raise ConfigError(f"expected vectors of length {self.config.blob_dim}, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ContractError("vector contains non-finite values")
        return normalize(v)

    def _similarity(self, v: np.ndarray) -> np.ndarray:
        # v already normalised; works for (D,) and (N, D)
        sim = v @ self.blobs.T
        sim = np.where(self.occupied, sim, 0.0)
        return np.clip(sim, -1.0, 1.0)

    def similarity(self, v) -> np.ndarray:
        """Per-slot cosine similarity; accepts one vector or a batch of rows."""
        return self._similarity(self._prepare(v))

    def max_similarity(self, v):
        sim = self.similarity(v)
        if not self.occupied.any():
            return 0.0 if sim.ndim == 1 else np.zeros(sim.shape[0])
        best = np.max(sim[..., self.occupied], axis=-1)
        return float(best) if sim.ndim == 1 else best

    def lru_slot(self) -> int:
        # np.argmin returns the first minimum: ties go to the lowest index
        return int(np.argmin(self.usage))

    def write(self, v) -> WriteOutcome:
        v = self._prepare(v)
        if v.ndim != 1:
            raise ContractError("write takes a single vector")
        if not v.any():
            raise ContractError("cannot write an all-zero vector")
        cfg = self.config
        sim = self._similarity(v)
        best = float(sim[self.occupied].max()) if self.occupied.any() else 0.0
        w = np.zeros(cfg.slot_count)
        if best >= cfg.write_threshold:
            self.usage = update_usage(self.usage, sim, w, cfg)
            return Skipped(best)
        slot = self.lru_slot()
        w[slot] = 1.0
        # erase, then add the outer product of the write weight and v
        erased = self.blobs * (1.0 - w)[:, None]
        self.blobs = erased + w[:, None] * v[None, :]
        self.occupied[slot] = True
        self.usage = update_usage(self.usage, sim, w, cfg)
        return Written(slot)

    def read_weights(self, v) -> np.ndarray:
        sim = self.similarity(v)
        return np.where(self.occupied, np.exp(sim), 0.0)

    def read(self, v) -> np.ndarray:
        """Readout ``sum_s exp(sim_s) * M[s]`` over occupied slots."""
        return self.read_weights(v) @ self.blobs

    def reset(self):
        self.blobs[:] = 0.0
        self.usage[:] = 0.0
        self.occupied[:] = False

    def copy(self) -> "MemoryModule":
        out = MemoryModule(self.config)
        out.blobs = self.blobs.copy()
        out.usage = self.usage.copy()
        out.occupied = self.occupied.copy()
        return out

    # -- snapshot container ---------------------------------------------

    def to_bytes(self) -> bytes:
        n, d = self.config.slot_count, self.config.blob_dim
        head = SNAPSHOT_MAGIC + struct.pack("<III", SNAPSHOT_VERSION, n, d)
        return b"".join([
            head,
            self.blobs.astype("<f4").tobytes(),
            self.usage.astype("<f4").tobytes(),
            self.occupied.astype(np.uint8).tobytes(),
        ])

    @classmethod
    def from_bytes(cls, data: bytes, config: MemoryConfig | None = None) -> "MemoryModule":
        if data[:4] != SNAPSHOT_MAGIC:
            raise ContractError("not a memory snapshot (bad magic)")
        if len(data) < 16:
            raise ContractError("truncated memory snapshot")
        version, n, d = struct.unpack_from("<III", data, 4)
        if version != SNAPSHOT_VERSION:
            raise ContractError(f"unsupported snapshot version {version}")
        expected = 16 + 4 * n * d + 4 * n + n
        if len(data) != expected:
            raise ContractError(f"snapshot size {len(data)} != expected {expected}")
        if config is None:
            config = MemoryConfig(slot_count=n, blob_dim=d)
        elif (config.slot_count, config.blob_dim) != (n, d):
            raise ConfigError("snapshot dimensions do not match config")
        mem = cls(config)
        off = 16
        mem.blobs = np.frombuffer(data, "<f4", n * d, off).reshape(n, d).astype(np.float64)
        off += 4 * n * d
        mem.usage = np.frombuffer(data, "<f4", n, off).astype(np.float64)
        off += 4 * n
        mem.occupied = np.frombuffer(data, np.uint8, n, off).astype(bool)
        return mem

    def save(self, path):
        with open(path, "wb") as f:
            f.write(self.to_bytes())

    @classmethod
    def load(cls, path, config: MemoryConfig | None = None) -> "MemoryModule":
        with open(path, "rb") as f:
            return cls.from_bytes(f.read(), config)
