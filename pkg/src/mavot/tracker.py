"""Memory-augmented single-object tracker.

Each :meth:`Tracker.step` runs two stages:

1. appearance update -- the previous frame's pixels under the previous box
   are written to the foreground memory, and the background patches around
   that box that look most like the foreground are written to the
   background memory;
2. prediction -- a 2.25x region around the previous box is cropped from the
   current frame, normalised to 360x360, scored window by window against
   both memories, and the best window of the foreground-minus-background
   heatmap is mapped back to image coordinates.

Box size is fixed for the whole run.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InitError, StateError
from .features import PATCH_SIZE, ROI_SIZE, STRIDE, Extractor
from .geometry import BoundingBox, RoiTransform, crop_resize
from .memory import MemoryConfig, MemoryModule

log = logging.getLogger(__name__)

GRID = (ROI_SIZE - PATCH_SIZE) // STRIDE + 1  # 26 candidate windows per side


@dataclass(frozen=True)
class TrackerConfig:
    roi_ratio: float = ROI_SIZE / PATCH_SIZE
    fg_memory: MemoryConfig = field(default_factory=MemoryConfig)
    bg_memory: MemoryConfig = field(default_factory=MemoryConfig)
    mask_sigma: float = 5.0
    bg_zoom: float = 3.0
    bg_top_k: int = 10
    bg_overlap_exclusion: float = 0.5
    padding: str = "replicate"

    def __post_init__(self):
        if not self.roi_ratio > 1.0:
            raise ConfigError(f"roi_ratio must exceed 1, got {self.roi_ratio}")
        if not self.mask_sigma > 0:
            raise ConfigError(f"mask_sigma must be positive, got {self.mask_sigma}")
        if not self.bg_zoom >= 1.0:
            raise ConfigError(f"bg_zoom must be >= 1, got {self.bg_zoom}")
        if self.bg_top_k < 0 or int(self.bg_top_k) != self.bg_top_k:
            raise ConfigError(f"bg_top_k must be a non-negative integer, got {self.bg_top_k}")
        if not 0.0 <= self.bg_overlap_exclusion <= 1.0:
            raise ConfigError(f"bg_overlap_exclusion must lie in [0, 1], got {self.bg_overlap_exclusion}")
        if self.padding not in ("replicate", "zero"):
            raise ConfigError(f"padding must be 'replicate' or 'zero', got {self.padding!r}")


@dataclass
class Heatmap:
    """Foreground score, background score and their difference per window."""

    fg: np.ndarray
    bg: np.ndarray

    @property
    def p(self) -> np.ndarray:
        return self.fg - self.bg

    def argmax(self) -> tuple[int, int]:
        """Row-major first maximum as ``(row, col)``."""
        p = self.p
        return divmod(int(np.argmax(p)), p.shape[1])


def as_frame(frame) -> np.ndarray:
    """Convert a frame to ``H x W x 3`` float32 in [0, 1]."""
    frame = np.asarray(frame)
    if frame.ndim == 2:
        frame = np.repeat(frame[:, :, None], 3, axis=2)
    if frame.ndim != 3 or frame.shape[2] != 3:
        raise ConfigError(f"expected an H x W x 3 frame, got shape {frame.shape}")
    if frame.dtype == np.uint8:
        return frame.astype(np.float32) / np.float32(255.0)
    return frame.astype(np.float32, copy=False)


def memory_cosine(mem: MemoryModule, vectors: np.ndarray) -> np.ndarray:
    """Cosine between each vector and its memory readout; 0 for zero readouts."""
    vectors = np.asarray(vectors, dtype=np.float64)
    if not mem.occupied.any():
        return np.zeros(vectors.shape[:-1])
    flat = vectors.reshape(-1, vectors.shape[-1])
    out = mem.read(flat)
    num = np.einsum("ij,ij->i", flat, out)
    den = np.linalg.norm(flat, axis=1) * np.linalg.norm(out, axis=1)
    cos = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
    return np.clip(cos, -1.0, 1.0).reshape(vectors.shape[:-1])


def make_roi(frame, box: BoundingBox, cfg: TrackerConfig | None = None):
    """Crop ``roi_ratio`` times the box about its centre, resized to 360x360."""
    cfg = cfg or TrackerConfig()
    src = box.scaled(cfg.roi_ratio)
    t = RoiTransform(src.x, src.y, src.w, src.h, ROI_SIZE, ROI_SIZE)
    roi = crop_resize(as_frame(frame), (src.x, src.y, src.w, src.h), ROI_SIZE, ROI_SIZE, cfg.padding)
    return roi, t


def sample_foreground(frame, box: BoundingBox, padding: str = "replicate") -> np.ndarray:
    return crop_resize(as_frame(frame), tuple(box), PATCH_SIZE, PATCH_SIZE, padding)


def _window_overlap(n: int, size: int, lo: int, hi: int) -> np.ndarray:
    """1-d overlap of each stride-8 window ``[8k, 8k+160)`` with ``[lo, hi)``."""
    start = np.arange(n) * STRIDE
    return np.clip(np.minimum(start + PATCH_SIZE, hi) - np.maximum(start, lo), 0, None)


def background_candidates(frame, box: BoundingBox, fg_mem: MemoryModule, extractor: Extractor,
                          cfg: TrackerConfig | None = None) -> np.ndarray:
    """Up to ``bg_top_k`` background features that most resemble the foreground.

    Returns a ``k x 256`` array ordered by descending score. Windows lying
    entirely inside the blanked box region, or overlapping it by more than
    ``bg_overlap_exclusion`` of their area, are never selected.
    """
    cfg = cfg or TrackerConfig()
    size = int(round(PATCH_SIZE * cfg.bg_zoom / STRIDE)) * STRIDE
    src = box.scaled(cfg.bg_zoom)
    crop = crop_resize(as_frame(frame), tuple(src), size, size, cfg.padding)
    lo = (size - PATCH_SIZE) // 2
    hi = lo + PATCH_SIZE
    crop[lo:hi, lo:hi] = extractor.neutral_value
    grid = extractor.extract_grid(crop)
    n = grid.shape[0]
    ov = _window_overlap(n, size, lo, hi)
    frac = (ov[:, None] * ov[None, :]) / float(PATCH_SIZE * PATCH_SIZE)
    keep = (frac <= cfg.bg_overlap_exclusion) & (frac < 1.0)
    vecs = grid.reshape(-1, grid.shape[-1])
    keep = keep.reshape(-1) & np.any(vecs != 0.0, axis=1)
    idx = np.flatnonzero(keep)
    if idx.size == 0 or cfg.bg_top_k == 0:
        return np.zeros((0, grid.shape[-1]), dtype=np.float32)
    scores = memory_cosine(fg_mem, vecs[idx])
    order = np.argsort(-scores, kind="stable")[: cfg.bg_top_k]
    return vecs[idx[order]]


def score_heatmap(grid: np.ndarray, fg_mem: MemoryModule, bg_mem: MemoryModule) -> Heatmap:
    return Heatmap(memory_cosine(fg_mem, grid), memory_cosine(bg_mem, grid))


def predict(heatmap: Heatmap, transform: RoiTransform, prev: BoundingBox) -> BoundingBox:
    """Map the best window back to the image, keeping ``prev``'s size."""
    ky, kx = heatmap.argmax()
    half = PATCH_SIZE / 2.0
    cx, cy = transform.to_image(STRIDE * kx + half, STRIDE * ky + half)
    return prev.with_center(cx, cy)


class Tracker:
    """Single-object tracker driven by :meth:`init` and :meth:`step`.

    One instance must be fed frames sequentially; independent instances may
    run concurrently.
    """

    def __init__(self, extractor: Extractor, config: TrackerConfig | None = None):
        self.extractor = extractor
        self.config = config or TrackerConfig()
        self.fg_memory = MemoryModule(self.config.fg_memory)
        self.bg_memory = MemoryModule(self.config.bg_memory)
        self.last_box: BoundingBox | None = None
        self.frame_index = -1
        self.heatmap: Heatmap | None = None
        self.transform: RoiTransform | None = None
        self._prev_frame = None
        self._init_size = None

    @property
    def initialized(self) -> bool:
        return self.last_box is not None

    def init(self, frame, box: BoundingBox) -> None:
        frame = as_frame(frame)
        if not (box.w >= 1.0 and box.h >= 1.0):
            raise InitError(f"degenerate box {box}")
        height, width = frame.shape[:2]
        if not box.intersects(width, height):
            raise InitError(f"box {box} does not intersect the {width}x{height} frame")
        self.fg_memory.reset()
        self.bg_memory.reset()
        self.heatmap = None
        self.transform = None
        self._memorize(frame, box)
        if self.fg_memory.occupied_count == 0:
            raise InitError(f"box {box} yields an all-zero feature")
        self.last_box = box
        self._init_size = (box.w, box.h)
        self._prev_frame = frame
        self.frame_index = 0

    reinit = init

    def _memorize(self, frame: np.ndarray, box: BoundingBox) -> None:
        fg = self.extractor.extract_patch(sample_foreground(frame, box, self.config.padding))
        if fg.any():
            self.fg_memory.write(fg)
        if self.fg_memory.occupied_count == 0:
            return
        for v in background_candidates(frame, box, self.fg_memory, self.extractor, self.config):
            self.bg_memory.write(v)

    def step(self, frame) -> BoundingBox:
        if not self.initialized:
            raise StateError("step() called before init()")
        frame = as_frame(frame)
        if frame.shape != self._prev_frame.shape:
            raise ConfigError(f"frame shape {frame.shape} differs from {self._prev_frame.shape}")
        self._memorize(self._prev_frame, self.last_box)
        roi, t = make_roi(frame, self.last_box, self.config)
        grid = self.extractor.extract_roi(roi)
        self.heatmap = score_heatmap(grid, self.fg_memory, self.bg_memory)
        self.transform = t
        box = predict(self.heatmap, t, self.last_box)
        self.last_box = box
        self._prev_frame = frame
        self.frame_index += 1
        return box
