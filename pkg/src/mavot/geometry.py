"""Boxes, ROI transforms and bilinear crop-resize with edge padding."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box: top-left corner plus size, in image pixels."""

    x: float
    y: float
    w: float
    h: float

    @property
    def center(self) -> tuple[float, float]:
        return self.x + self.w / 2.0, self.y + self.h / 2.0

    @property
    def area(self) -> float:
        return self.w * self.h

    def scaled(self, ratio: float) -> "BoundingBox":
        """Same centre, both sides multiplied by ``ratio``."""
        cx, cy = self.center
        w, h = self.w * ratio, self.h * ratio
        return BoundingBox(cx - w / 2.0, cy - h / 2.0, w, h)

    def with_center(self, cx: float, cy: float) -> "BoundingBox":
        return BoundingBox(cx - self.w / 2.0, cy - self.h / 2.0, self.w, self.h)

    def intersects(self, width: int, height: int) -> bool:
        return self.x < width and self.y < height and self.x + self.w > 0 and self.y + self.h > 0

    def clipped(self, width: int, height: int) -> "BoundingBox":
        x0, y0 = max(self.x, 0.0), max(self.y, 0.0)
        x1, y1 = min(self.x + self.w, float(width)), min(self.y + self.h, float(height))
        return BoundingBox(x0, y0, max(x1 - x0, 0.0), max(y1 - y0, 0.0))

    def format(self) -> str:
        return f"{self.x:.2f},{self.y:.2f},{self.w:.2f},{self.h:.2f}"

    @classmethod
    def parse(cls, text: str) -> "BoundingBox":
        parts = [p for p in text.replace(" ", ",").replace("\t", ",").split(",") if p]
        if len(parts) != 4:
            raise ValueError(f"expected x,y,w,h, got {text!r}")
        x, y, w, h = (float(p) for p in parts)
        if not all(math.isfinite(v) for v in (x, y, w, h)):
            raise ValueError(f"non-finite box {text!r}")
        return cls(x, y, w, h)

    def __iter__(self):
        return iter((self.x, self.y, self.w, self.h))


@dataclass(frozen=True)
class RoiTransform:
    """Maps a source rectangle of the image onto an ``out_w x out_h`` crop."""

    sx: float
    sy: float
    sw: float
    sh: float
    out_w: int
    out_h: int

    @property
    def scale_x(self) -> float:
        return self.out_w / self.sw

    @property
    def scale_y(self) -> float:
        return self.out_h / self.sh

    def to_image(self, u: float, v: float) -> tuple[float, float]:
        return self.sx + u / self.scale_x, self.sy + v / self.scale_y

    def to_roi(self, x: float, y: float) -> tuple[float, float]:
        return (x - self.sx) * self.scale_x, (y - self.sy) * self.scale_y

    def window_to_image(self, u: float, v: float, size_u: float, size_v: float) -> BoundingBox:
        x, y = self.to_image(u, v)
        return BoundingBox(x, y, size_u / self.scale_x, size_v / self.scale_y)


def _axis_taps(start: float, extent: float, n_out: int, n_in: int, replicate: bool):
    # sample positions at output pixel centres
    pos = start + (np.arange(n_out) + 0.5) * (extent / n_out) - 0.5
    i0 = np.floor(pos)
    frac = (pos - i0).astype(np.float32)
    i0 = i0.astype(np.int64)
    i1 = i0 + 1
    if replicate:
        return np.clip(i0, 0, n_in - 1), np.clip(i1, 0, n_in - 1), frac, None
    valid0 = (i0 >= 0) & (i0 < n_in)
    valid1 = (i1 >= 0) & (i1 < n_in)
    return np.clip(i0, 0, n_in - 1), np.clip(i1, 0, n_in - 1), frac, (valid0, valid1)


def crop_resize(image: np.ndarray, rect, out_w: int, out_h: int, padding: str = "replicate") -> np.ndarray:
    """Bilinearly resample ``rect = (sx, sy, sw, sh)`` of ``image`` to ``out_h x out_w``.

    Pixel centres sit at integer coordinates. Samples outside the image take
    the nearest edge pixel (``padding="replicate"``) or zero (``"zero"``).
    With unit scale and an integer offset the result is an exact copy.
    """
    if padding not in ("replicate", "zero"):
        raise ContractError(f"unknown padding mode {padding!r}")
    sx, sy, sw, sh = rect
    if sw <= 0 or sh <= 0:
        raise ContractError(f"degenerate source rectangle {rect}")
    img = np.asarray(image, dtype=np.float32)
    h, w = img.shape[:2]
    replicate = padding == "replicate"
    y0, y1, fy, vy = _axis_taps(sy, sh, out_h, h, replicate)
    x0, x1, fx, vx = _axis_taps(sx, sw, out_w, w, replicate)
    top, bottom = img[y0], img[y1]
    if vy is not None:
        top = top * vy[0][:, None, None]
        bottom = bottom * vy[1][:, None, None]
    fy = fy[:, None, None]
    rows = top + (bottom - top) * fy
    left, right = rows[:, x0], rows[:, x1]
    if vx is not None:
        left = left * vx[0][None, :, None]
        right = right * vx[1][None, :, None]
    out = left + (right - left) * fx[None, :, None]
    return np.clip(out, 0.0, 1.0, out=out)
