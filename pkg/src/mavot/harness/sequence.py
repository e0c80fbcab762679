"""Image-sequence directories: numbered frames plus ``groundtruth.txt``.

Ground-truth lines hold either ``x,y,w,h`` or an 8-number polygon
``x1,y1,...,x4,y4`` (reduced to its axis-aligned hull). Frames are
``.ppm``/``.pgm`` files, or ``.png``/``.jpg`` when Pillow is installed.
"""
from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass

import numpy as np

from ..errors import SequenceFormatError
from ..geometry import BoundingBox
from .pnm import read_pnm

PNM_EXT = (".ppm", ".pgm", ".pnm")
PIL_EXT = (".png", ".jpg", ".jpeg", ".bmp")


def parse_groundtruth_line(line: str, lineno: int = 0) -> BoundingBox:
    parts = [p for p in re.split(r"[,\s]+", line.strip()) if p]
    try:
        nums = [float(p) for p in parts]
    except ValueError:
        raise SequenceFormatError(f"line {lineno}: non-numeric value in {line.strip()!r}") from None
    if not all(np.isfinite(nums)):
        raise SequenceFormatError(f"line {lineno}: non-finite value")
    if len(nums) == 4:
        return BoundingBox(*nums)
    if len(nums) == 8:
        xs, ys = nums[0::2], nums[1::2]
        return BoundingBox(min(xs), min(ys), max(xs) - min(xs), max(ys) - min(ys))
    raise SequenceFormatError(f"line {lineno}: expected 4 or 8 numbers, got {len(nums)}")


def read_groundtruth(path) -> list[BoundingBox]:
    boxes = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if line.strip():
                boxes.append(parse_groundtruth_line(line, lineno))
    return boxes


def _frame_key(name: str):
    digits = re.findall(r"\d+", name)
    return (int(digits[-1]) if digits else -1, name)


def read_image(path) -> np.ndarray:
    ext = os.path.splitext(path)[1].lower()
    if ext in PNM_EXT:
        return read_pnm(path)
    try:
        from PIL import Image
    except ImportError:
        raise SequenceFormatError(f"{path}: reading {ext} files needs Pillow") from None
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


@dataclass
class SequenceSource:
    """Frames (paths or arrays) with optional ground truth and visibility."""

    name: str
    frames: list
    groundtruth: list | None = None
    visibility: list | None = None

    def __post_init__(self):
        if len(self.frames) < 2:
            raise SequenceFormatError(f"{self.name}: a sequence needs at least 2 frames")
        if self.groundtruth is not None and len(self.groundtruth) != len(self.frames):
            raise SequenceFormatError(
                f"{self.name}: {len(self.frames)} frames but {len(self.groundtruth)} ground-truth boxes")
        if self.visibility is not None and len(self.visibility) != len(self.frames):
            raise SequenceFormatError(f"{self.name}: visibility length does not match frame count")

    def __len__(self):
        return len(self.frames)

    def frame(self, i: int) -> np.ndarray:
        f = self.frames[i]
        if isinstance(f, np.ndarray):
            return f
        return read_image(f)

    def __iter__(self):
        for i in range(len(self)):
            yield self.frame(i)


def load_sequence(directory) -> SequenceSource:
    if not os.path.isdir(directory):
        raise SequenceFormatError(f"not a directory: {directory}")
    names = [n for n in os.listdir(directory)
             if os.path.splitext(n)[1].lower() in PNM_EXT + PIL_EXT]
    if not names:
        raise SequenceFormatError(f"{directory}: no frames found")
    names.sort(key=_frame_key)
    paths = [os.path.join(directory, n) for n in names]
    gt_path = os.path.join(directory, "groundtruth.txt")
    gt = None
    if os.path.exists(gt_path):
        try:
            gt = read_groundtruth(gt_path)
        except SequenceFormatError as e:
            raise SequenceFormatError(f"{gt_path}: {e}") from None
    vis = None
    meta_path = os.path.join(directory, "meta.json")
    if os.path.exists(meta_path):
        with open(meta_path, encoding="utf-8") as f:
            vis = json.load(f).get("visibility")
    name = os.path.basename(os.path.normpath(directory))
    return SequenceSource(name, paths, gt, vis)
