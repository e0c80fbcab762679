"""Deterministic synthetic tracking scenes.

A scene is a textured background, one textured sprite (the target) and any
number of opaque textured occluders drawn on top of it. Every object follows
a piecewise-linear path of keyframes; positions are rounded to whole pixels
so ground truth and occlusion intervals follow from integer arithmetic.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import SpecError
from ..geometry import BoundingBox, crop_resize
from .pnm import to_uint8, write_pnm

TEXTURES = ("smooth", "blobs", "stripes", "checker")


@dataclass(frozen=True)
class MovingRect:
    """A textured rectangle following ``keyframes`` of ``(frame, x, y)``."""

    width: int
    height: int
    keyframes: tuple
    texture: str = "blobs"
    texture_seed: int = 0
    opacity: float = 1.0

    def position(self, t: int) -> tuple[int, int]:
        keys = sorted(self.keyframes)
        if t <= keys[0][0]:
            _, x, y = keys[0]
        elif t >= keys[-1][0]:
            _, x, y = keys[-1]
        else:
            for (f0, x0, y0), (f1, x1, y1) in zip(keys, keys[1:]):
                if f0 <= t <= f1:
                    a = (t - f0) / (f1 - f0)
                    x, y = x0 + a * (x1 - x0), y0 + a * (y1 - y0)
                    break
        return math.floor(x + 0.5), math.floor(y + 0.5)

    def box(self, t: int) -> BoundingBox:
        x, y = self.position(t)
        return BoundingBox(float(x), float(y), float(self.width), float(self.height))


@dataclass(frozen=True)
class SyntheticSceneSpec:
    width: int
    height: int
    frames: int
    sprite: MovingRect
    occluders: tuple = ()
    background_seed: int = 0
    seed: int = 0
    name: str = "synthetic"

    def validate(self):
        if self.frames < 2:
            raise SpecError("a scene needs at least 2 frames")
        if self.width < 16 or self.height < 16:
            raise SpecError("canvas too small")
        for r in (self.sprite,) + tuple(self.occluders):
            if r.width < 1 or r.height < 1:
                raise SpecError(f"degenerate rectangle {r.width}x{r.height}")
            if r.texture not in TEXTURES:
                raise SpecError(f"unknown texture {r.texture!r}; choose from {TEXTURES}")
            if not 0.0 < r.opacity <= 1.0:
                raise SpecError(f"opacity must lie in (0, 1], got {r.opacity}")
            if not r.keyframes:
                raise SpecError("a path needs at least one keyframe")
        for t in range(self.frames):
            x, y = self.sprite.position(t)
            if x < 1 or y < 1 or x + self.sprite.width > self.width - 1 or y + self.sprite.height > self.height - 1:
                raise SpecError(f"sprite leaves the canvas at frame {t} (position {x},{y})")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSceneSpec":
        d = dict(d)
        try:
            d["sprite"] = _rect_from_dict(d["sprite"])
            d["occluders"] = tuple(_rect_from_dict(o) for o in d.get("occluders", ()))
            return cls(**d)
        except (KeyError, TypeError) as e:
            raise SpecError(f"bad scene spec: {e}") from None


def _rect_from_dict(d: dict) -> MovingRect:
    d = dict(d)
    d["keyframes"] = tuple(tuple(k) for k in d["keyframes"])
    return MovingRect(**d)


@dataclass
class RenderedScene:
    frames: list
    boxes: list
    visibility: list
    occlusions: list = field(default_factory=list)


def _upsampled_noise(rng, w, h, cell, channels=3):
    gw, gh = max(2, math.ceil(w / cell) + 1), max(2, math.ceil(h / cell) + 1)
    grid = rng.random((gh, gw, channels)).astype(np.float32)
    return crop_resize(grid, (0.0, 0.0, (w / cell), (h / cell)), w, h)


def make_texture(kind: str, w: int, h: int, rng: np.random.Generator) -> np.ndarray:
    if kind == "smooth":
        base = rng.uniform(0.25, 0.6, 3)
        img = np.zeros((h, w, 3), np.float32) + base.astype(np.float32)
        for cell, amp in ((48, 0.35), (16, 0.2), (6, 0.08)):
            img += amp * (_upsampled_noise(rng, w, h, cell) - 0.5)
    elif kind == "blobs":
        palette = rng.random((3, 3)).astype(np.float32)
        palette[0] = rng.permutation(np.array([0.95, 0.15, rng.uniform(0.2, 0.9)], np.float32))
        field_ = _upsampled_noise(rng, w, h, max(4.0, min(w, h) / 4.0), channels=2)
        a = np.clip((field_[..., :1] - 0.35) * 3.0, 0, 1)
        b = np.clip((field_[..., 1:] - 0.5) * 3.0, 0, 1)
        img = palette[0] * (1 - a) + palette[1] * a
        img = img * (1 - b) + palette[2] * b
    elif kind == "stripes":
        c0, c1 = rng.random(3).astype(np.float32), rng.random(3).astype(np.float32)
        angle = rng.uniform(0, np.pi)
        period = rng.uniform(6.0, 14.0)
        yy, xx = np.mgrid[0:h, 0:w].astype(np.float32)
        s = 0.5 + 0.5 * np.sin(2 * np.pi * (xx * np.cos(angle) + yy * np.sin(angle)) / period)
        img = c0 * (1 - s[..., None]) + c1 * s[..., None]
        img += 0.1 * (_upsampled_noise(rng, w, h, 4) - 0.5)
    elif kind == "checker":
        c0, c1 = rng.random(3).astype(np.float32), rng.random(3).astype(np.float32)
        size = int(rng.integers(5, 11))
        yy, xx = np.mgrid[0:h, 0:w]
        s = ((xx // size + yy // size) % 2).astype(np.float32)[..., None]
        img = c0 * (1 - s) + c1 * s
    else:
        raise SpecError(f"unknown texture {kind!r}")
    return np.clip(img, 0.0, 1.0).astype(np.float32)


def _paste(canvas, tex, x, y, opacity):
    h, w = tex.shape[:2]
    H, W = canvas.shape[:2]
    x0, y0, x1, y1 = max(x, 0), max(y, 0), min(x + w, W), min(y + h, H)
    if x0 >= x1 or y0 >= y1:
        return
    src = tex[y0 - y:y1 - y, x0 - x:x1 - x]
    dst = canvas[y0:y1, x0:x1]
    canvas[y0:y1, x0:x1] = dst * (1.0 - opacity) + src * opacity


def _covered_fraction(sprite_box: BoundingBox, occluder_boxes) -> float:
    x0, y0 = int(sprite_box.x), int(sprite_box.y)
    w, h = int(sprite_box.w), int(sprite_box.h)
    covered = np.zeros((h, w), bool)
    for b in occluder_boxes:
        ox0, oy0 = max(int(b.x) - x0, 0), max(int(b.y) - y0, 0)
        ox1, oy1 = min(int(b.x + b.w) - x0, w), min(int(b.y + b.h) - y0, h)
        if ox0 < ox1 and oy0 < oy1:
            covered[oy0:oy1, ox0:ox1] = True
    return float(covered.mean())


def occlusion_intervals(visibility) -> list[tuple[int, int]]:
    """Maximal ``(first, last)`` frame runs where the sprite is fully hidden."""
    runs, start = [], None
    for t, v in enumerate(visibility):
        if v <= 0.0 and start is None:
            start = t
        elif v > 0.0 and start is not None:
            runs.append((start, t - 1))
            start = None
    if start is not None:
        runs.append((start, len(visibility) - 1))
    return runs


def render(spec: SyntheticSceneSpec) -> RenderedScene:
    spec.validate()
    rng = lambda s: np.random.default_rng([spec.seed, s])  # noqa: E731
    bg = make_texture("smooth", spec.width, spec.height, rng(spec.background_seed))
    sprite_tex = make_texture(spec.sprite.texture, spec.sprite.width, spec.sprite.height,
                              rng(spec.sprite.texture_seed))
    occ_tex = [make_texture(o.texture, o.width, o.height, rng(o.texture_seed)) for o in spec.occluders]
    frames, boxes, vis = [], [], []
    for t in range(spec.frames):
        canvas = bg.copy()
        sb = spec.sprite.box(t)
        _paste(canvas, sprite_tex, int(sb.x), int(sb.y), spec.sprite.opacity)
        obs = []
        for o, tex in zip(spec.occluders, occ_tex):
            ob = o.box(t)
            _paste(canvas, tex, int(ob.x), int(ob.y), o.opacity)
            if o.opacity >= 1.0:
                obs.append(ob)
        frames.append(to_uint8(canvas))
        boxes.append(sb)
        vis.append(1.0 - _covered_fraction(sb, obs))
    return RenderedScene(frames, boxes, vis, occlusion_intervals(vis))


# -- presets ------------------------------------------------------------


def preset(name: str, seed: int = 0) -> SyntheticSceneSpec:
    """Built-in scenes. ``seed`` varies textures only, never paths."""
    if name == "crossing-occluder":
        # sprite drifts right 1 px per 2 frames. The occluder sweeps in from
        # the right at 55 px per frame, parks over the sprite for frames
        # 40..55 and sweeps out to the left at the same speed. A slow sweep
        # would drag the box further than the ROI can search, so this scene
        # exercises reacquisition rather than the search radius.
        sprite = MovingRect(40, 40, ((0, 120.0, 100.0), (120, 180.0, 100.0)), "blobs", 1)
        park = (90.0, 40.0)
        occluder = MovingRect(140, 160, ((0, park[0] + 40 * 55.0, park[1]), (40,) + park, (55,) + park,
                                         (120, park[0] - 65 * 55.0, park[1])), "stripes", 2)
        return SyntheticSceneSpec(320, 240, 120, sprite, (occluder,), background_seed=3, seed=seed,
                                  name="crossing-occluder")
    if name == "static":
        sprite = MovingRect(40, 40, ((0, 140.0, 100.0),), "blobs", 1)
        return SyntheticSceneSpec(320, 240, 50, sprite, (), background_seed=3, seed=seed, name="static")
    if name == "drift":
        sprite = MovingRect(40, 40, ((0, 60.0, 60.0), (60, 200.0, 140.0)), "blobs", 1)
        return SyntheticSceneSpec(320, 240, 60, sprite, (), background_seed=3, seed=seed, name="drift")
    raise SpecError(f"unknown preset {name!r}; choose from {PRESETS}")


PRESETS = ("crossing-occluder", "static", "drift")


def synth_generate(spec: SyntheticSceneSpec, out_dir):
    """Render ``spec`` into ``out_dir`` and return it as a sequence source.

    Writes ``00000001.ppm`` ..., ``groundtruth.txt`` and ``meta.json`` (the
    spec, per-frame sprite visibility and the fully occluded intervals).
    """
    from .sequence import SequenceSource

    scene = render(spec)
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for i, frame in enumerate(scene.frames):
        p = os.path.join(out_dir, f"{i + 1:08d}.ppm")
        write_pnm(p, frame)
        paths.append(p)
    with open(os.path.join(out_dir, "groundtruth.txt"), "w", newline="\n") as f:
        for b in scene.boxes:
            f.write(b.format() + "\n")
    meta = {"spec": spec.to_dict(), "visibility": scene.visibility,
            "occlusions": [list(r) for r in scene.occlusions]}
    with open(os.path.join(out_dir, "meta.json"), "w") as f:
        json.dump(meta, f, indent=1)
    return SequenceSource(spec.name, paths, list(scene.boxes), list(scene.visibility))
