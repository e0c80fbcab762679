"""Accuracy/robustness scoring with the failure-and-reinitialise protocol.

A frame fails when the prediction's IoU with ground truth drops to zero.
The next ``skip`` frames are then ignored and the tracker is re-initialised
from ground truth on the frame after that. Initialisation frames, failed
frames and skipped frames are left out of the mean IoU.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from ..geometry import BoundingBox
from .synth import occlusion_intervals

INIT, TRACK, FAIL, SKIP = "init", "track", "fail", "skip"


def iou(a: BoundingBox, b: BoundingBox, bounds: tuple[int, int] | None = None) -> float:
    """Intersection over union; with ``bounds=(width, height)`` both boxes are clipped first."""
    if bounds is not None:
        a, b = a.clipped(*bounds), b.clipped(*bounds)
    ix = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    iy = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    inter = max(ix, 0.0) * max(iy, 0.0)
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return min(max(inter / union, 0.0), 1.0)


@dataclass
class EvalReport:
    name: str
    ious: list  # per frame; None where the frame is not scored
    states: list
    failures: int
    failure_frames: list
    reinit_frames: list
    reacquire_frames: list = field(default_factory=list)  # per occlusion event; None = never
    fps: float = 0.0

    @property
    def mean_iou(self) -> float:
        scored = [v for v, s in zip(self.ious, self.states) if s == TRACK]
        return float(np.mean(scored)) if scored else 0.0

    def to_text(self) -> str:
        def ints(xs):
            return ",".join("none" if x is None else str(x) for x in xs)

        lines = [
            f"sequence={self.name}",
            f"frames={len(self.ious)}",
            f"mean_iou={self.mean_iou:.4f}",
            f"failures={self.failures}",
            f"failure_frames={ints(self.failure_frames)}",
            f"reinit_frames={ints(self.reinit_frames)}",
            f"fps={self.fps:.2f}",
            f"reacquire_frames={ints(self.reacquire_frames)}",
        ]
        return "\n".join(lines) + "\n"


def reacquisition(ious, visibility, threshold: float = 0.5) -> list:
    """Frames from each reappearance until IoU first reaches ``threshold``."""
    out = []
    for _, last in occlusion_intervals(visibility):
        back = last + 1
        hit = next((t - back for t in range(back, len(ious))
                    if ious[t] is not None and ious[t] >= threshold), None)
        if back < len(ious):
            out.append(hit)
    return out


def run_protocol(init_fn, step_fn, source, skip: int = 5, bounds=None):
    """Drive ``init_fn(t, frame, box)`` / ``step_fn(t, frame) -> box`` through the protocol.

    Returns ``(ious, states, failure_frames, reinit_frames, steps, seconds)``.
    Frames are only decoded when they are actually used.
    """
    gt = source.groundtruth
    if gt is None:
        raise ConfigError(f"sequence {source.name!r} has no ground truth to evaluate against")
    if skip < 0:
        raise ConfigError(f"skip must be non-negative, got {skip}")
    n = len(source)
    ious, states = [None] * n, [SKIP] * n
    failures, reinits = [], []
    steps, seconds = 0, 0.0
    t = 0
    start_at = 0
    while t < n:
        frame = source.frame(t)
        if bounds is None:
            bounds = (frame.shape[1], frame.shape[0])
        if t == start_at:
            init_fn(t, frame, gt[t])
            states[t] = INIT
            if t > 0:
                reinits.append(t)
            t += 1
            continue
        t0 = time.perf_counter()
        box = step_fn(t, frame)
        seconds += time.perf_counter() - t0
        steps += 1
        v = iou(box, gt[t], bounds)
        ious[t] = v
        if v == 0.0:
            states[t] = FAIL
            failures.append(t)
            start_at = t + skip + 1
            t = start_at
        else:
            states[t] = TRACK
            t += 1
    return ious, states, failures, reinits, steps, seconds


def evaluate(tracker, source, skip: int = 5) -> EvalReport:
    """Run ``tracker`` (anything with ``init(frame, box)`` and ``step(frame)``) on ``source``."""
    ious, states, failures, reinits, steps, seconds = run_protocol(
        lambda t, frame, box: tracker.init(frame, box),
        lambda t, frame: tracker.step(frame),
        source, skip)
    fps = steps / seconds if seconds > 0 else 0.0
    reacq = reacquisition(ious, source.visibility) if source.visibility else []
    return EvalReport(source.name, ious, states, len(failures), failures, reinits, reacq, fps)


def replay(trace, source, skip: int = 5) -> EvalReport:
    """Score a recorded per-frame box trace under the protocol."""
    if len(trace) != len(source):
        raise ConfigError(f"trace has {len(trace)} boxes for {len(source)} frames")
    ious, states, failures, reinits, _, _ = run_protocol(
        lambda t, frame, box: None, lambda t, frame: trace[t], source, skip)
    reacq = reacquisition(ious, source.visibility) if source.visibility else []
    return EvalReport(source.name, ious, states, len(failures), failures, reinits, reacq)


def score_trace(trace, groundtruth, bounds=None) -> list[float]:
    """Plain per-frame IoU with no protocol, frame 0 included."""
    if len(trace) != len(groundtruth):
        raise ConfigError(f"trace has {len(trace)} boxes for {len(groundtruth)} frames")
    return [iou(a, b, bounds) for a, b in zip(trace, groundtruth)]
