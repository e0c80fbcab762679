"""Fast invariant checks that need nothing beyond the package itself."""
from __future__ import annotations

import math
import time

import numpy as np

from ..features import PATCH_SIZE, ROI_SIZE, STRIDE, SurrogateExtractor
from ..geometry import BoundingBox
from ..memory import MemoryConfig, MemoryModule, Written
from ..tracker import make_roi


def _naive_memory_script(seed: int, slots: int = 8, dim: int = 16, ops: int = 200):
    """Compare MemoryModule against plain-Python loops on one random script."""
    rng = np.random.default_rng(seed)
    cfg = MemoryConfig(slot_count=slots, blob_dim=dim)
    mem = MemoryModule(cfg)
    blobs = [[0.0] * dim for _ in range(slots)]
    usage = [0.0] * slots
    occupied = [False] * slots
    for _ in range(ops):
        v = rng.standard_normal(dim)
        if rng.random() < 0.3 and any(occupied):
            # near-duplicate of a stored blob, to exercise protection
            s = int(rng.choice([i for i in range(slots) if occupied[i]]))
            v = np.array(blobs[s]) + 0.01 * rng.standard_normal(dim)
        norm = math.sqrt(sum(x * x for x in v))
        u = [x / norm for x in v]
        sim = [max(-1.0, min(1.0, sum(a * b for a, b in zip(u, blobs[i])))) if occupied[i] else 0.0
               for i in range(slots)]
        best = max((sim[i] for i in range(slots) if occupied[i]), default=0.0)
        slot = None
        if best < cfg.write_threshold:
            slot = min(range(slots), key=lambda i: (usage[i], i))
            blobs[slot] = list(u)
            occupied[slot] = True
        for i in range(slots):
            w = 1.0 if i == slot else 0.0
            usage[i] = (cfg.decay * usage[i] + max(sim[i], 0.0)) * (1 - w) + w * cfg.init_usage
        got = mem.write(v)
        if (got.slot if isinstance(got, Written) else None) != slot:
            return False
        if not np.allclose(mem.usage, usage, rtol=0, atol=1e-9):
            return False
        q = rng.standard_normal(dim)
        qn = q / np.linalg.norm(q)
        ref = np.zeros(dim)
        for i in range(slots):
            if occupied[i]:
                ref += math.exp(max(-1.0, min(1.0, float(np.dot(qn, blobs[i]))))) * np.array(blobs[i])
        if not np.allclose(mem.read(q), ref, rtol=0, atol=1e-9):
            return False
    return True


def check_memory():
    ok = all(_naive_memory_script(s) for s in range(5))
    return "memory matches naive loops", ok


def check_protection():
    rng = np.random.default_rng(1)
    mem = MemoryModule(MemoryConfig(slot_count=16, blob_dim=32))
    for _ in range(2000):
        v = rng.standard_normal(32)
        if rng.random() < 0.5 and mem.occupied.any():
            v = mem.blobs[rng.integers(mem.config.slot_count)] + 0.05 * rng.standard_normal(32)
            if not v.any():
                continue
        before = mem.blobs.copy()
        guarded = mem.max_similarity(v) >= mem.config.write_threshold
        mem.write(v)
        if guarded and not np.array_equal(before, mem.blobs):
            return "write protection", False
    return "write protection", True


def check_equivalence():
    ex = SurrogateExtractor(0)
    rng = np.random.default_rng(2)
    roi = rng.random((ROI_SIZE, ROI_SIZE, 3)).astype(np.float32)
    grid = ex.extract_roi(roi)
    worst = 0.0
    for ky, kx in ((0, 0), (7, 19), (25, 25), (12, 13)):
        y, x = ky * STRIDE, kx * STRIDE
        v = ex.extract_patch(roi[y:y + PATCH_SIZE, x:x + PATCH_SIZE])
        worst = max(worst, float(np.abs(v - grid[ky, kx]).max()))
    return f"single/multi extraction (max diff {worst:.1e})", grid.shape == (26, 26, 256) and worst <= 1e-5


def check_roi_roundtrip():
    frame = np.zeros((240, 320, 3), np.float32)
    box = BoundingBox(37.5, 52.25, 41.0, 63.0)
    _, t = make_roi(frame, box)
    c = (ROI_SIZE - PATCH_SIZE) / 2.0
    back = t.window_to_image(c, c, PATCH_SIZE, PATCH_SIZE)
    err = max(abs(a - b) for a, b in zip(back, box))
    return "ROI round trip", err <= 1e-6


def run_selftest():
    results = []
    for check in (check_memory, check_protection, check_equivalence, check_roi_roundtrip):
        t0 = time.perf_counter()
        name, ok = check()
        results.append((name, bool(ok), f"{time.perf_counter() - t0:.2f}s"))
    return results
