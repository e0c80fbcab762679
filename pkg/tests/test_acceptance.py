"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``criterion N: PASS|FAIL ...`` line (repeated in
the terminal summary) and then asserts the criterion at its stated
tolerance. Criterion 8 is informational and never fails the run.
"""
import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE
from mavot.features import PATCH_SIZE, ROI_SIZE, STRIDE, ConvStackExtractor, SurrogateExtractor
from mavot.geometry import BoundingBox
from mavot.harness.evaluation import iou, replay
from mavot.harness.sequence import SequenceSource
from mavot.harness.synth import make_texture, preset, render
from mavot.memory import MemoryConfig, MemoryModule, Written
from mavot.tracker import GRID, Tracker, TrackerConfig, score_heatmap
from mavot.weights import ExtractorWeights

from oracles import NaiveMemory

INTERIOR = range(1, GRID - 1)  # windows at least one stride from the ROI border


@pytest.fixture
def report(capsys):
    def emit(label, ok, detail):
        line = f"criterion {label}: {'PASS' if ok else 'FAIL'} {detail}"
        ACCEPTANCE.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok
    return emit


def test_1_shape_fidelity(report):
    ex = SurrogateExtractor(seed=0)
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    patch_map = ex.feature_map(rng.random((160, 160, 3)).astype(np.float32))
    roi_map = ex.feature_map(rng.random((360, 360, 3)).astype(np.float32))
    grid = ex.reduce_multi(roi_map)
    seconds = time.perf_counter() - t0
    conv = ConvStackExtractor(ExtractorWeights.random(0))
    conv_map = conv.feature_map(rng.random((160, 160, 3)).astype(np.float32))
    shapes = (patch_map.shape, roi_map.shape, grid.shape, conv_map.shape)
    want = ((20, 20, 256), (45, 45, 256), (26, 26, 256), (20, 20, 256))
    ok = shapes == want and grid.shape[0] * grid.shape[1] == 676 and seconds < 1.0
    report("1", ok, f"shape fidelity: {shapes}, surrogate {seconds:.2f}s (< 1 s)")
    assert ok


def _equivalence(extractor_for, rois, budget):
    """Largest |extract_roi - extract_patch| over interior cells; stops at the first violation."""
    worst, cells, t0 = 0.0, 0, time.perf_counter()
    for k in range(rois):
        rng = np.random.default_rng(100 + k)
        ex = extractor_for(k)
        roi = rng.random((ROI_SIZE, ROI_SIZE, 3)).astype(np.float32)
        grid = ex.extract_roi(roi)
        for ky in INTERIOR:
            for kx in INTERIOR:
                y, x = ky * STRIDE, kx * STRIDE
                v = ex.extract_patch(roi[y:y + PATCH_SIZE, x:x + PATCH_SIZE])
                worst = max(worst, float(np.abs(v - grid[ky, kx]).max()))
                cells += 1
                if worst > budget:
                    return worst, cells, time.perf_counter() - t0
    return worst, cells, time.perf_counter() - t0


def test_2a_single_multi_equivalence_conv_stack(report):
    # Same-padded convolutions see zeros at a cropped window's edge but real
    # neighbours inside the full ROI, so this is expected to stay red.
    weights = {}

    def extractor_for(k):
        if k not in weights:
            weights[k] = ConvStackExtractor(ExtractorWeights.random(k))
        return weights[k]

    worst, cells, seconds = _equivalence(extractor_for, 20, 1e-5)
    ok = worst <= 1e-5 and cells == 20 * len(INTERIOR) ** 2 and seconds < 30
    report("2a", ok, f"conv-stack single/multi equivalence: max diff {worst:.2e} after {cells} cells "
                     f"(need <= 1e-5 on all {20 * len(INTERIOR) ** 2}), {seconds:.1f}s")
    assert ok


def test_2b_single_multi_equivalence_surrogate(report):
    worst, cells, seconds = _equivalence(lambda k: SurrogateExtractor(seed=k), 20, 1e-5)
    ok = worst <= 1e-5 and cells == 20 * len(INTERIOR) ** 2 and seconds < 30
    report("2b", ok, f"surrogate single/multi equivalence: max diff {worst:.2e} over {cells} cells, "
                     f"{seconds:.1f}s (< 30 s)")
    assert ok


def _memory_script(seed, slots=8, dim=16, ops=200):
    rng = np.random.default_rng(seed)
    mem = MemoryModule(MemoryConfig(slot_count=slots, blob_dim=dim))
    ref = NaiveMemory(slots, dim)
    slot_ok, worst = True, 0.0
    for _ in range(ops):
        if rng.random() < 0.6:
            v = rng.standard_normal(dim)
            if rng.random() < 0.3 and mem.occupied.any():
                v = mem.blobs[int(rng.choice(np.flatnonzero(mem.occupied)))] + 0.03 * rng.standard_normal(dim)
            got, want = mem.write(v), ref.write(v)
            slot_ok &= (got.slot if isinstance(got, Written) else None) == want
            worst = max(worst, float(np.abs(mem.usage - np.array(ref.usage)).max()),
                        float(np.abs(mem.blobs - np.array(ref.blobs)).max()))
        else:
            q = rng.standard_normal(dim)
            worst = max(worst, float(np.abs(mem.read(q) - np.array(ref.read(q))).max()))
    return slot_ok, worst


def test_3_memory_oracle(report):
    t0 = time.perf_counter()
    results = [_memory_script(seed) for seed in range(100)]
    seconds = time.perf_counter() - t0
    slots_ok = all(s for s, _ in results)
    worst = max(w for _, w in results)
    ok = slots_ok and worst <= 1e-6 and seconds < 10
    report("3", ok, f"memory oracle: 100 seeds x 200 ops, slot choices "
                    f"{'identical' if slots_ok else 'DIFFER'}, max numeric diff {worst:.1e}, {seconds:.1f}s")
    assert ok


def test_4_write_protection(report):
    rng = np.random.default_rng(4)
    mem = MemoryModule()
    guarded = violations = 0
    for _ in range(10_000):
        v = rng.standard_normal(256)
        if rng.random() < 0.5 and mem.occupied.any():
            s = int(rng.choice(np.flatnonzero(mem.occupied)))
            v = mem.blobs[s] + rng.uniform(0.0, 0.06) * rng.standard_normal(256)
        before = mem.blobs.copy()
        protected = mem.max_similarity(v) >= 0.9
        mem.write(v)
        if protected:
            guarded += 1
            violations += not np.array_equal(before, mem.blobs)
    ok = violations == 0 and guarded > 1000
    report("4", ok, f"write protection: {guarded} protected writes of 10000, {violations} altered a blob")
    assert ok


def test_5_static_lock(report):
    scene = render(preset("static", 0))
    b0 = scene.boxes[0]
    tracker = Tracker(SurrogateExtractor(seed=0))
    tracker.init(scene.frames[0], b0)
    tol = 8 * (TrackerConfig().roi_ratio * b0.w) / ROI_SIZE
    drift = 0.0
    for frame in scene.frames[1:]:
        (cx, cy), (gx, gy) = tracker.step(frame).center, b0.center
        drift = max(drift, abs(cx - gx), abs(cy - gy))
    ok = drift <= tol
    report("5", ok, f"static lock: max centre drift {drift:.2f} px over 49 steps (<= {tol:.2f} px)")
    assert ok


def _occlusion_run(seed):
    scene = render(preset("crossing-occluder", seed))
    tracker = Tracker(SurrogateExtractor(seed=seed))
    tracker.init(scene.frames[0], scene.boxes[0])
    ious = [None] + [iou(tracker.step(f), g) for f, g in zip(scene.frames[1:], scene.boxes[1:])]
    (_, last), = scene.occlusions
    back = last + 1
    visible = [ious[t] for t in range(1, len(ious)) if scene.visibility[t] > 0]
    reacq = next((t - back for t in range(back, len(ious)) if ious[t] >= 0.5), None)
    return float(np.mean(visible)), reacq


def test_6_occlusion_reacquisition(report):
    rows = [(seed,) + _occlusion_run(seed) for seed in range(10)]
    good = [s for s, m, r in rows if m >= 0.5 and r is not None and r <= 10]
    detail = " ".join(f"{s}:{m:.2f}/{'-' if r is None else r}" for s, m, r in rows)
    ok = len(good) >= 8
    report("6", ok, f"occlusion reacquisition: {len(good)}/10 seeds pass (need 8); "
                    f"seed:mean_iou/frames_to_reacquire {detail}")
    assert ok


def test_7_background_subtraction(report):
    ex = SurrogateExtractor(seed=0)
    rng = np.random.default_rng(7)
    hits = 0
    for trial in range(100):
        roi = make_texture("smooth", ROI_SIZE, ROI_SIZE, rng)
        target = make_texture("blobs", 40, 40, rng)
        occluder = make_texture(["stripes", "checker", "blobs"][trial % 3], 40, 40, rng)
        # two distinct, non-overlapping interior cells, object centred in its window
        while True:
            (ty, tx), (oy, ox) = rng.integers(2, GRID - 2, size=(2, 2))
            if max(abs(ty - oy), abs(tx - ox)) >= 6:
                break
        for (ky, kx), tex in (((ty, tx), target), ((oy, ox), occluder)):
            y, x = ky * STRIDE + 60, kx * STRIDE + 60
            roi[y:y + 40, x:x + 40] = tex
        grid = ex.extract_roi(roi)
        fg, bg = MemoryModule(), MemoryModule()
        # the occluder has leaked into foreground memory as well
        fg.write(grid[ty, tx])
        fg.write(grid[oy, ox])
        bg.write(grid[oy, ox])
        hits += score_heatmap(grid, fg, bg).argmax() == (ty, tx)
    ok = hits == 100
    report("7", ok, f"background subtraction: argmax on target in {hits}/100 placements")
    assert ok


def _fps(tracker, scene, steps):
    tracker.init(scene.frames[0], scene.boxes[0])
    t0 = time.perf_counter()
    for f in scene.frames[1:steps + 1]:
        tracker.step(f)
    return steps / (time.perf_counter() - t0)


def test_8_throughput(report):
    scene = render(preset("drift", 0))
    surrogate = _fps(Tracker(SurrogateExtractor(seed=0)), scene, 20)
    conv = _fps(Tracker(ConvStackExtractor(ExtractorWeights.random(0))), scene, 2)
    report("8", surrogate >= 5.0, f"throughput (informational, not gated): surrogate {surrogate:.2f} fps "
                                  f"(target 5), conv stack {conv:.3f} fps, single-threaded CPU")


def test_9_protocol_fixture(report):
    gt = [BoundingBox(10, 10, 20, 20)] * 10
    gt[2] = BoundingBox(85, 10, 20, 20)
    trace = [BoundingBox(0, 0, 1, 1),       # init frame, not scored
             BoundingBox(10, 10, 20, 20),   # 1
             BoundingBox(90, 10, 20, 20),   # clipped to the 100 px frame: 200 / 300
             BoundingBox(40, 40, 20, 20),   # disjoint: failure
             *[BoundingBox(0, 0, 1, 1)] * 5,  # skipped
             BoundingBox(0, 0, 1, 1)]       # re-initialised from ground truth
    frames = [np.zeros((100, 100, 3), np.uint8)] * 10
    r = replay(trace, SequenceSource("hand", frames, gt))
    manual_ious = [None, 1.0, 2 / 3, 0.0] + [None] * 6
    got = (r.failures, r.failure_frames, r.reinit_frames)
    ious_ok = all((a is None and b is None) or (a is not None and b is not None and math.isclose(a, b))
                  for a, b in zip(r.ious, manual_ious))
    ok = got == (1, [3], [9]) and ious_ok and math.isclose(r.mean_iou, (1.0 + 2 / 3) / 2)
    report("9", ok, f"protocol fixture: failures={r.failures} at {r.failure_frames}, reinit at {r.reinit_frames}, "
                    f"mean IoU {r.mean_iou:.4f} (manual 0.8333)")
    assert ok
