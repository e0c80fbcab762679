"""Command-line entry point: ``mavot track | eval | synth | selftest``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from ..errors import MavotError
from ..features import SurrogateExtractor
from ..geometry import BoundingBox
from ..tracker import Tracker
from .config import config_keys, load_config
from .evaluation import evaluate
from .pnm import write_pnm
from .sequence import load_sequence
from .synth import PRESETS, SyntheticSceneSpec, preset, synth_generate

log = logging.getLogger("mavot")


def _box(text: str) -> BoundingBox:
    try:
        return BoundingBox.parse(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _add_tracker_options(p):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--weights", metavar="FILE", help="MAVW weight file for the convolution stack")
    src.add_argument("--surrogate", metavar="SEED", type=int,
                     help="use the seeded random surrogate extractor (default: seed 0)")
    p.add_argument("--config", metavar="FILE", help="key=value tracker configuration")
    p.add_argument("--set", metavar="KEY=VALUE", action="append", default=[],
                   help="override one configuration key; may be repeated")


def build_tracker(args) -> Tracker:
    cfg = load_config(args.config, args.set)
    if args.weights:
        from ..features import ConvStackExtractor
        from ..weights import load_weights

        extractor = ConvStackExtractor(load_weights(args.weights), mask_sigma=cfg.mask_sigma)
    else:
        seed = 0 if args.surrogate is None else args.surrogate
        extractor = SurrogateExtractor(seed, mask_sigma=cfg.mask_sigma)
    return Tracker(extractor, cfg)


def write_grid(base: str, grid: np.ndarray) -> None:
    """One 26x26 grid as CSV plus a per-frame min-max scaled 8-bit PGM."""
    np.savetxt(base + ".csv", grid, delimiter=",", fmt="%.6f")
    lo, hi = float(grid.min()), float(grid.max())
    scaled = np.zeros_like(grid) if hi <= lo else (grid - lo) / (hi - lo)
    write_pnm(base + ".pgm", np.floor(scaled * 255.0 + 0.5).astype(np.uint8))


def write_heatmap(directory, index: int, heatmap) -> None:
    # heatmap_* is the difference the tracker maximises; fg_/bg_ are its terms
    for prefix, grid in (("heatmap", heatmap.p), ("fg_heatmap", heatmap.fg), ("bg_heatmap", heatmap.bg)):
        write_grid(os.path.join(directory, f"{prefix}_{index:08d}"), grid)


def cmd_track(args) -> int:
    source = load_sequence(args.frames)
    init = args.init
    if init is None:
        if source.groundtruth is None:
            raise MavotError("no --init box given and the sequence has no groundtruth.txt")
        init = source.groundtruth[0]
    tracker = build_tracker(args)
    for d in (args.dump_heatmaps, args.dump_memory):
        if d:
            os.makedirs(d, exist_ok=True)
    boxes = []
    for i, frame in enumerate(source):
        if i == 0:
            tracker.init(frame, init)
            box = init
        else:
            box = tracker.step(frame)
            if args.dump_heatmaps:
                write_heatmap(args.dump_heatmaps, i, tracker.heatmap)
        boxes.append(box)
        log.debug("frame %d: %s", i, box.format())
    text = "".join(b.format() + "\n" for b in boxes)
    if args.out:
        with open(args.out, "w", newline="\n") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    if args.dump_memory:
        tracker.fg_memory.save(os.path.join(args.dump_memory, "fg_memory.mavm"))
        tracker.bg_memory.save(os.path.join(args.dump_memory, "bg_memory.mavm"))
    return 0


def cmd_eval(args) -> int:
    source = load_sequence(args.frames)
    report = evaluate(build_tracker(args), source, skip=args.skip)
    text = report.to_text()
    sys.stdout.write(text)
    if args.report:
        with open(args.report, "w", newline="\n") as f:
            f.write(text)
    return 0


def cmd_synth(args) -> int:
    if args.spec:
        with open(args.spec, encoding="utf-8") as f:
            spec = SyntheticSceneSpec.from_dict(json.load(f))
    else:
        spec = preset(args.preset, args.seed)
    source = synth_generate(spec, args.out_dir)
    print(f"wrote {len(source)} frames to {args.out_dir}")
    return 0


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    ok = True
    for name, passed, detail in run_selftest():
        print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
        ok &= passed
    return 0 if ok else 1


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mavot", description="Memory-augmented single-object tracker")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("track", help="track through a frame directory and write a box trace")
    p.add_argument("frames", help="directory of numbered frames")
    p.add_argument("--init", type=_box, metavar="X,Y,W,H",
                   help="initial box (default: first ground-truth line)")
    p.add_argument("--out", metavar="FILE", help="trace file (default: stdout)")
    p.add_argument("--dump-heatmaps", metavar="DIR", help="write per-frame heatmaps as CSV and PGM")
    p.add_argument("--dump-memory", metavar="DIR", help="write final memory snapshots")
    _add_tracker_options(p)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("eval", help="score a sequence with the failure/reinit protocol")
    p.add_argument("frames", help="directory of numbered frames with groundtruth.txt")
    p.add_argument("--skip", type=int, default=5, help="frames skipped after a failure (default 5)")
    p.add_argument("--report", metavar="FILE", help="also write the key=value report here")
    _add_tracker_options(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="render a synthetic sequence")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--preset", choices=PRESETS)
    g.add_argument("--spec", metavar="FILE", help="scene description as JSON")
    p.add_argument("--seed", type=int, default=0, help="texture seed for presets")
    p.add_argument("out_dir")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("selftest", help="run quick invariant checks")
    p.set_defaults(func=cmd_selftest)

    sub.add_parser("config-keys", help="list configuration keys").set_defaults(
        func=lambda a: print("\n".join(config_keys())) or 0)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (MavotError, OSError, ValueError) as e:
        print(f"mavot: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
