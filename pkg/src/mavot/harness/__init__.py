"""Sequence I/O, synthetic scenes, evaluation and the command line."""
from .evaluation import EvalReport, evaluate, iou, replay, score_trace
from .sequence import SequenceSource, load_sequence
from .synth import MovingRect, SyntheticSceneSpec, preset, render, synth_generate

__all__ = ["EvalReport", "MovingRect", "SequenceSource", "SyntheticSceneSpec", "evaluate", "iou",
           "load_sequence", "preset", "render", "replay", "score_trace", "synth_generate"]
