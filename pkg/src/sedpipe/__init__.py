"""Sound event detection with a classifier-based verification stage.

Three detector schemes propose event hypotheses on continuous audio; a
trained event classifier re-classifies each hypothesis span and rejects
label mismatches. Includes a seeded synthetic corpus generator and a
precision/recall/F1 evaluation harness.
"""

from .corpus import (
    AudioSignal,
    Corpus,
    CorpusSplit,
    EventAnnotation,
    SynthConfig,
    index_split,
    load_annotations,
    load_audio,
    synth_corpus,
)
from .detectors import Hypothesis
from .evaluation import DetectionReport, evaluate_events, match_events, prf, verify
from .verifiers import verifier_classify, verifier_train

__version__ = "0.1.0"

__all__ = [
    "AudioSignal",
    "Corpus",
    "CorpusSplit",
    "DetectionReport",
    "EventAnnotation",
    "Hypothesis",
    "SynthConfig",
    "evaluate_events",
    "index_split",
    "load_annotations",
    "load_audio",
    "match_events",
    "prf",
    "synth_corpus",
    "verifier_classify",
    "verifier_train",
    "verify",
]
