"""Recognizer-style detector: per-class GMM-HMMs decoded over the whole signal.

Each class gets a 3-state left-to-right model over 12 MFCCs (20 ms frames,
10 ms hop); a single-state mixture trained on the inter-event audio models
background. Detection is connected Viterbi decoding; background segments
are dropped from the output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..corpus import SAMPLE_RATE, AudioSignal, Corpus, CorpusSplit
from ..errors import DataError
from ..features import ASR_SPEC, FrameSpec, extract_mfcc
from ..learners import HmmModel, connected_decode, hmm_train, path_segments
from ..learners.hmm import LOG_ZERO
from .types import BACKGROUND, Hypothesis


@dataclass
class AsrConfig:
    states: int = 3
    mixtures: int = 128  # full-scale default; synthetic runs use 8
    seed: int = 0


@dataclass
class AsrDetector:
    models: dict[str, HmmModel]
    background: HmmModel
    spec: FrameSpec = ASR_SPEC


def _span_frames(signal: AudioSignal, onset: float, offset: float, spec: FrameSpec):
    a = max(int(round(onset * SAMPLE_RATE)), 0)
    b = min(int(round(offset * SAMPLE_RATE)), len(signal.samples))
    if b - a < spec.frame_samples:
        return None
    return extract_mfcc(AudioSignal(signal.samples[a:b], session_id=""), spec)


def asr_train(
    corpus: Corpus, split: CorpusSplit, config: AsrConfig | None = None
) -> AsrDetector:
    config = config or AsrConfig()
    sessions = corpus.train(split)
    if not sessions:
        raise DataError("no training sessions in split")
    spec = ASR_SPEC

    per_class: dict[str, list[np.ndarray]] = {cls: [] for cls in corpus.classes}
    background_seqs: list[np.ndarray] = []
    for signal, events in sessions:
        for ev in events:
            frames = _span_frames(signal, ev.onset, ev.offset, spec)
            if frames is None or len(frames) < config.states:
                raise DataError(
                    f"event {ev.label!r} at {ev.onset:.2f}s too short for "
                    f"{config.states}-state training"
                )
            per_class[ev.label].append(frames)
        cursor = 0.0
        for ev in events + [None]:
            gap_end = signal.duration if ev is None else ev.onset
            frames = _span_frames(signal, cursor, gap_end, spec)
            if frames is not None and len(frames) >= 1:
                background_seqs.append(frames)
            if ev is not None:
                cursor = ev.offset

    models: dict[str, HmmModel] = {}
    for k, cls in enumerate(sorted(per_class)):
        seqs = per_class[cls]
        if len(seqs) < 2:
            raise DataError(f"class {cls!r} has {len(seqs)} training events, needs >= 2")
        models[cls] = hmm_train(seqs, config.states, config.mixtures, config.seed + k)
    if not background_seqs:
        raise DataError("no background audio between events to train on")
    background = hmm_train(background_seqs, 1, config.mixtures, config.seed - 1)
    return AsrDetector(models=models, background=background, spec=spec)


def asr_detect(det: AsrDetector, signal: AudioSignal) -> list[Hypothesis]:
    """Connected decode; score is the decoded path's per-frame emission
    log-likelihood advantage over background, floored at 0."""
    if len(signal.samples) < det.spec.frame_samples:
        return []
    frames = extract_mfcc(signal, det.spec)
    path, owners, labels, log_b = connected_decode(det.models, det.background, frames)
    bg_cols = np.flatnonzero(owners == labels.index(BACKGROUND))
    bg_ll = log_b[:, bg_cols].max(axis=1)

    hop, frame_len = det.spec.hop, det.spec.frame_len
    n = len(path)
    hyps: list[Hypothesis] = []
    for first, end, lab in path_segments(path, owners, labels, hop, frame_len):
        offset = (end - 1) * hop + frame_len if end == n else end * hop
        span_ll = log_b[np.arange(first, end), path[first:end]]
        span_ll = np.maximum(span_ll, LOG_ZERO)
        score = float(max(np.mean(span_ll - bg_ll[first:end]), 0.0))
        hyps.append(Hypothesis(onset=first * hop, offset=offset, label=lab, score=score))
    return hyps
