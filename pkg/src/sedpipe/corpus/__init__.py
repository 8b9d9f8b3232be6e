"""Audio/annotation ingestion, session splitting, and the synthetic generator."""

from __future__ import annotations

from dataclasses import dataclass

from .annotations import (
    HEADER,
    CorpusSplit,
    EventAnnotation,
    load_annotations,
    save_annotations,
)
from .audio_io import SAMPLE_RATE, AudioSignal, load_audio, resample, write_wav
from .synth import MIN_GAP, PALETTE, SynthConfig, index_split, synth_corpus


@dataclass
class Corpus:
    """Ordered sessions plus the class inventory they were labeled against."""

    sessions: list[tuple[AudioSignal, list[EventAnnotation]]]
    classes: list[str]

    def subset(self, session_ids) -> list[tuple[AudioSignal, list[EventAnnotation]]]:
        wanted = set(session_ids)
        return [(sig, anns) for sig, anns in self.sessions if sig.session_id in wanted]

    def train(self, split: CorpusSplit):
        return self.subset(split.train_sessions)

    def test(self, split: CorpusSplit):
        return self.subset(split.test_sessions)


__all__ = [
    "AudioSignal",
    "Corpus",
    "CorpusSplit",
    "EventAnnotation",
    "HEADER",
    "MIN_GAP",
    "PALETTE",
    "SAMPLE_RATE",
    "SynthConfig",
    "index_split",
    "load_annotations",
    "load_audio",
    "resample",
    "save_annotations",
    "synth_corpus",
    "write_wav",
]
