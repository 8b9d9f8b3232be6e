"""Hypothesis type, TSV serialization, and shared windowing helpers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..corpus import SAMPLE_RATE, EventAnnotation
from ..errors import AnnotationParseError

BACKGROUND = "__background__"

HYP_HEADER = "onset\toffset\tlabel\tscore"


@dataclass(frozen=True)
class Hypothesis:
    onset: float
    offset: float
    label: str
    score: float = 0.0

    def __post_init__(self):
        if not self.offset > self.onset:
            raise ValueError(f"offset must exceed onset: [{self.onset}, {self.offset}]")
        if self.score < 0:
            raise ValueError(f"score must be >= 0, got {self.score}")

    @property
    def center(self) -> float:
        return 0.5 * (self.onset + self.offset)


def save_hypotheses(path, hyps: list[Hypothesis]) -> None:
    lines = [HYP_HEADER]
    for h in hyps:
        lines.append(f"{h.onset!r}\t{h.offset!r}\t{h.label}\t{h.score!r}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_hypotheses(path) -> list[Hypothesis]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if not lines or lines[0].rstrip("\r") != HYP_HEADER:
        raise AnnotationParseError(f"{path}: expected header {HYP_HEADER!r}")
    out = []
    for lineno, line in enumerate(lines[1:], start=2):
        line = line.rstrip("\r")
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise AnnotationParseError(f"{path}: line {lineno}: expected 4 fields")
        try:
            out.append(
                Hypothesis(
                    onset=float(parts[0]),
                    offset=float(parts[1]),
                    label=parts[2],
                    score=float(parts[3]),
                )
            )
        except ValueError as exc:
            raise AnnotationParseError(f"{path}: line {lineno}: {exc}") from exc
    return out


def window_grid(n_samples: int, window_s: float, shift_s: float) -> np.ndarray:
    """Start samples of every full window at the shift grid (may be empty)."""
    win = int(round(window_s * SAMPLE_RATE))
    shift = int(round(shift_s * SAMPLE_RATE))
    if n_samples < win:
        return np.empty(0, dtype=np.int64)
    n_win = 1 + (n_samples - win) // shift
    return np.arange(n_win, dtype=np.int64) * shift


def stratified_cap(labels, cap: int | None, seed: int) -> np.ndarray:
    """Deterministic index subsample keeping per-label proportions (sorted order)."""
    n = len(labels)
    if cap is None or n <= cap:
        return np.arange(n, dtype=np.int64)
    labels = np.asarray([str(v) for v in labels])
    rng = np.random.default_rng(seed)
    keep: list[int] = []
    classes = sorted(set(labels.tolist()))
    for cls in classes:
        idx = np.flatnonzero(labels == cls)
        take = max(1, int(round(cap * len(idx) / n)))
        rng.shuffle(idx)
        keep.extend(idx[:take].tolist())
    return np.array(sorted(keep), dtype=np.int64)


def label_windows(
    starts: np.ndarray,
    window_s: float,
    events: list[EventAnnotation],
    min_overlap_frac: float = 0.5,
) -> list[str]:
    """Label each window with the event class covering >= min_overlap_frac of
    the window (largest overlap wins), else background."""
    labels = [BACKGROUND] * len(starts)
    if not events:
        return labels
    t0 = starts / SAMPLE_RATE
    t1 = t0 + window_s
    need = min_overlap_frac * window_s
    for w in range(len(starts)):
        best = 0.0
        best_label = BACKGROUND
        for ev in events:
            overlap = min(t1[w], ev.offset) - max(t0[w], ev.onset)
            if overlap > best:
                best = overlap
                best_label = ev.label
        if best >= need:
            labels[w] = best_label
    return labels
