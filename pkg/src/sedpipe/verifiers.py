"""The five event classifiers usable standalone or as the verification stage.

BoW/PBoW quantize 50 ms segment descriptors against a learned codebook and
classify histograms with a chi-square kernel SVM. BoR and HoDW reuse the
boundary-regression detector's components as feature extractors: BoR
summarizes per-class peak boundary confidences, HoDW averages the class
posterior over segments. BoR+HoDW joins both channels through an extended
Gaussian kernel with per-channel mean chi-square bandwidths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import SAMPLE_RATE, AudioSignal, Corpus, CorpusSplit
from .detectors import RegDetector, span_curves, window_grid
from .errors import DataError, SpanTooShortError
from .features import Scaler, span_descriptors
from .learners import Codebook, KernelSpec, SvmModel, kmeans_fit, mean_chi2, svm_train
from .learners import serialize
from .learners.kernels import chi2_gram
from .learners.svm import cv_accuracy_precomputed, stratified_folds

VERIFIER_KINDS = ("bow", "pbow", "bor", "hodw", "bor_hodw")

BOW_SEGMENT = 0.05
CODEBOOK_SIZES = (50, 100, 150, 200, 250)
PYRAMID_LEVELS = (2, 3, 4)


@dataclass
class VerifierConfig:
    codebook_sizes: tuple = CODEBOOK_SIZES
    pyramid_levels: tuple = PYRAMID_LEVELS
    cv_folds: int = 10
    svm_c: float = 1.0
    max_codebook_samples: int | None = None
    seed: int = 0


@dataclass
class Verifier:
    kind: str
    classes: list[str]
    svm: SvmModel
    scaler: Scaler | None = None
    codebook: Codebook | None = None
    levels: int | None = None
    train_maxima: np.ndarray | None = None
    reg: RegDetector | None = None


def _span_samples(signal: AudioSignal, onset: float, offset: float) -> tuple[int, int]:
    a = max(int(round(onset * SAMPLE_RATE)), 0)
    b = min(int(round(offset * SAMPLE_RATE)), len(signal.samples))
    return a, b


def bow_segments(signal: AudioSignal, onset: float, offset: float) -> np.ndarray:
    """Raw 120-dim descriptors of the span's non-overlapping 50 ms segments."""
    a, b = _span_samples(signal, onset, offset)
    seg = int(round(BOW_SEGMENT * SAMPLE_RATE))
    n_seg = (b - a) // seg
    if n_seg < 1:
        raise SpanTooShortError(f"span [{onset:.3f}, {offset:.3f}] shorter than 50 ms")
    starts = a + np.arange(n_seg, dtype=np.int64) * seg
    return span_descriptors(signal, starts, seg)


def _histogram(assignments: np.ndarray, size: int) -> np.ndarray:
    h = np.bincount(assignments, minlength=size).astype(np.float64)
    total = h.sum()
    return h / total if total > 0 else h


def bow_descriptor(
    signal: AudioSignal, onset: float, offset: float, codebook: Codebook, scaler: Scaler
) -> np.ndarray:
    """L1-normalized histogram of nearest-centroid assignments."""
    descs = scaler.apply(bow_segments(signal, onset, offset))
    return _histogram(codebook.assign(descs), codebook.size)


def pbow_descriptor(
    signal: AudioSignal,
    onset: float,
    offset: float,
    codebook: Codebook,
    scaler: Scaler,
    levels: int,
) -> np.ndarray:
    """BoW histograms over temporal pyramid levels 1..levels, concatenated in
    (level, part) order; parts too short for one segment contribute zeros."""
    parts: list[np.ndarray] = []
    for level in range(1, levels + 1):
        edges = np.linspace(onset, offset, level + 1)
        for p in range(level):
            try:
                parts.append(
                    bow_descriptor(signal, float(edges[p]), float(edges[p + 1]), codebook, scaler)
                )
            except SpanTooShortError:
                parts.append(np.zeros(codebook.size))
    return np.concatenate(parts)


def hodw_descriptor(signal: AudioSignal, onset: float, offset: float, reg: RegDetector) -> np.ndarray:
    """Mean class-probability vector of the span's 100 ms / 10 ms segments."""
    a, b = _span_samples(signal, onset, offset)
    starts = a + window_grid(b - a, reg.seg_len, reg.seg_hop)
    if len(starts) == 0:
        raise SpanTooShortError(f"span [{onset:.3f}, {offset:.3f}] shorter than one segment")
    descs = span_descriptors(signal, starts, int(round(reg.seg_len * SAMPLE_RATE)))
    return reg.classifier.predict_proba(descs).mean(axis=0)


def bor_descriptor(
    signal: AudioSignal,
    onset: float,
    offset: float,
    reg: RegDetector,
    train_maxima: np.ndarray | None = None,
) -> np.ndarray:
    """Per class: half the sum of the span-confined onset and offset curve
    maxima; divided by the per-class training maxima when given."""
    curves = span_curves(reg, signal, onset, offset)
    phi = np.array(
        [0.5 * (curves[cls][0].max() + curves[cls][1].max()) for cls in reg.classes]
    )
    if train_maxima is not None:
        phi = phi / train_maxima
    return phi


def _train_events(corpus: Corpus, split: CorpusSplit):
    out = []
    for signal, events in corpus.train(split):
        for ev in events:
            out.append((signal, ev))
    if not out:
        raise DataError("no training events")
    return out


def _descriptor(v: Verifier, signal: AudioSignal, onset: float, offset: float) -> np.ndarray:
    if v.kind == "bow":
        return bow_descriptor(signal, onset, offset, v.codebook, v.scaler)
    if v.kind == "pbow":
        return pbow_descriptor(signal, onset, offset, v.codebook, v.scaler, v.levels)
    if v.kind == "bor":
        return bor_descriptor(signal, onset, offset, v.reg, v.train_maxima)
    if v.kind == "hodw":
        return hodw_descriptor(signal, onset, offset, v.reg)
    if v.kind == "bor_hodw":
        return np.concatenate(
            [
                bor_descriptor(signal, onset, offset, v.reg, v.train_maxima),
                hodw_descriptor(signal, onset, offset, v.reg),
            ]
        )
    raise DataError(f"unknown verifier kind {v.kind!r}")


def _event_part_segments(
    signal: AudioSignal, onset: float, offset: float, max_level: int, scaler: Scaler | None
) -> dict[int, list[np.ndarray | None]]:
    """Per pyramid level, each part's scaled segment descriptors (None when the
    part is shorter than one 50 ms segment). Level 1 part 0 is the whole event."""
    out: dict[int, list[np.ndarray | None]] = {}
    for level in range(1, max_level + 1):
        edges = np.linspace(onset, offset, level + 1)
        parts: list[np.ndarray | None] = []
        for p in range(level):
            try:
                segs = bow_segments(signal, float(edges[p]), float(edges[p + 1]))
            except SpanTooShortError:
                parts.append(None)
                continue
            parts.append(scaler.apply(segs) if scaler is not None else segs)
        out[level] = parts
    return out


def _quantized_descriptor(
    parts_by_level: dict[int, list[np.ndarray | None]], codebook: Codebook, levels: int
) -> np.ndarray:
    chunks = []
    for level in range(1, levels + 1):
        for part in parts_by_level[level]:
            if part is None:
                chunks.append(np.zeros(codebook.size))
            else:
                chunks.append(_histogram(codebook.assign(part), codebook.size))
    return np.concatenate(chunks)


def _train_histogram_verifier(
    kind: str, corpus: Corpus, split: CorpusSplit, config: VerifierConfig
) -> Verifier:
    events = _train_events(corpus, split)
    labels = [ev.label for _, ev in events]
    max_level = 1 if kind == "bow" else max(config.pyramid_levels)

    whole = [bow_segments(sig, ev.onset, ev.offset) for sig, ev in events]
    scaler = Scaler.fit(np.vstack(whole))
    parts = [
        _event_part_segments(sig, ev.onset, ev.offset, max_level, scaler)
        for sig, ev in events
    ]

    pool = np.vstack([p[1][0] for p in parts if p[1][0] is not None])
    if config.max_codebook_samples is not None and len(pool) > config.max_codebook_samples:
        rng = np.random.default_rng(config.seed)
        pool = pool[rng.choice(len(pool), config.max_codebook_samples, replace=False)]

    folds = stratified_folds(labels, config.cv_folds, config.seed)
    best = None  # (accuracy, size, levels, descriptors, codebook)
    for size in config.codebook_sizes:
        if len(pool) < size:
            continue
        codebook = kmeans_fit(pool, size, config.seed)
        level_options = [1] if kind == "bow" else list(config.pyramid_levels)
        for levels in level_options:
            descs = np.vstack(
                [_quantized_descriptor(p, codebook, levels) for p in parts]
            )
            a = mean_chi2(descs)
            acc = cv_accuracy_precomputed(
                chi2_gram(descs, descs, a), labels, config.svm_c, folds
            )
            if best is None or acc > best[0]:
                best = (acc, size, levels, descs, codebook)
    if best is None:
        raise DataError("no feasible codebook size (too few segment descriptors)")
    _, size, levels, descs, codebook = best
    kernel = KernelSpec(kind="chi2", bandwidths=(mean_chi2(descs),))
    svm = svm_train(descs, labels, kernel, config.svm_c)
    return Verifier(
        kind=kind,
        classes=sorted(set(labels)),
        svm=svm,
        scaler=scaler,
        codebook=codebook,
        levels=None if kind == "bow" else levels,
    )


def verifier_train(
    kind: str,
    corpus: Corpus,
    split: CorpusSplit,
    shared: RegDetector | None = None,
    config: VerifierConfig | None = None,
) -> Verifier:
    """Train one of the five verifier kinds on the split's isolated events."""
    config = config or VerifierConfig()
    if kind not in VERIFIER_KINDS:
        raise DataError(f"unknown verifier kind {kind!r}; choose from {VERIFIER_KINDS}")
    if kind in ("bow", "pbow"):
        return _train_histogram_verifier(kind, corpus, split, config)
    if shared is None:
        raise DataError(f"verifier {kind!r} needs the regression detector's components")

    events = _train_events(corpus, split)
    labels = [ev.label for _, ev in events]
    classes = sorted(set(labels))

    train_maxima = None
    if kind in ("bor", "bor_hodw"):
        raw_phi = np.vstack(
            [bor_descriptor(sig, ev.onset, ev.offset, shared) for sig, ev in events]
        )
        train_maxima = raw_phi.max(axis=0)
        train_maxima = np.where(train_maxima > 0, train_maxima, 1.0)
        phi = raw_phi / train_maxima
    if kind in ("hodw", "bor_hodw"):
        hodw = np.vstack(
            [hodw_descriptor(sig, ev.onset, ev.offset, shared) for sig, ev in events]
        )

    if kind == "bor":
        kernel = KernelSpec(kind="chi2", bandwidths=(mean_chi2(phi),))
        svm = svm_train(phi, labels, kernel, config.svm_c)
    elif kind == "hodw":
        kernel = KernelSpec(kind="chi2", bandwidths=(mean_chi2(hodw),))
        svm = svm_train(hodw, labels, kernel, config.svm_c)
    else:
        kernel = KernelSpec(kind="combined", bandwidths=(mean_chi2(phi), mean_chi2(hodw)))
        svm = svm_train([phi, hodw], labels, kernel, config.svm_c)
    return Verifier(
        kind=kind, classes=classes, svm=svm, train_maxima=train_maxima, reg=shared
    )


def verifier_classify(
    v: Verifier, signal: AudioSignal, onset: float, offset: float
) -> tuple[str, np.ndarray]:
    """Deterministic label plus the descriptor it was computed from.

    Raises SpanTooShortError when the span cannot be segmented for this kind.
    """
    desc = _descriptor(v, signal, onset, offset)
    if v.kind == "bor_hodw":
        c = len(v.classes)
        query = [desc[None, :c], desc[None, c:]]
    else:
        query = desc[None, :]
    label = v.svm.predict(query)[0]
    return label, desc


def verifier_accuracy(v: Verifier, sessions) -> float:
    """Classification accuracy over isolated annotated events."""
    correct = 0
    total = 0
    for signal, events in sessions:
        for ev in events:
            total += 1
            try:
                label, _ = verifier_classify(v, signal, ev.onset, ev.offset)
            except SpanTooShortError:
                continue
            correct += int(label == ev.label)
    return correct / total if total else 0.0


serialize.register(
    "verifier",
    Verifier,
    lambda v: {
        "kind": v.kind,
        "classes": v.classes,
        "svm": v.svm,
        "scaler": v.scaler,
        "codebook": v.codebook,
        "levels": v.levels,
        "train_maxima": v.train_maxima,
        "reg": v.reg,
    },
    lambda d: Verifier(**d),
)
