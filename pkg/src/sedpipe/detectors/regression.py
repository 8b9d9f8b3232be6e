"""Boundary-regression detector.

100 ms segments at a 10 ms hop are classified event/background (M_bg) and by
class (M_ev); per-class regression forests predict each event segment's
distances to the event onset and offset. Segments cast confidence votes at
their predicted boundary positions, weighted by the M_ev class probability;
smoothed per-class onset/offset curves are thresholded and peak-paired into
hypotheses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..corpus import SAMPLE_RATE, AudioSignal, Corpus, CorpusSplit, EventAnnotation
from ..errors import DataError, SpanTooShortError
from ..features import span_descriptors
from ..learners import ForestCls, ForestReg, rf_train_cls, rf_train_reg
from .types import BACKGROUND, Hypothesis, label_windows, stratified_cap, window_grid

EVENT = "__event__"

THRESHOLD_FRACTIONS = tuple(0.1 * k for k in range(1, 10))
SMOOTH_KERNEL = np.array([1.0, 2.0, 3.0, 2.0, 1.0]) / 9.0


@dataclass
class RegConfig:
    seg_len: float = 0.1
    seg_hop: float = 0.01
    trees: int = 200  # M_bg / M_ev ensemble size
    reg_trees: int | None = None  # F^c ensemble size (defaults to `trees`)
    cv_folds: int = 5
    cv_trees: int | None = None  # smaller ensembles for the threshold search
    max_cls_segments: int | None = None
    max_reg_segments: int | None = None
    seed: int = 0


@dataclass
class RegDetector:
    gate: ForestCls  # event/background
    classifier: ForestCls  # event classes
    forests: dict[str, ForestReg]
    thresholds: dict[str, float]
    classes: list[str]
    seg_len: float = 0.1
    seg_hop: float = 0.01


def _segment_table(signal: AudioSignal, events: list[EventAnnotation], config: RegConfig):
    """Per-session descriptors, window labels, and center times."""
    starts = window_grid(len(signal.samples), config.seg_len, config.seg_hop)
    if len(starts) == 0:
        return None
    descs = span_descriptors(signal, starts, int(round(config.seg_len * SAMPLE_RATE)))
    labels = label_windows(starts, config.seg_len, events)
    centers = starts / SAMPLE_RATE + config.seg_len / 2.0
    return descs, labels, centers


def _regression_rows(
    centers: np.ndarray,
    descs: np.ndarray,
    events: list[EventAnnotation],
    seg_len: float,
) -> dict[str, tuple[list[np.ndarray], list[tuple[float, float]]]]:
    """Per class: descriptors of segments lying fully inside an event, with
    (center - onset, offset - center) targets."""
    rows: dict[str, tuple[list, list]] = {}
    half = seg_len / 2.0
    for ev in events:
        inside = np.flatnonzero(
            (centers - half >= ev.onset - 1e-9) & (centers + half <= ev.offset + 1e-9)
        )
        if len(inside) == 0:
            continue
        xs, ts = rows.setdefault(ev.label, ([], []))
        for i in inside:
            xs.append(descs[i])
            ts.append((centers[i] - ev.onset, ev.offset - centers[i]))
    return rows


def _train_models(tables, classes, config: RegConfig, trees: int, reg_trees: int | None = None):
    """Fit M_bg, M_ev, and the per-class regression forests from session tables."""
    reg_trees = reg_trees or trees
    descs = np.vstack([t[0] for t in tables])
    labels = [lab for t in tables for lab in t[1]]

    keep = stratified_cap(labels, config.max_cls_segments, config.seed)
    X = descs[keep]
    kept_labels = [labels[i] for i in keep]
    binary = [BACKGROUND if lab == BACKGROUND else EVENT for lab in kept_labels]
    gate = rf_train_cls(X, binary, n_trees=trees, seed=config.seed)
    ev_mask = np.array([lab != BACKGROUND for lab in kept_labels])
    if not ev_mask.any():
        raise DataError("no event-labeled segments to train the class model")
    classifier = rf_train_cls(
        X[ev_mask],
        [lab for lab in kept_labels if lab != BACKGROUND],
        n_trees=trees,
        seed=config.seed + 1,
    )

    forests: dict[str, ForestReg] = {}
    for k, cls in enumerate(classes):
        xs: list[np.ndarray] = []
        ts: list[tuple[float, float]] = []
        for t in tables:
            cls_rows = t[3].get(cls)
            if cls_rows:
                xs.extend(cls_rows[0])
                ts.extend(cls_rows[1])
        if not xs:
            raise DataError(f"class {cls!r} has no in-event training segments")
        keep_r = stratified_cap([cls] * len(xs), config.max_reg_segments, config.seed + k)
        forests[cls] = rf_train_reg(
            np.asarray(xs)[keep_r],
            np.asarray(ts)[keep_r],
            n_trees=reg_trees,
            seed=config.seed + 2 + k,
        )
    return gate, classifier, forests


def accumulate_votes(
    gate: ForestCls,
    classifier: ForestCls,
    forests: dict[str, ForestReg],
    descs: np.ndarray,
    centers: np.ndarray,
    t_lo: float,
    t_hi: float,
    seg_hop: float,
) -> tuple[dict[str, tuple[np.ndarray, np.ndarray]], np.ndarray]:
    """Raw per-class (onset, offset) vote curves on the hop grid.

    Only segments M_bg calls event vote; each votes into its M_ev argmax
    class with that class's probability as weight. Votes land at
    center - d_onset and center + d_offset, clipped into [t_lo, t_hi], so
    each curve's total mass equals the sum of its class's vote weights.
    """
    n_bins = int(np.floor((t_hi - t_lo) / seg_hop)) + 1
    grid = t_lo + np.arange(n_bins) * seg_hop
    curves = {cls: (np.zeros(n_bins), np.zeros(n_bins)) for cls in classifier.classes}
    is_event = np.asarray(gate.predict(descs)) == EVENT
    idx = np.flatnonzero(is_event)
    if len(idx):
        proba = classifier.predict_proba(descs[idx])
        assigned = np.argmax(proba, axis=1)
        weights = proba[np.arange(len(idx)), assigned]
        for cls_i, cls in enumerate(classifier.classes):
            members = np.flatnonzero(assigned == cls_i)
            if len(members) == 0:
                continue
            rows = idx[members]
            dists = forests[cls].predict(descs[rows])
            on_t = centers[rows] - dists[:, 0]
            off_t = centers[rows] + dists[:, 1]
            on_bin = np.clip(np.round((on_t - t_lo) / seg_hop).astype(int), 0, n_bins - 1)
            off_bin = np.clip(np.round((off_t - t_lo) / seg_hop).astype(int), 0, n_bins - 1)
            np.add.at(curves[cls][0], on_bin, weights[members])
            np.add.at(curves[cls][1], off_bin, weights[members])
    return curves, grid


def _curves(
    gate: ForestCls,
    classifier: ForestCls,
    forests: dict[str, ForestReg],
    descs: np.ndarray,
    centers: np.ndarray,
    t_lo: float,
    t_hi: float,
    seg_hop: float,
) -> tuple[dict[str, tuple[np.ndarray, np.ndarray]], np.ndarray]:
    """Triangular-smoothed vote curves."""
    raw, grid = accumulate_votes(gate, classifier, forests, descs, centers, t_lo, t_hi, seg_hop)
    smoothed = {
        cls: (
            np.convolve(on, SMOOTH_KERNEL, mode="same"),
            np.convolve(off, SMOOTH_KERNEL, mode="same"),
        )
        for cls, (on, off) in raw.items()
    }
    return smoothed, grid


def _peaks(curve: np.ndarray, threshold: float) -> list[int]:
    """Local maxima >= threshold; plateaus report their first bin."""
    out = []
    n = len(curve)
    for i in range(n):
        if curve[i] < threshold:
            continue
        left = curve[i - 1] if i > 0 else -np.inf
        right = curve[i + 1] if i + 1 < n else -np.inf
        if curve[i] > left and curve[i] >= right:
            out.append(i)
    return out


def _pair_peaks(
    on_curve: np.ndarray, off_curve: np.ndarray, grid: np.ndarray, threshold: float, label: str
) -> list[tuple[Hypothesis, float]]:
    """Each onset peak pairs with the nearest subsequent offset peak; overlapping
    hypotheses keep the higher combined (onset + offset) peak mass."""
    on_peaks = _peaks(on_curve, threshold)
    off_peaks = _peaks(off_curve, threshold)
    cands: list[tuple[Hypothesis, float]] = []
    for i in on_peaks:
        later = [j for j in off_peaks if j > i]
        if not later:
            continue
        j = later[0]
        hyp = Hypothesis(
            onset=float(grid[i]),
            offset=float(grid[j]),
            label=label,
            score=float(min(on_curve[i], off_curve[j])),
        )
        cands.append((hyp, float(on_curve[i] + off_curve[j])))
    merged: list[tuple[Hypothesis, float]] = []
    for hyp, combined in cands:
        if merged and hyp.onset < merged[-1][0].offset:
            if combined > merged[-1][1]:
                merged[-1] = (hyp, combined)
        else:
            merged.append((hyp, combined))
    return merged


def reg_train(
    corpus: Corpus, split: CorpusSplit, config: RegConfig | None = None
) -> RegDetector:
    from ..evaluation import match_events  # deferred: evaluation sits above detectors

    config = config or RegConfig()
    sessions = corpus.train(split)
    if not sessions:
        raise DataError("no training sessions in split")
    for cls in corpus.classes:
        count = sum(1 for _, evs in sessions for ev in evs if ev.label == cls)
        if count < 2:
            raise DataError(f"class {cls!r} has {count} training events, needs >= 2")

    tables = []  # aligned with sessions; None for sessions under one segment
    for signal, events in sessions:
        t = _segment_table(signal, events, config)
        if t is None:
            tables.append(None)
            continue
        descs, labels, centers = t
        tables.append(
            (descs, labels, centers, _regression_rows(centers, descs, events, config.seg_len))
        )
    if all(t is None for t in tables):
        raise DataError("no trainable sessions")

    classes = sorted(corpus.classes)
    cv_trees = config.cv_trees or config.trees
    folds = [
        [k for k in range(len(sessions)) if k % config.cv_folds == f]
        for f in range(min(config.cv_folds, len(sessions)))
    ]
    # pooled TP/FP/FN per candidate threshold fraction, per class
    tp = {cls: np.zeros(len(THRESHOLD_FRACTIONS)) for cls in classes}
    fp = {cls: np.zeros(len(THRESHOLD_FRACTIONS)) for cls in classes}
    fn = {cls: np.zeros(len(THRESHOLD_FRACTIONS)) for cls in classes}
    for fold in folds:
        if not fold or len(fold) == len(sessions):
            continue
        held = set(fold)
        train_tables = [t for k, t in enumerate(tables) if k not in held and t is not None]
        if not train_tables:
            continue
        try:
            gate, classifier, forests = _train_models(train_tables, classes, config, cv_trees)
        except DataError:
            continue  # a fold may lack some class entirely
        for k in fold:
            if tables[k] is None:
                continue
            signal, events = sessions[k]
            descs, centers = tables[k][0], tables[k][2]
            curves, grid = _curves(
                gate, classifier, forests, descs, centers, 0.0, signal.duration, config.seg_hop
            )
            for cls in classes:
                on, off = curves[cls]
                peak = max(float(on.max()), float(off.max()))
                refs = [ev for ev in events if ev.label == cls]
                for fi, frac in enumerate(THRESHOLD_FRACTIONS):
                    cand = frac * peak if peak > 0 else np.inf
                    hyps = [h for h, _ in _pair_peaks(on, off, grid, cand, cls)]
                    m = match_events(hyps, refs)
                    tp[cls][fi] += len(m.pairs)
                    fp[cls][fi] += len(m.unmatched_hyps)
                    fn[cls][fi] += len(m.unmatched_refs)

    best_frac: dict[str, float] = {}
    for cls in classes:
        f1 = np.zeros(len(THRESHOLD_FRACTIONS))
        for fi in range(len(THRESHOLD_FRACTIONS)):
            denom = 2 * tp[cls][fi] + fp[cls][fi] + fn[cls][fi]
            f1[fi] = 2 * tp[cls][fi] / denom if denom > 0 else 0.0
        best_frac[cls] = THRESHOLD_FRACTIONS[int(np.argmax(f1))]

    gate, classifier, forests = _train_models(
        [t for t in tables if t is not None], classes, config, config.trees, config.reg_trees
    )

    # calibrate each class's threshold against full-model train-session curves
    max_conf = {cls: 0.0 for cls in classes}
    for k, (signal, events) in enumerate(sessions):
        if tables[k] is None:
            continue
        descs, centers = tables[k][0], tables[k][2]
        curves, _ = _curves(
            gate, classifier, forests, descs, centers, 0.0, signal.duration, config.seg_hop
        )
        for cls in classes:
            on, off = curves[cls]
            max_conf[cls] = max(max_conf[cls], float(on.max()), float(off.max()))
    thresholds = {
        cls: best_frac[cls] * max_conf[cls] if max_conf[cls] > 0 else 1.0
        for cls in classes
    }
    return RegDetector(
        gate=gate,
        classifier=classifier,
        forests=forests,
        thresholds=thresholds,
        classes=classes,
        seg_len=config.seg_len,
        seg_hop=config.seg_hop,
    )


def reg_detect(det: RegDetector, signal: AudioSignal) -> list[Hypothesis]:
    starts = window_grid(len(signal.samples), det.seg_len, det.seg_hop)
    if len(starts) == 0:
        return []
    descs = span_descriptors(signal, starts, int(round(det.seg_len * SAMPLE_RATE)))
    centers = starts / SAMPLE_RATE + det.seg_len / 2.0
    curves, grid = _curves(
        det.gate, det.classifier, det.forests, descs, centers, 0.0, signal.duration, det.seg_hop
    )
    hyps: list[Hypothesis] = []
    for cls in det.classes:
        on, off = curves[cls]
        hyps.extend(h for h, _ in _pair_peaks(on, off, grid, det.thresholds[cls], cls))
    hyps.sort(key=lambda h: (h.onset, h.offset, h.label))
    return hyps


def span_curves(
    det: RegDetector, signal: AudioSignal, onset: float, offset: float
) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Vote accumulation over the segments inside [onset, offset].

    The curve grid extends one second past each span edge so boundary votes
    land at their predicted positions instead of clipping to the span edge;
    clipping would inflate edge bins on exactly-cropped events and skew the
    peak statistics between training spans and padded detected spans.
    """
    a = max(int(round(onset * SAMPLE_RATE)), 0)
    b = min(int(round(offset * SAMPLE_RATE)), len(signal.samples))
    starts = a + window_grid(b - a, det.seg_len, det.seg_hop)
    if len(starts) == 0:
        raise SpanTooShortError(f"span [{onset}, {offset}] too short for one segment")
    descs = span_descriptors(signal, starts, int(round(det.seg_len * SAMPLE_RATE)))
    centers = starts / SAMPLE_RATE + det.seg_len / 2.0
    curves, _ = _curves(
        det.gate,
        det.classifier,
        det.forests,
        descs,
        centers,
        onset - 1.0,
        offset + 1.0,
        det.seg_hop,
    )
    return curves
