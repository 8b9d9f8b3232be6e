"""Verification filtering, hypothesis-reference matching, and P/R/F1 reports.

A hypothesis survives verification iff re-classifying its audio span
reproduces the detector's label; spans too short to classify are kept
(rejection without evidence would silently trade recall). Matching uses a
temporal-center containment rule with greedy one-to-one assignment.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .corpus import AudioSignal, EventAnnotation
from .detectors import Hypothesis
from .errors import DataError, SpanTooShortError
from .verifiers import Verifier, verifier_classify

logger = logging.getLogger(__name__)


@dataclass
class MatchResult:
    pairs: list[tuple[int, int]] = field(default_factory=list)  # (hyp idx, ref idx)
    unmatched_hyps: list[int] = field(default_factory=list)
    unmatched_refs: list[int] = field(default_factory=list)


@dataclass
class ClassMetrics:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self) -> float:
        hyp_count = self.tp + self.fp
        if hyp_count == 0:
            return 1.0 if self.tp + self.fn == 0 else 0.0
        return self.tp / hyp_count

    @property
    def recall(self) -> float:
        ref_count = self.tp + self.fn
        if ref_count == 0:
            return 1.0
        return self.tp / ref_count

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2.0 * p * r / (p + r) if p + r > 0 else 0.0


@dataclass
class DetectionReport:
    overall: ClassMetrics
    per_class: dict[str, ClassMetrics]

    def to_dict(self) -> dict:
        def one(m: ClassMetrics) -> dict:
            return {
                "tp": m.tp,
                "fp": m.fp,
                "fn": m.fn,
                "precision": m.precision,
                "recall": m.recall,
                "f1": m.f1,
            }

        return {
            "overall": one(self.overall),
            "per_class": {c: one(m) for c, m in sorted(self.per_class.items())},
        }


def verify(
    hyps: list[Hypothesis],
    v: Verifier,
    signal: AudioSignal,
    classify=None,
) -> list[Hypothesis]:
    """Keep each hypothesis whose span re-classifies to its own label.

    Order-preserving subset of the input. Spans the verifier cannot segment
    are kept and counted in a warning. `classify` defaults to the real
    verifier path; tests may substitute a stub with the same signature.
    """
    if classify is None:
        classify = lambda vv, sig, on, off: verifier_classify(vv, sig, on, off)[0]
    kept: list[Hypothesis] = []
    too_short = 0
    for h in hyps:
        if h.onset < 0 or h.offset > signal.duration + 1e-9:
            raise DataError(
                f"hypothesis [{h.onset}, {h.offset}] outside signal of {signal.duration:.2f}s"
            )
        try:
            label = classify(v, signal, h.onset, h.offset)
        except SpanTooShortError:
            too_short += 1
            kept.append(h)
            continue
        if label == h.label:
            kept.append(h)
    if too_short:
        logger.warning("kept %d hypotheses too short to verify", too_short)
    return kept


def match_events(
    hyps: list[Hypothesis],
    refs: list[EventAnnotation],
    rule: str = "center",
    min_overlap_ratio: float = 0.5,
) -> MatchResult:
    """Greedy one-to-one matching of same-label compatible pairs.

    Under the default "center" rule, h and r are compatible iff labels match
    and h's center lies in r or r's center lies in h. The stricter "overlap"
    rule instead requires intersection over union >= min_overlap_ratio.
    Candidate pairs are taken in descending overlap order; ties prefer the
    earlier reference onset, then the earlier hypothesis.
    """
    if rule not in ("center", "overlap"):
        raise DataError(f"unknown matching rule {rule!r}")
    candidates = []
    for hi, h in enumerate(hyps):
        for ri, r in enumerate(refs):
            if h.label != r.label:
                continue
            overlap = min(h.offset, r.offset) - max(h.onset, r.onset)
            if rule == "center":
                h_center = 0.5 * (h.onset + h.offset)
                r_center = 0.5 * (r.onset + r.offset)
                compatible = (r.onset <= h_center <= r.offset) or (
                    h.onset <= r_center <= h.offset
                )
            else:
                union = max(h.offset, r.offset) - min(h.onset, r.onset)
                compatible = overlap > 0 and overlap / union >= min_overlap_ratio
            if not compatible:
                continue
            candidates.append((-overlap, r.onset, h.onset, hi, ri))
    candidates.sort()
    used_h: set[int] = set()
    used_r: set[int] = set()
    result = MatchResult()
    for _, _, _, hi, ri in candidates:
        if hi in used_h or ri in used_r:
            continue
        used_h.add(hi)
        used_r.add(ri)
        result.pairs.append((hi, ri))
    result.unmatched_hyps = [i for i in range(len(hyps)) if i not in used_h]
    result.unmatched_refs = [i for i in range(len(refs)) if i not in used_r]
    return result


def prf(m: MatchResult, hyp_count: int, ref_count: int) -> DetectionReport:
    """Overall precision/recall/F1 report from one matching.

    Zero-denominator conventions: no hypotheses and no references scores
    perfect (1, 1, 1); no hypotheses against references gives precision 0;
    recall is 1 when there is nothing to recall; F1 is 0 when P + R is 0.
    """
    tp = len(m.pairs)
    overall = ClassMetrics(tp=tp, fp=hyp_count - tp, fn=ref_count - tp)
    return DetectionReport(overall=overall, per_class={})


def evaluate_events(
    hyps_by_session: dict[str, list[Hypothesis]],
    refs_by_session: dict[str, list[EventAnnotation]],
    classes: list[str],
    rule: str = "center",
) -> DetectionReport:
    """Match per session, pool counts, and report overall plus per-class metrics."""
    per_class = {c: ClassMetrics() for c in classes}
    overall = ClassMetrics()
    for sid in sorted(refs_by_session):
        hyps = hyps_by_session.get(sid, [])
        refs = refs_by_session[sid]
        m = match_events(hyps, refs, rule=rule)
        overall.tp += len(m.pairs)
        overall.fp += len(m.unmatched_hyps)
        overall.fn += len(m.unmatched_refs)
        for hi, _ in m.pairs:
            per_class[hyps[hi].label].tp += 1
        for hi in m.unmatched_hyps:
            if hyps[hi].label in per_class:
                per_class[hyps[hi].label].fp += 1
        for ri in m.unmatched_refs:
            per_class[refs[ri].label].fn += 1
    return DetectionReport(overall=overall, per_class=per_class)


@dataclass
class ReportDelta:
    f1: float
    precision: float
    recall: float


def compare_reports(with_verif: DetectionReport, without: DetectionReport) -> ReportDelta:
    """Signed absolute metric deltas (with-verification minus baseline)."""
    if sorted(with_verif.per_class) != sorted(without.per_class):
        raise DataError("reports cover different class inventories")
    return ReportDelta(
        f1=with_verif.overall.f1 - without.overall.f1,
        precision=with_verif.overall.precision - without.overall.precision,
        recall=with_verif.overall.recall - without.overall.recall,
    )


def format_metric_row(name: str, m: ClassMetrics, delta: ReportDelta | None = None) -> str:
    row = f"{name:<24} {m.f1 * 100:7.1f} {m.precision * 100:10.1f} {m.recall * 100:7.1f}"
    if delta is not None:
        row += (
            f"   {_signed(delta.f1)} {_signed(delta.precision)} {_signed(delta.recall)}"
        )
    return row


def _signed(x: float) -> str:
    return f"{x * 100:+6.1f}"


def format_report(report: DetectionReport, baseline: DetectionReport | None = None) -> str:
    """Plain-text table: overall row plus per-class rows, optional deltas."""
    lines = [f"{'':<24} {'F1':>7} {'precision':>10} {'recall':>7}"
             + ("   " + f"{'dF1':>6} {'dP':>6} {'dR':>6}" if baseline else "")]
    delta = compare_reports(report, baseline) if baseline else None
    lines.append(format_metric_row("overall", report.overall, delta))
    for cls in sorted(report.per_class):
        cd = None
        if baseline is not None:
            cm, bm = report.per_class[cls], baseline.per_class[cls]
            cd = ReportDelta(
                f1=cm.f1 - bm.f1,
                precision=cm.precision - bm.precision,
                recall=cm.recall - bm.recall,
            )
        lines.append(format_metric_row(f"  {cls}", report.per_class[cls], cd))
    return "\n".join(lines)
