"""Event annotations as tab-separated (onset, offset, label) rows."""

from __future__ import annotations

import logging
from dataclasses import dataclass

from ..errors import AnnotationParseError

logger = logging.getLogger(__name__)

HEADER = "onset\toffset\tlabel"


@dataclass(frozen=True)
class EventAnnotation:
    onset: float
    offset: float
    label: str

    def __post_init__(self):
        if not self.offset > self.onset:
            raise ValueError(f"offset must exceed onset: got [{self.onset}, {self.offset}]")

    @property
    def duration(self) -> float:
        return self.offset - self.onset

    @property
    def center(self) -> float:
        return 0.5 * (self.onset + self.offset)


@dataclass(frozen=True)
class CorpusSplit:
    """Disjoint train/test session id sets."""

    train_sessions: frozenset[str]
    test_sessions: frozenset[str]

    def __post_init__(self):
        overlap = self.train_sessions & self.test_sessions
        if overlap:
            raise ValueError(f"sessions in both splits: {sorted(overlap)}")


def load_annotations(path, inventory: list[str] | None = None) -> list[EventAnnotation]:
    """Parse an annotation TSV, returning events sorted by onset.

    Rows whose label is outside `inventory` (when given) are treated as
    background and dropped; the drop count is logged as a warning.
    Malformed rows raise AnnotationParseError naming the line number.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if not lines or lines[0].rstrip("\r") != HEADER:
        raise AnnotationParseError(f"{path}: expected header {HEADER!r}")
    events: list[EventAnnotation] = []
    dropped = 0
    for lineno, line in enumerate(lines[1:], start=2):
        line = line.rstrip("\r")
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise AnnotationParseError(f"{path}: line {lineno}: expected 3 fields")
        try:
            onset = float(parts[0])
            offset = float(parts[1])
        except ValueError as exc:
            raise AnnotationParseError(f"{path}: line {lineno}: non-numeric time") from exc
        label = parts[2]
        if onset < 0 or not offset > onset:
            raise AnnotationParseError(
                f"{path}: line {lineno}: invalid interval [{parts[0]}, {parts[1]}]"
            )
        if inventory is not None and label not in inventory:
            dropped += 1
            continue
        events.append(EventAnnotation(onset=onset, offset=offset, label=label))
    if dropped:
        logger.warning("%s: dropped %d rows with out-of-inventory labels", path, dropped)
    events.sort(key=lambda e: (e.onset, e.offset, e.label))
    return events


def save_annotations(path, events: list[EventAnnotation]) -> None:
    lines = [HEADER]
    for e in sorted(events, key=lambda e: (e.onset, e.offset, e.label)):
        lines.append(f"{e.onset!r}\t{e.offset!r}\t{e.label}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
