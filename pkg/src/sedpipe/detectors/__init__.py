"""The three detection schemes mapping continuous audio to event hypotheses."""

from ..features import FrameSpec
from ..learners.serialize import register
from .asr import AsrConfig, AsrDetector, asr_detect, asr_train
from .dbc import DbcConfig, DbcDetector, dbc_detect, dbc_train, mode_filter
from .regression import (
    RegConfig,
    RegDetector,
    accumulate_votes,
    reg_detect,
    reg_train,
    span_curves,
)
from .types import (
    BACKGROUND,
    HYP_HEADER,
    Hypothesis,
    label_windows,
    load_hypotheses,
    save_hypotheses,
    stratified_cap,
    window_grid,
)

DETECTOR_KINDS = ("dbc", "asr", "regression")

register(
    "frame_spec",
    FrameSpec,
    lambda s: {"frame_len": s.frame_len, "hop": s.hop, "fft_size": s.fft_size},
    lambda d: FrameSpec(frame_len=d["frame_len"], hop=d["hop"], fft_size=d["fft_size"]),
)

register(
    "dbc_detector",
    DbcDetector,
    lambda m: {
        "binary_svm": m.binary_svm,
        "event_svm": m.event_svm,
        "scaler": m.scaler,
        "min_duration": m.min_duration,
        "window": m.window,
        "shift": m.shift,
        "filter_width": m.filter_width,
    },
    lambda d: DbcDetector(**d),
)

register(
    "asr_detector",
    AsrDetector,
    lambda m: {"models": m.models, "background": m.background, "spec": m.spec},
    lambda d: AsrDetector(**d),
)

register(
    "reg_detector",
    RegDetector,
    lambda m: {
        "gate": m.gate,
        "classifier": m.classifier,
        "forests": m.forests,
        "thresholds": m.thresholds,
        "classes": m.classes,
        "seg_len": m.seg_len,
        "seg_hop": m.seg_hop,
    },
    lambda d: RegDetector(**d),
)

__all__ = [
    "AsrConfig",
    "AsrDetector",
    "BACKGROUND",
    "DETECTOR_KINDS",
    "DbcConfig",
    "DbcDetector",
    "HYP_HEADER",
    "Hypothesis",
    "RegConfig",
    "RegDetector",
    "accumulate_votes",
    "asr_detect",
    "asr_train",
    "dbc_detect",
    "dbc_train",
    "label_windows",
    "load_hypotheses",
    "mode_filter",
    "reg_detect",
    "reg_train",
    "save_hypotheses",
    "span_curves",
    "stratified_cap",
    "window_grid",
]
