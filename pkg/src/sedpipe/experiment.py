"""Experiment configuration and the pipeline steps the CLI wires together.

One experiment directory holds corpus/, models/, hyps/, and reports/; every
step is deterministic given the config and seed.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import (
    Corpus,
    CorpusSplit,
    SynthConfig,
    load_annotations,
    load_audio,
    save_annotations,
    synth_corpus,
    write_wav,
)
from .detectors import (
    DETECTOR_KINDS,
    AsrConfig,
    DbcConfig,
    Hypothesis,
    RegConfig,
    asr_detect,
    asr_train,
    dbc_detect,
    dbc_train,
    load_hypotheses,
    reg_detect,
    reg_train,
    save_hypotheses,
)
from .errors import ConfigError, DataError
from .evaluation import DetectionReport, evaluate_events, format_report, verify
from .learners import load_model, save_model
from .verifiers import VERIFIER_KINDS, VerifierConfig, verifier_accuracy, verifier_train

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


@dataclass
class ExperimentConfig:
    seed: int
    classes: list[str]
    synth: SynthConfig
    train_sessions: int
    dbc: DbcConfig = field(default_factory=DbcConfig)
    asr: AsrConfig = field(default_factory=AsrConfig)
    regression: RegConfig = field(default_factory=RegConfig)
    verifier: VerifierConfig = field(default_factory=VerifierConfig)


def _build(cls, payload: dict, where: str):
    allowed = set(cls.__dataclass_fields__)
    unknown = set(payload) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown fields {sorted(unknown)}")
    return cls(**payload)


def config_from_dict(doc: dict) -> ExperimentConfig:
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}, got {version!r}")
    if "seed" not in doc:
        raise ConfigError("config requires a seed (reproducibility is mandatory)")
    seed = int(doc["seed"])
    classes = list(doc.get("classes", []))
    if len(classes) < 2:
        raise ConfigError("classes: need at least 2")

    synth_doc = dict(doc.get("synth", {}))
    train_sessions = int(synth_doc.pop("train_sessions", 0))
    if "event_duration" in synth_doc:
        synth_doc["event_duration"] = tuple(synth_doc["event_duration"])
    synth = _build(SynthConfig, {"classes": classes, **synth_doc}, "synth")
    synth.validate()
    if not 0 < train_sessions < synth.sessions:
        raise ConfigError("synth.train_sessions must split the sessions")

    det_doc = doc.get("detectors", {})
    unknown = set(det_doc) - set(DETECTOR_KINDS)
    if unknown:
        raise ConfigError(f"detectors: unknown kinds {sorted(unknown)}")
    ver_doc = dict(doc.get("verifiers", {}))

    def grids(payload: dict) -> dict:
        return {
            k: tuple(v) if isinstance(v, list) else v for k, v in payload.items()
        }

    cfg = ExperimentConfig(
        seed=seed,
        classes=classes,
        synth=synth,
        train_sessions=train_sessions,
        dbc=_build(DbcConfig, grids({"seed": seed, **det_doc.get("dbc", {})}), "dbc"),
        asr=_build(AsrConfig, grids({"seed": seed, **det_doc.get("asr", {})}), "asr"),
        regression=_build(
            RegConfig, grids({"seed": seed, **det_doc.get("regression", {})}), "regression"
        ),
        verifier=_build(VerifierConfig, grids({"seed": seed, **ver_doc}), "verifiers"),
    )
    return cfg


def load_config(path, seed_override: int | None = None) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if seed_override is not None:
        doc["seed"] = seed_override
    return config_from_dict(doc)


# ---------------------------------------------------------------- directories


def corpus_dir(out: Path) -> Path:
    return Path(out) / "corpus"


def models_dir(out: Path) -> Path:
    return Path(out) / "models"


def hyps_dir(out: Path, detector: str, verifier: str | None = None) -> Path:
    name = detector if verifier is None else f"{detector}__{verifier}"
    return Path(out) / "hyps" / name


def reports_dir(out: Path) -> Path:
    return Path(out) / "reports"


# ------------------------------------------------------------------- commands


def cmd_synth(cfg: ExperimentConfig, out: Path) -> list[str]:
    """Generate and write the synthetic corpus; returns session ids."""
    cdir = corpus_dir(out)
    cdir.mkdir(parents=True, exist_ok=True)
    sessions = synth_corpus(cfg.synth, cfg.seed)
    ids = []
    for signal, events in sessions:
        write_wav(cdir / f"{signal.session_id}.wav", signal)
        save_annotations(cdir / f"{signal.session_id}.tsv", events)
        ids.append(signal.session_id)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "classes": cfg.classes,
        "seed": cfg.seed,
        "session_ids": ids,
        "train_sessions": ids[: cfg.train_sessions],
        "test_sessions": ids[cfg.train_sessions :],
    }
    with open(cdir / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return ids


def read_corpus(out: Path) -> tuple[Corpus, CorpusSplit]:
    cdir = corpus_dir(out)
    manifest_path = cdir / "manifest.json"
    if not manifest_path.is_file():
        raise DataError(f"missing corpus manifest {manifest_path}; run synth first")
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    classes = manifest["classes"]
    sessions = []
    for sid in manifest["session_ids"]:
        signal = load_audio(cdir / f"{sid}.wav", session_id=sid)
        events = load_annotations(cdir / f"{sid}.tsv", inventory=classes)
        sessions.append((signal, events))
    split = CorpusSplit(
        train_sessions=frozenset(manifest["train_sessions"]),
        test_sessions=frozenset(manifest["test_sessions"]),
    )
    return Corpus(sessions=sessions, classes=classes), split


def train_detector(kind: str, corpus: Corpus, split: CorpusSplit, cfg: ExperimentConfig):
    if kind == "dbc":
        return dbc_train(corpus, split, cfg.dbc)
    if kind == "asr":
        return asr_train(corpus, split, cfg.asr)
    if kind == "regression":
        return reg_train(corpus, split, cfg.regression)
    raise ConfigError(f"unknown detector kind {kind!r}; choose from {DETECTOR_KINDS}")


def cmd_train(
    cfg: ExperimentConfig,
    out: Path,
    detectors: list[str] | None = None,
    verifiers: list[str] | None = None,
) -> dict[str, Path]:
    """Train the requested detectors/verifiers (all by default); returns model paths."""
    detectors = list(DETECTOR_KINDS) if detectors is None else detectors
    verifiers = list(VERIFIER_KINDS) if verifiers is None else verifiers
    for kind in verifiers:
        if kind not in VERIFIER_KINDS:
            raise ConfigError(f"unknown verifier kind {kind!r}; choose from {VERIFIER_KINDS}")
    corpus, split = read_corpus(out)
    mdir = models_dir(out)
    mdir.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}

    needs_reg = any(k in ("bor", "hodw", "bor_hodw") for k in verifiers)
    reg_model = None
    for kind in detectors:
        model = train_detector(kind, corpus, split, cfg)
        path = mdir / f"{kind}.json"
        save_model(path, model)
        written[kind] = path
        if kind == "regression":
            reg_model = model
        logger.info("trained detector %s -> %s", kind, path)
    if needs_reg and reg_model is None:
        reg_path = mdir / "regression.json"
        if reg_path.is_file():
            reg_model = load_model(reg_path)
        else:
            reg_model = reg_train(corpus, split, cfg.regression)
            save_model(reg_path, reg_model)
            written["regression"] = reg_path

    for kind in verifiers:
        v = verifier_train(kind, corpus, split, shared=reg_model, config=cfg.verifier)
        path = mdir / f"verifier_{kind}.json"
        save_model(path, v)
        written[f"verifier_{kind}"] = path
        logger.info("trained verifier %s -> %s", kind, path)
    return written


def _load_detector(out: Path, kind: str):
    path = models_dir(out) / f"{kind}.json"
    if not path.is_file():
        raise DataError(f"missing model file {path}; run train first")
    return load_model(path)


def _load_verifier(out: Path, kind: str):
    path = models_dir(out) / f"verifier_{kind}.json"
    if not path.is_file():
        raise DataError(f"missing model file {path}; run train first")
    return load_model(path)


def detect_with(kind: str, model, signal) -> list[Hypothesis]:
    if kind == "dbc":
        return dbc_detect(model, signal)
    if kind == "asr":
        return asr_detect(model, signal)
    if kind == "regression":
        return reg_detect(model, signal)
    raise ConfigError(f"unknown detector kind {kind!r}")


def cmd_detect(cfg: ExperimentConfig, out: Path, detector: str) -> dict[str, list[Hypothesis]]:
    corpus, split = read_corpus(out)
    model = _load_detector(out, detector)
    hdir = hyps_dir(out, detector)
    hdir.mkdir(parents=True, exist_ok=True)
    result: dict[str, list[Hypothesis]] = {}
    for signal, _ in corpus.test(split):
        hyps = detect_with(detector, model, signal)
        save_hypotheses(hdir / f"{signal.session_id}.tsv", hyps)
        result[signal.session_id] = hyps
    return result


def cmd_verify(
    cfg: ExperimentConfig, out: Path, detector: str, verifier: str
) -> dict[str, list[Hypothesis]]:
    corpus, split = read_corpus(out)
    v = _load_verifier(out, verifier)
    src = hyps_dir(out, detector)
    dst = hyps_dir(out, detector, verifier)
    dst.mkdir(parents=True, exist_ok=True)
    result: dict[str, list[Hypothesis]] = {}
    for signal, _ in corpus.test(split):
        path = src / f"{signal.session_id}.tsv"
        if not path.is_file():
            raise DataError(f"missing hypotheses {path}; run detect first")
        hyps = load_hypotheses(path)
        kept = verify(hyps, v, signal)
        save_hypotheses(dst / f"{signal.session_id}.tsv", kept)
        result[signal.session_id] = kept
    return result


def _report_for(
    corpus: Corpus, split: CorpusSplit, hyps_by_session: dict[str, list[Hypothesis]]
) -> DetectionReport:
    refs = {sig.session_id: events for sig, events in corpus.test(split)}
    return evaluate_events(hyps_by_session, refs, corpus.classes)


def cmd_evaluate(
    cfg: ExperimentConfig,
    out: Path,
    detector: str,
    verifier: str | None = None,
    baseline_path: Path | None = None,
) -> DetectionReport:
    corpus, split = read_corpus(out)
    hdir = hyps_dir(out, detector, verifier)
    hyps_by_session = {}
    for signal, _ in corpus.test(split):
        path = hdir / f"{signal.session_id}.tsv"
        if not path.is_file():
            raise DataError(f"missing hypotheses {path}")
        hyps_by_session[signal.session_id] = load_hypotheses(path)
    report = _report_for(corpus, split, hyps_by_session)

    baseline = None
    if baseline_path is not None:
        baseline = report_from_json(baseline_path)
    rdir = reports_dir(out)
    rdir.mkdir(parents=True, exist_ok=True)
    name = detector if verifier is None else f"{detector}__{verifier}"
    write_report_json(rdir / f"{name}.json", report)
    text = format_report(report, baseline)
    with open(rdir / f"{name}.txt", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text + "\n")
    return report


def write_report_json(path, report: DetectionReport) -> None:
    doc = {"schema_version": SCHEMA_VERSION, **report.to_dict()}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def report_from_json(path) -> DetectionReport:
    from .evaluation import ClassMetrics

    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)

    def one(d: dict) -> ClassMetrics:
        return ClassMetrics(tp=d["tp"], fp=d["fp"], fn=d["fn"])

    return DetectionReport(
        overall=one(doc["overall"]),
        per_class={c: one(m) for c, m in doc["per_class"].items()},
    )


@dataclass
class MatrixCell:
    detector: str
    verifier: str | None
    report: DetectionReport
    verifier_accuracy: float | None = None


def cmd_matrix(cfg: ExperimentConfig, out: Path) -> list[MatrixCell]:
    """Detect with every detector, verify with every verifier, report all cells.

    Produces one baseline row per detector plus one row per detector-verifier
    pair, written as reports/matrix.txt and reports/matrix.json.
    """
    corpus, split = read_corpus(out)
    test_sessions = corpus.test(split)
    cells: list[MatrixCell] = []

    verifier_models = {k: _load_verifier(out, k) for k in VERIFIER_KINDS}
    accuracies = {
        k: verifier_accuracy(v, test_sessions) for k, v in verifier_models.items()
    }

    for det_kind in DETECTOR_KINDS:
        model = _load_detector(out, det_kind)
        hdir = hyps_dir(out, det_kind)
        hdir.mkdir(parents=True, exist_ok=True)
        base_hyps: dict[str, list[Hypothesis]] = {}
        for signal, _ in test_sessions:
            hyps = detect_with(det_kind, model, signal)
            save_hypotheses(hdir / f"{signal.session_id}.tsv", hyps)
            base_hyps[signal.session_id] = hyps
        cells.append(MatrixCell(det_kind, None, _report_for(corpus, split, base_hyps)))
        for ver_kind in VERIFIER_KINDS:
            v = verifier_models[ver_kind]
            dst = hyps_dir(out, det_kind, ver_kind)
            dst.mkdir(parents=True, exist_ok=True)
            kept: dict[str, list[Hypothesis]] = {}
            for signal, _ in test_sessions:
                khyps = verify(base_hyps[signal.session_id], v, signal)
                save_hypotheses(dst / f"{signal.session_id}.tsv", khyps)
                kept[signal.session_id] = khyps
            cells.append(
                MatrixCell(
                    det_kind,
                    ver_kind,
                    _report_for(corpus, split, kept),
                    verifier_accuracy=accuracies[ver_kind],
                )
            )

    rdir = reports_dir(out)
    rdir.mkdir(parents=True, exist_ok=True)
    text = format_matrix(cells)
    with open(rdir / "matrix.txt", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text + "\n")
    doc = {
        "schema_version": SCHEMA_VERSION,
        "verifier_accuracy": {k: accuracies[k] for k in VERIFIER_KINDS},
        "cells": [
            {
                "detector": c.detector,
                "verifier": c.verifier,
                **c.report.to_dict(),
            }
            for c in cells
        ],
    }
    with open(rdir / "matrix.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return cells


def format_matrix(cells: list[MatrixCell]) -> str:
    """Table of all detector rows: baseline first, then per-verifier deltas."""
    from .evaluation import ReportDelta, format_metric_row

    baselines = {c.detector: c.report for c in cells if c.verifier is None}
    lines = [
        f"{'detector / verifier':<24} {'F1':>7} {'precision':>10} {'recall':>7}"
        f"   {'dF1':>6} {'dP':>6} {'dR':>6}"
    ]
    for cell in cells:
        name = cell.detector if cell.verifier is None else f"{cell.detector} + {cell.verifier}"
        delta = None
        if cell.verifier is not None:
            base = baselines[cell.detector].overall
            m = cell.report.overall
            delta = ReportDelta(
                f1=m.f1 - base.f1,
                precision=m.precision - base.precision,
                recall=m.recall - base.recall,
            )
        lines.append(format_metric_row(name, cell.report.overall, delta))
    return "\n".join(lines)
