"""Command-line front end.

    sedpipe synth    --config cfg.json --out DIR [--seed N]
    sedpipe train    --config cfg.json --out DIR [--detector K ...] [--verifier V ...]
    sedpipe detect   --config cfg.json --out DIR --detector K
    sedpipe verify   --config cfg.json --out DIR --detector K --verifier V
    sedpipe evaluate --config cfg.json --out DIR --detector K [--verifier V] [--baseline R]
    sedpipe matrix   --config cfg.json --out DIR

Exit codes: 0 success, 1 usage or configuration error, 2 runtime or data error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import experiment
from .detectors import DETECTOR_KINDS
from .errors import ConfigError, SedError
from .evaluation import format_report
from .verifiers import VERIFIER_KINDS


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sedpipe", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, detector=False, verifier=False):
        p.add_argument("--config", required=True, help="experiment config JSON")
        p.add_argument("--out", required=True, help="experiment directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        if detector:
            p.add_argument("--detector", choices=DETECTOR_KINDS, required=True)
        if verifier:
            p.add_argument("--verifier", choices=VERIFIER_KINDS, required=True)

    common(sub.add_parser("synth", help="generate the synthetic corpus"))
    train = sub.add_parser("train", help="train detectors and verifiers")
    common(train)
    train.add_argument("--detector", choices=DETECTOR_KINDS, action="append")
    train.add_argument("--verifier", choices=VERIFIER_KINDS, action="append")
    common(sub.add_parser("detect", help="run a detector on the test sessions"), detector=True)
    common(
        sub.add_parser("verify", help="filter hypotheses with a verifier"),
        detector=True,
        verifier=True,
    )
    ev = sub.add_parser("evaluate", help="score hypotheses against references")
    common(ev, detector=True)
    ev.add_argument("--verifier", choices=VERIFIER_KINDS, default=None)
    ev.add_argument("--baseline", default=None, help="baseline report JSON for deltas")
    common(sub.add_parser("matrix", help="full detector x verifier experiment"))
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = experiment.load_config(args.config, seed_override=args.seed)
        out = Path(args.out)
        if args.command == "synth":
            ids = experiment.cmd_synth(cfg, out)
            print(f"wrote {len(ids)} sessions to {experiment.corpus_dir(out)}")
        elif args.command == "train":
            written = experiment.cmd_train(cfg, out, args.detector, args.verifier)
            for name in sorted(written):
                print(f"trained {name}: {written[name]}")
        elif args.command == "detect":
            hyps = experiment.cmd_detect(cfg, out, args.detector)
            total = sum(len(h) for h in hyps.values())
            print(f"{args.detector}: {total} hypotheses over {len(hyps)} sessions")
        elif args.command == "verify":
            kept = experiment.cmd_verify(cfg, out, args.detector, args.verifier)
            total = sum(len(h) for h in kept.values())
            print(f"{args.detector} + {args.verifier}: kept {total} hypotheses")
        elif args.command == "evaluate":
            baseline = Path(args.baseline) if args.baseline else None
            report = experiment.cmd_evaluate(
                cfg, out, args.detector, args.verifier, baseline
            )
            base = experiment.report_from_json(baseline) if baseline else None
            print(format_report(report, base))
        elif args.command == "matrix":
            cells = experiment.cmd_matrix(cfg, out)
            print(experiment.format_matrix(cells))
        return 0
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
