"""Command-line entry point.

Exit status: 0 success, 1 validation error or missing artifact, 2 runtime error.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from nextsum import pipeline
from nextsum.annotate import EmbeddingError
from nextsum.config import ConfigError, load_config
from nextsum.content_model import ContentModelError
from nextsum.corpus import CorpusError
from nextsum.features import ManifestError
from nextsum.generator import SYSTEMS
from nextsum.synthlab import SynthSpec, write_corpus

COMMANDS = ("ingest", "synth", "build-oracle", "train-cm", "train-importance",
            "train", "generate", "evaluate", "report", "run-all")

VALIDATION_ERRORS = (ConfigError, CorpusError, ManifestError, EmbeddingError,
                     ContentModelError, FileNotFoundError)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nextsum", description="Next-sentence extractive summarization pipeline.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON pipeline config; flags override its values")
    p.add_argument("--corpus", help="JSON-lines corpus")
    p.add_argument("--out", help="work directory (for synth: the corpus file to write)")
    p.add_argument("--seed", type=int, help="base seed for every seeded stage")
    p.add_argument("--embeddings", help="word2vec text-format embeddings")
    p.add_argument("--system", choices=SYSTEMS)
    p.add_argument("--length", type=int, help="word limit k (all systems but nextsum)")
    p.add_argument("--topics", type=int, help="synth: planted topics; train-cm: fixed topic count")
    p.add_argument("--pairs", type=int, default=620, help="synth: number of pairs")
    p.add_argument("--runs", nargs="*", default=[], help="report: extra work directories to tabulate")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _config(args):
    cfg = load_config(args.config)
    overrides = {}
    if args.corpus is not None:
        overrides["corpus"] = args.corpus
    if args.out is not None and args.command != "synth":
        overrides["workdir"] = args.out
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.embeddings is not None:
        overrides["embeddings"] = args.embeddings
    if args.system is not None:
        overrides["system"] = args.system
    if args.length is not None:
        overrides["length"] = args.length
    return dataclasses.replace(cfg, **overrides)


def _synth(args, cfg) -> list[Path]:
    if not args.out:
        raise ConfigError("synth needs --out <corpus.jsonl>")
    spec = SynthSpec(num_topics=args.topics or 6, seed=cfg.seed)
    spec.num_important = min(spec.num_important, spec.num_topics)
    return list(write_corpus(spec, args.pairs, args.out))


def run(args) -> list[Path]:
    cfg = _config(args)
    cmd = args.command
    if cmd == "synth":
        return _synth(args, cfg)
    if cmd == "ingest":
        return pipeline.ingest(cfg)
    if cmd == "build-oracle":
        return pipeline.build_oracle(cfg)
    if cmd == "train-cm":
        return pipeline.train_cm(cfg, args.topics)
    if cmd == "train-importance":
        return pipeline.train_importance_stage(cfg)
    if cmd == "train":
        return pipeline.train_stage(cfg)
    if cmd == "generate":
        return pipeline.generate_stage(cfg)
    if cmd == "evaluate":
        return pipeline.evaluate_stage(cfg)
    if cmd == "report":
        return pipeline.report_stage(cfg, args.runs)
    systems = ("nextsum", "lead") if args.system is None else ("nextsum", args.system)
    return pipeline.run_all(cfg, tuple(dict.fromkeys(systems)), args.length)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        for path in run(args):
            print(path)
    except VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        # bad flag values surface as ValueError before any stage work happens
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
