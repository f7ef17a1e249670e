"""Pipeline stages over a work directory of JSON artifacts.

Each stage reads the artifacts of earlier stages and writes its own; a
missing input raises :class:`MissingArtifact` naming the stage to run.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from nextsum import evaluation, generator
from nextsum.annotate import EmbeddingTable, ImportanceModel, load_embeddings, train_importance
from nextsum.config import PipelineConfig
from nextsum.content_model import ContentHmm, select_num_topics
from nextsum.corpus import CorpusError, Vocabulary, build_vocabulary, load_corpus, split_dataset
from nextsum.features import Featurizer, ManifestError, build_manifest, fingerprint
from nextsum.oracle_align import align, read_gold, write_gold
from nextsum.predictor import NextSumModel, train

SPLIT = "split.json"
VOCAB = "vocab.json"
GOLD = "gold.jsonl"
CONTENT_MODEL = "content_model.json"
IMPORTANCE = "importance.json"
MODEL = "model.json"
EVAL = "eval.json"
EVAL_TEXT = "eval.txt"
HISTOGRAM = "lengths.csv"
REPORT = "report.txt"

PRODUCER = {
    SPLIT: "ingest",
    VOCAB: "ingest",
    GOLD: "build-oracle",
    CONTENT_MODEL: "train-cm",
    IMPORTANCE: "train-importance",
    MODEL: "train",
    EVAL: "evaluate",
}


class MissingArtifact(FileNotFoundError):
    def __init__(self, path: Path, stage: str):
        super().__init__(f"missing {path}; run the '{stage}' stage first")
        self.path = path
        self.stage = stage


def summaries_file(system: str) -> str:
    return f"summaries.{system}.jsonl"


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n", encoding="utf-8")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class Workspace:
    """Artifact access for one configuration."""

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.dir = Path(cfg.workdir)
        self._pairs = None
        self._split = None

    def path(self, name: str) -> Path:
        return self.dir / name

    def need(self, name: str, stage: str | None = None) -> Path:
        p = self.path(name)
        if not p.exists():
            raise MissingArtifact(p, stage or PRODUCER.get(name, "generate"))
        return p

    def read_json(self, name: str):
        return json.loads(self.need(name).read_text(encoding="utf-8"))

    # corpus and split
    def corpus_path(self) -> Path:
        if self.cfg.corpus is None:
            raise CorpusError("no corpus given (use --corpus or the config's 'corpus' key)")
        p = Path(self.cfg.corpus)
        if not p.exists():
            raise CorpusError(f"corpus file {p} does not exist")
        return p

    def pairs(self):
        if self._pairs is None:
            self._pairs = load_corpus(self.corpus_path())
        return self._pairs

    def split(self) -> dict[str, list]:
        """Pairs per split, checked against the corpus recorded by ingest."""
        if self._split is None:
            meta = self.read_json(SPLIT)
            if meta["corpus_sha256"] != _sha256(self.corpus_path()):
                raise CorpusError("corpus changed since ingest; rerun 'ingest'")
            by_id = {a.id: (a, s) for a, s in self.pairs()}
            self._split = {name: [by_id[i] for i in meta[name]] for name in ("train", "dev", "test")}
        return self._split

    def gold(self):
        return read_gold(self.need(GOLD))

    def with_gold(self, name: str):
        gold = self.gold()
        return [(a, gold[a.id]) for a, _ in self.split()[name]]

    # models
    def embeddings(self) -> EmbeddingTable:
        if self.cfg.embeddings:
            return load_embeddings(self.cfg.embeddings)
        return EmbeddingTable(dim=self.cfg.embedding_dim)

    def hmm(self) -> ContentHmm:
        return ContentHmm.load(self.need(CONTENT_MODEL))

    def importance(self):
        if not self.cfg.importance.enabled:
            return None
        return ImportanceModel.load(self.need(IMPORTANCE))

    def model(self) -> NextSumModel:
        path = self.need(MODEL)
        return NextSumModel.load(path, self.hmm(), self.embeddings(), self.importance())


def ingest(cfg: PipelineConfig) -> list[Path]:
    """Parse and validate the corpus, write the seeded split and the train vocabulary."""
    ws = Workspace(cfg)
    ws.dir.mkdir(parents=True, exist_ok=True)
    pairs = ws.pairs()
    ids = [a.id for a, _ in pairs]
    if len(set(ids)) != len(ids):
        raise CorpusError("duplicate pair ids in corpus")
    seed = cfg.stage_seed("split")
    sp = split_dataset(pairs, cfg.split, seed)
    train_abs = [s.num_words for _, s in sp.train]
    meta = {
        "corpus": Path(cfg.corpus).name,
        "corpus_sha256": _sha256(ws.corpus_path()),
        "seed": seed,
        "ratios": list(cfg.split),
        "train": [a.id for a, _ in sp.train],
        "dev": [a.id for a, _ in sp.dev],
        "test": [a.id for a, _ in sp.test],
        "avg_train_abstract_words": round(float(np.mean(train_abs)), 4) if train_abs else 0.0,
    }
    vocab = build_vocabulary([a for a, _ in sp.train], cfg.top_words)
    _dump(ws.path(SPLIT), meta)
    _dump(ws.path(VOCAB), vocab.to_json())
    return [ws.path(SPLIT), ws.path(VOCAB)]


def build_oracle(cfg: PipelineConfig) -> list[Path]:
    ws = Workspace(cfg)
    ws.need(SPLIT)
    golds = [align(s, a) for a, s in ws.pairs()]
    write_gold(ws.path(GOLD), golds)
    return [ws.path(GOLD)]


def train_cm(cfg: PipelineConfig, topics: int | None = None) -> list[Path]:
    ws = Workspace(cfg)
    sp = ws.split()
    cm = cfg.content_model
    lo, hi = (topics, topics) if topics else cm.topic_range
    _, hmm = select_num_topics(
        [a for a, _ in sp["train"]], [a for a, _ in sp["dev"]], range(lo, hi + 1),
        seed=cfg.stage_seed("content_model"), max_iters=cm.max_iters, delta=cm.delta,
        unk_cutoff=cm.unk_cutoff, init_sample=cm.init_sample,
    )
    hmm.save(ws.path(CONTENT_MODEL))
    return [ws.path(CONTENT_MODEL)]


def train_importance_stage(cfg: PipelineConfig) -> list[Path]:
    ws = Workspace(cfg)
    ic = cfg.importance
    model = train_importance(
        ws.with_gold("train"), ws.embeddings(), seed=cfg.stage_seed("importance"),
        epochs=ic.epochs, lr=ic.lr, batch_size=ic.batch_size, max_examples=ic.max_examples,
    )
    model.save(ws.path(IMPORTANCE))
    return [ws.path(IMPORTANCE)]


def train_stage(cfg: PipelineConfig) -> list[Path]:
    ws = Workspace(cfg)
    hmm, emb, imp = ws.hmm(), ws.embeddings(), ws.importance()
    vocab = ws.read_json(VOCAB)
    train_items, dev_items = ws.with_gold("train"), ws.with_gold("dev")
    top = Vocabulary({}, list(vocab["top"]), vocab["total"])
    manifest = build_manifest([a for a, _ in train_items], hmm, emb, top, imp)
    model = train(Featurizer(manifest, hmm, emb, imp), train_items, dev_items, cfg.train_config())
    # run-location paths stay out so reruns elsewhere are byte-identical
    model.metrics["pipeline_config"] = {k: v for k, v in cfg.to_json().items() if k not in ("workdir", "corpus")}
    model.save(ws.path(MODEL))
    return [ws.path(MODEL)]


def _run_system(ws: Workspace, system: str, length: int | None):
    test = [a for a, _ in ws.split()["test"]]
    if system in ("nextsum", "nextsum-l"):
        model = ws.model()
        source = _sha256(ws.path(MODEL))
        if system == "nextsum":
            return source, [generator.generate(model, a) for a in test]
        return source, [generator.generate_with_limit(model, a, length) for a in test]
    if system == "lead":
        return None, [generator.lead_baseline(a, length) for a in test]
    hmm = ws.hmm()
    source = fingerprint(hmm)
    if system == "transition":
        return source, [generator.transition_baseline(hmm, a, length, ws.cfg.train.k) for a in test]
    importance = generator.topic_importance(hmm, ws.with_gold("train"))
    if system == "chmm":
        seed = ws.cfg.stage_seed("chmm")
        return source, [generator.chmm_baseline(hmm, importance, a, length, seed) for a in test]
    return source, [generator.chmm_t_baseline(hmm, importance, a, length, ws.cfg.train.k) for a in test]


def generate_stage(cfg: PipelineConfig, system: str | None = None, length: int | None = None) -> list[Path]:
    system = system or cfg.system
    length = length if length is not None else cfg.length
    if system not in generator.SYSTEMS:
        raise ValueError(f"unknown system {system!r}; choose from {list(generator.SYSTEMS)}")
    if system != "nextsum" and length is None:
        raise ValueError(f"--length is required for system {system!r}")
    if length is not None and length < 1:
        raise ValueError("--length must be >= 1")
    ws = Workspace(cfg)
    source, summaries = _run_system(ws, system, None if system == "nextsum" else length)
    out = ws.path(summaries_file(system))
    with open(out, "w", encoding="utf-8") as fh:
        header = {"meta": {"system": system, "length": None if system == "nextsum" else length,
                           "source_fingerprint": source, "split": _sha256(ws.need(SPLIT)),
                           "window": ws.cfg.train.k if system in ("transition", "chmm-t") else None}}
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for s in summaries:
            fh.write(json.dumps(s.to_json(), sort_keys=True) + "\n")
    return [out]


def read_summary_file(path: Path) -> tuple[dict, list[dict]]:
    with open(path, encoding="utf-8") as fh:
        rows = [json.loads(line) for line in fh if line.strip()]
    if not rows or "meta" not in rows[0]:
        raise ManifestError(f"{path} has no metadata header")
    return rows[0]["meta"], rows[1:]


def _abstract_text(abstract) -> str:
    return " ".join(" ".join(s.surfaces) for s in abstract.sentences)


def _rouge_row(rows: list[dict], refs: dict[str, str]) -> dict:
    r1, r2, empty = [], [], 0
    for row in rows:
        ref = refs[row["id"]]
        s1 = evaluation.rouge_n(row["text"], ref, 1, stem=True)
        s2 = evaluation.rouge_n(row["text"], ref, 2, stem=True)
        empty += s2.empty
        r1.append(s1.f_score)
        r2.append(s2.f_score)
    return {
        "rouge1_f": float(np.mean(r1)) if r1 else 0.0,
        "rouge2_f": float(np.mean(r2)) if r2 else 0.0,
        "avg_words": float(np.mean([r["words"] for r in rows])) if rows else 0.0,
        "n": len(rows),
        "empty": empty,
    }


def evaluate_stage(cfg: PipelineConfig) -> list[Path]:
    ws = Workspace(cfg)
    model = ws.model()
    test = ws.split()["test"]
    test_gold = ws.with_gold("test")
    refs = {a.id: _abstract_text(s) for a, s in test}
    eval_seed = cfg.stage_seed("eval")
    report = {
        "next_sentence": evaluation.next_sentence_eval(model, test_gold, model.k, eval_seed),
        "next_sentence_random": evaluation.next_sentence_eval(
            evaluation.RandomScorer(eval_seed), test_gold, model.k, eval_seed),
        "rouge": {},
    }
    model_fp = _sha256(ws.path(MODEL))
    fingerprints = {"nextsum": model_fp, "nextsum-l": model_fp, "lead": None}
    hmm_fp = fingerprint(ws.hmm())
    split_fp = _sha256(ws.need(SPLIT))
    lengths = None
    for system in generator.SYSTEMS:
        path = ws.path(summaries_file(system))
        if not path.exists():
            continue
        meta, rows = read_summary_file(path)
        expected = fingerprints.get(system, hmm_fp)
        if meta["source_fingerprint"] != expected or meta["split"] != split_fp:
            raise ManifestError(f"{path.name} was generated from different models or split; regenerate it")
        if sorted(r["id"] for r in rows) != sorted(refs):
            raise ManifestError(f"{path.name} does not cover the test split")
        report["rouge"][system] = _rouge_row(rows, refs) | {"length": meta["length"]}
        if system == "nextsum":
            lengths = evaluation.length_report(
                {r["id"]: r["words"] for r in rows}, {a.id: s.num_words for a, s in test})
    if "nextsum" not in report["rouge"]:
        raise MissingArtifact(ws.path(summaries_file("nextsum")), "generate --system nextsum")
    oracle = [generator.oracle_summary(a, g).to_json() for a, g in test_gold]
    report["rouge"]["oracle"] = _rouge_row(oracle, refs) | {"length": None}
    report["lengths"] = lengths
    report["window"] = model.k
    _dump(ws.path(EVAL), report)
    ws.path(EVAL_TEXT).write_text(evaluation.format_report({ws.dir.name: report}), encoding="utf-8")
    with open(ws.path(HISTOGRAM), "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_start", "count"])
        w.writerows(lengths["histogram"])
    return [ws.path(EVAL), ws.path(EVAL_TEXT), ws.path(HISTOGRAM)]


def report_stage(cfg: PipelineConfig, extra_dirs=()) -> list[Path]:
    """Tables across this work directory and any ``extra_dirs`` (one column per run)."""
    runs = {}
    for d in [Path(cfg.workdir), *map(Path, extra_dirs)]:
        p = d / EVAL
        if not p.exists():
            raise MissingArtifact(p, "evaluate")
        runs[d.name] = json.loads(p.read_text(encoding="utf-8"))
    out = Path(cfg.workdir) / REPORT
    out.write_text(evaluation.format_report(runs), encoding="utf-8")
    return [out]


def run_all(cfg: PipelineConfig, systems=("nextsum", "lead"), length: int | None = None) -> list[Path]:
    """Every stage in order; baselines get ``length`` or the mean train abstract length."""
    written = ingest(cfg) + build_oracle(cfg) + train_cm(cfg)
    if cfg.importance.enabled:
        written += train_importance_stage(cfg)
    written += train_stage(cfg)
    if length is None:
        length = max(1, round(Workspace(cfg).read_json(SPLIT)["avg_train_abstract_words"]))
    for system in systems:
        written += generate_stage(cfg, system, None if system == "nextsum" else length)
    written += evaluate_stage(cfg)
    written += report_stage(cfg)
    return written
