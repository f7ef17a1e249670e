"""Synthetic article/abstract corpora drawn from a planted topic HMM.

Each topic owns a disjoint vocabulary. The abstract contains, in source
order, a lightly paraphrased copy of the first sentence of every "important"
topic present in the article, so summaries are topic-driven rather than
positional and their length varies with the article's content.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from nextsum import annotate
from nextsum.corpus import ABBREVIATIONS

_ONSETS = "b c d f g h k l m n p r s t v z br dr gr kr pl st tr".split()
_VOWELS = "a e i o u".split()
_CODAS = ["", "", "", "n", "r", "s", "l", "m"]
_RESERVED = set(ABBREVIATIONS) | annotate._PRON | annotate._DET | annotate._ADP | annotate._CONJ | \
    annotate._PRT | annotate._VERBS | annotate._ADV | annotate._NUM_WORDS


@dataclass
class SynthSpec:
    num_topics: int = 6
    vocab_size: int = 40
    num_important: int = 3
    min_sentences: int = 8
    max_sentences: int = 30
    min_words: int = 5
    max_words: int = 14
    stay_prob: float = 0.45
    script_prob: float = 0.4
    important_weight: float = 0.45
    important_initial_weight: float = 0.15
    paraphrase_rate: float = 0.2
    zipf: float = 0.6
    seed: int = 0
    # filled by plant(); kept for the sidecar
    importance: list[float] = field(default_factory=list)

    def __post_init__(self):
        if self.num_important > self.num_topics:
            raise ValueError("num_important must not exceed num_topics")


@dataclass
class PlantedDomain:
    spec: SynthSpec
    vocab: list[list[str]]
    synonyms: list[dict[str, str]]
    initial: np.ndarray
    transitions: np.ndarray
    important: list[int]


def _pseudo_words(rng: np.random.Generator, n: int, taken: set[str]) -> list[str]:
    out = []
    while len(out) < n:
        syll = int(rng.integers(2, 4))
        w = "".join(
            _ONSETS[rng.integers(len(_ONSETS))] + _VOWELS[rng.integers(len(_VOWELS))]
            for _ in range(syll)
        ) + _CODAS[rng.integers(len(_CODAS))]
        if len(w) < 4 or w in taken or w in _RESERVED or w.endswith(("ly", "ing", "ed")):
            continue
        taken.add(w)
        out.append(w)
    return out


def plant(spec: SynthSpec) -> PlantedDomain:
    rng = np.random.default_rng([spec.seed, 1])
    k = spec.num_topics
    taken: set[str] = set()
    vocab = [_pseudo_words(rng, spec.vocab_size, taken) for _ in range(k)]
    synonyms = []
    for words in vocab:
        alt = _pseudo_words(rng, len(words), taken)
        synonyms.append(dict(zip(words, alt)))
    importance = rng.permutation(k).astype(float) / max(1, k - 1)
    important = sorted(np.argsort(-importance, kind="stable")[: spec.num_important].tolist())
    weight = np.array([spec.important_weight if t in important else 1.0 for t in range(k)])
    # sticky topics that mostly advance along a planted script order
    script = rng.permutation(k)
    successor = {int(script[i]): int(script[(i + 1) % k]) for i in range(k)}
    trans = np.zeros((k, k))
    for a in range(k):
        if k == 1:
            trans[a, a] = 1.0
            continue
        row = weight * rng.uniform(0.5, 1.5, size=k)
        row[a] = 0.0
        row = (1 - spec.stay_prob - spec.script_prob) * row / row.sum()
        row[a] += spec.stay_prob
        row[successor[a]] += spec.script_prob
        trans[a] = row
    init = np.array([spec.important_initial_weight if t in important else 1.0 for t in range(k)])
    init /= init.sum()
    spec.importance = importance.tolist()
    return PlantedDomain(spec, vocab, synonyms, init, trans, important)


def _sentence(rng, words: list[str], spec: SynthSpec) -> list[str]:
    n = int(rng.integers(spec.min_words, spec.max_words + 1))
    p = 1.0 / np.arange(1, len(words) + 1) ** spec.zipf
    return [words[i] for i in rng.choice(len(words), n, p=p / p.sum())]


def _render(words: list[str]) -> str:
    return words[0].capitalize() + " " + " ".join(words[1:]) + "."


def _paraphrase(rng, words: list[str], synonyms: dict[str, str], rate: float) -> list[str]:
    out = list(words)
    k = int(round(rate * len(words)))
    for i in rng.choice(len(words), k, replace=False):
        out[i] = synonyms[out[i]]
    return out


def sample_pair(domain: PlantedDomain, rng: np.random.Generator, pair_id: str) -> tuple[dict, dict]:
    spec = domain.spec
    while True:
        m = int(rng.integers(spec.min_sentences, spec.max_sentences + 1))
        topics = [int(rng.choice(spec.num_topics, p=domain.initial))]
        for _ in range(m - 1):
            topics.append(int(rng.choice(spec.num_topics, p=domain.transitions[topics[-1]])))
        if any(t in domain.important for t in topics):
            break
    sentences = [_sentence(rng, domain.vocab[t], spec) for t in topics]
    gold = []
    seen: set[int] = set()
    for i, t in enumerate(topics):
        if t in domain.important and t not in seen:
            seen.add(t)
            gold.append(i)
    abstract = [_paraphrase(rng, sentences[i], domain.synonyms[topics[i]], spec.paraphrase_rate) for i in gold]
    record = {
        "id": pair_id,
        "domain": "synth",
        "article": " ".join(_render(s) for s in sentences),
        "abstract": " ".join(_render(s) for s in abstract),
    }
    sidecar = {"id": pair_id, "topics": topics, "gold": gold, "important": domain.important}
    return record, sidecar


def generate_corpus(spec: SynthSpec, n_pairs: int, prefix: str = "syn") -> tuple[list[dict], list[dict]]:
    """Corpus records (corpus JSON-lines schema) and their planted sidecar records."""
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    domain = plant(spec)
    rng = np.random.default_rng([spec.seed, 2])
    records, sidecars = [], []
    width = len(str(n_pairs - 1))
    for i in range(n_pairs):
        rec, side = sample_pair(domain, rng, f"{prefix}{i:0{width}d}")
        records.append(rec)
        sidecars.append(side)
    return records, sidecars


def sidecar_path(out: str | Path) -> Path:
    out = Path(out)
    name = out.name[: -len(".jsonl")] if out.name.endswith(".jsonl") else out.name
    return out.with_name(name + ".gold.jsonl")


def write_corpus(spec: SynthSpec, n_pairs: int, out: str | Path) -> tuple[Path, Path]:
    records, sidecars = generate_corpus(spec, n_pairs)
    out = Path(out)
    with open(out, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True) + "\n")
    side = sidecar_path(out)
    with open(side, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"spec": asdict(spec)}, sort_keys=True) + "\n")
        for s in sidecars:
            fh.write(json.dumps(s, sort_keys=True) + "\n")
    return out, side


def read_sidecar(path: str | Path) -> dict[str, dict]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            if "id" in rec:
                out[rec["id"]] = rec
    return out
