"""Auxiliary annotators consumed by the feature extractor.

Rule-based POS/NER taggers, word2vec text-format embeddings with a hashed
fallback for unknown words, and a context-window word-importance model.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from nextsum.nn import AdamConfig, AdamState, adam_step, sigmoid

POS_TAGS = ("NOUN", "VERB", "ADJ", "ADV", "PRON", "DET", "ADP", "NUM", "CONJ", "PRT", "PUNCT", "X")
NER_TAGS = ("PERSON", "LOCATION", "ORG", "NONE")

_PRON = set("i me my mine myself you your yours yourself he him his himself she her hers herself it its itself we us our ours ourselves they them their theirs themselves who whom whose what which this that these those".split())
_SUBJECT_PRON = set("i you he she it we they who".split())
_DET = set("a an the some any no every each all both either neither another such".split())
_ADP = set("of in on at by for with from into onto over under about after before between through during without within against among toward towards upon across behind beyond near since until via than like".split())
_CONJ = set("and or but nor yet so because although though while whereas if unless whether".split())
_PRT = set("to not n't 's up off out".split())
_ADV = set("very also just never always often now then here there too quite rather still already soon again almost even only however".split())
_VERBS = set(
    """is are was were be been being am has have had do does did will would shall should can could may might must
    said says say ran run runs hid hide went go goes came come got get made make took take left leave told tell
    saw see found find gave give knew know thought think killed kill died die fled flee won win lost lose met meet
    held hold became become began begin kept keep sent send fell fall led lead""".split()
)
_MODAL = set("will would shall should can could may might must to did does do".split())
_ADJ_SUFFIX = ("ous", "ful", "ive", "able", "ible", "less", "ical")
_NUMBER = re.compile(r"^[+-]?\d[\d,.:/]*(st|nd|rd|th|s)?$")
_NUM_WORDS = set("one two three four five six seven eight nine ten eleven twelve twenty thirty hundred thousand million billion".split())

_TITLES = set("mr. mrs. ms. dr. prof. sen. gov. gen. rep. col. lt. sgt. capt. maj. rev. president minister judge".split())
_LOCATIONS = set(
    """america american britain london paris moscow russia china beijing japan tokyo germany berlin france italy rome
    spain madrid israel jerusalem iraq baghdad iran tehran syria afghanistan kabul pakistan india egypt cairo lebanon
    beirut turkey ukraine kiev bosnia sarajevo serbia belgrade kosovo rwanda africa europe asia washington york
    texas california chicago boston canada mexico brazil petersburg u.s. u.k. u.n.""".split()
)
_ORG_SUFFIX = set("inc. corp. co. ltd. party ministry agency council committee court university company bank army police union association".split())


def pos_tag(tokens) -> list[str]:
    """Universal-style POS labels from lexicons, suffixes and the previous tag."""
    words = _surfaces(tokens)
    tags: list[str] = []
    for i, w in enumerate(words):
        lw = w.lower()
        prev = tags[-1] if tags else None
        prev_word = words[i - 1].lower() if i else ""
        if not any(c.isalnum() for c in w):
            tag = "PUNCT"
        elif _NUMBER.match(w) or lw in _NUM_WORDS:
            tag = "NUM"
        elif lw in _PRON:
            tag = "PRON"
        elif lw in _DET:
            tag = "DET"
        elif lw in _ADP:
            tag = "ADP"
        elif lw in _CONJ:
            tag = "CONJ"
        elif lw in _PRT:
            tag = "PRT"
        elif lw in _VERBS:
            tag = "VERB"
        elif lw in _ADV or (lw.endswith("ly") and len(lw) > 4):
            tag = "ADV"
        elif i and w[0].isupper():
            tag = "NOUN"
        elif lw.endswith(("ing", "ed")) and len(lw) > 4:
            tag = "VERB"
        elif lw.endswith(_ADJ_SUFFIX) and len(lw) > 5:
            tag = "ADJ"
        elif (prev == "PRON" and prev_word in _SUBJECT_PRON) or prev_word in _MODAL:
            tag = "VERB"
        elif not w.isalpha() and not any(c.isalpha() for c in w):
            tag = "X"
        else:
            tag = "NOUN"
        tags.append(tag)
    return tags


def ner_tag(tokens) -> list[str]:
    """Capitalization-run NER over {PERSON, LOCATION, ORG, NONE}."""
    words = _surfaces(tokens)
    tags = ["NONE"] * len(words)
    i = 0
    while i < len(words):
        if not _is_cap_word(words[i]):
            i += 1
            continue
        j = i
        while j < len(words) and _is_cap_word(words[j]):
            j += 1
        run = words[i:j]
        lowered = [w.lower() for w in run]
        after_title = i > 0 and words[i - 1].lower() in _TITLES
        if any(w in _LOCATIONS for w in lowered):
            for k, w in enumerate(lowered):
                tags[i + k] = "LOCATION" if w in _LOCATIONS else tags[i + k]
        elif lowered[-1] in _ORG_SUFFIX or any(len(w) > 1 and w.isupper() for w in run):
            tags[i:j] = ["ORG"] * (j - i)
        elif after_title or i > 0 or len(run) > 1:
            tags[i:j] = ["PERSON"] * (j - i)
        i = j
    return tags


def _is_cap_word(w: str) -> bool:
    return w[:1].isupper() and any(c.isalpha() for c in w) and w.lower() not in _TITLES and w.lower() not in _PRON and w.lower() not in _DET


def _surfaces(tokens) -> list[str]:
    if hasattr(tokens, "tokens"):
        tokens = tokens.tokens
    return [t if isinstance(t, str) else t.surface for t in tokens]


class EmbeddingError(ValueError):
    pass


@lru_cache(maxsize=200_000)
def _fallback(word: str, dim: int) -> np.ndarray:
    seed = int.from_bytes(hashlib.sha256(word.encode("utf-8")).digest()[:8], "little")
    v = np.random.default_rng(seed).standard_normal(dim)
    v /= np.linalg.norm(v)
    v.setflags(write=False)
    return v


@dataclass
class EmbeddingTable:
    """Word vectors; unknown words get a unit-norm vector seeded by a hash of the word."""

    dim: int = 300
    vectors: dict[str, np.ndarray] = field(default_factory=dict)
    source: str = "hash"

    def __getitem__(self, word: str) -> np.ndarray:
        v = self.vectors.get(word)
        if v is None:
            v = self.vectors.get(word.lower())
        if v is None:
            v = _fallback(word.lower(), self.dim)
        return v

    def __contains__(self, word: str) -> bool:
        return word in self.vectors


def load_embeddings(path: str | Path) -> EmbeddingTable:
    """Stream a word2vec text-format file (header line ``count dim``)."""
    vectors: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise EmbeddingError(f"{path}:1: expected header 'count dim'")
        dim = int(header[1])
        for lineno, line in enumerate(fh, 2):
            parts = line.rstrip().split(" ")
            if len(parts) <= 1:
                continue
            if len(parts) - 1 != dim:
                raise EmbeddingError(f"{path}:{lineno}: expected {dim} values, got {len(parts) - 1}")
            vec = np.array(parts[1:], dtype=np.float64)
            vec.setflags(write=False)
            vectors[parts[0]] = vec
    return EmbeddingTable(dim, vectors, source=str(path))


def embed_span(table: EmbeddingTable, tokens: Iterable[str]) -> np.ndarray:
    vecs = [table[w] for w in tokens]
    if not vecs:
        return np.zeros(table.dim)
    return np.mean(vecs, axis=0)


CONTEXT_OFFSETS = (-2, -1, 1, 2)


def context_matrix(words: Sequence[str], table: EmbeddingTable) -> np.ndarray:
    """Row j = concatenated embeddings of words j-2, j-1, j+1, j+2 (zeros off the edge)."""
    n, d = len(words), table.dim
    out = np.zeros((n, len(CONTEXT_OFFSETS) * d))
    vecs = [table[w] for w in words]
    for j in range(n):
        for k, off in enumerate(CONTEXT_OFFSETS):
            if 0 <= j + off < n:
                out[j, k * d:(k + 1) * d] = vecs[j + off]
    return out


@dataclass
class ImportanceModel:
    """Logistic model: P(word appears in the summary | its +-2 word context)."""

    weights: np.ndarray
    bias: float
    dim: int
    config: dict = field(default_factory=dict)

    def predict_words(self, words: Sequence[str], table: EmbeddingTable) -> np.ndarray:
        if table.dim != self.dim:
            raise EmbeddingError(f"importance model expects dim {self.dim}, table has {table.dim}")
        if not words:
            return np.zeros(0)
        return sigmoid(context_matrix(words, table) @ self.weights + self.bias)

    def to_json(self) -> dict:
        return {
            "version": 1,
            "kind": "importance",
            "dim": self.dim,
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "config": self.config,
        }

    @classmethod
    def from_json(cls, d: dict) -> "ImportanceModel":
        if d.get("kind") != "importance" or d.get("version") != 1:
            raise ValueError("not a version-1 importance model")
        return cls(np.array(d["weights"], dtype=np.float64), float(d["bias"]), int(d["dim"]), d.get("config", {}))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "ImportanceModel":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def train_importance(
    examples,
    table: EmbeddingTable,
    seed: int = 0,
    epochs: int = 8,
    lr: float = 0.01,
    batch_size: int = 256,
    max_examples: int = 60_000,
) -> ImportanceModel:
    """Fit the word-importance model.

    ``examples`` yields ``(article, gold)`` where ``gold.indices`` lists the
    extract's source sentences; a token is positive iff its lower-cased form
    occurs in one of those sentences.
    """
    vocab: dict[str, int] = {}
    ctx_rows, labels = [], []
    for article, gold in examples:
        gold_words = {w for i in set(gold.indices) for w in article.sentences[i].words}
        for sent in article.sentences:
            words = sent.words
            ids = [vocab.setdefault(w, len(vocab) + 1) for w in words]
            for j, w in enumerate(words):
                ctx_rows.append([ids[j + o] if 0 <= j + o < len(ids) else 0 for o in CONTEXT_OFFSETS])
                labels.append(1.0 if w in gold_words else 0.0)
    if not labels:
        raise ValueError("no training tokens for the importance model")
    rng = np.random.default_rng(seed)
    ctx = np.array(ctx_rows, dtype=np.int64)
    y = np.array(labels)
    if len(y) > max_examples:
        keep = np.sort(rng.choice(len(y), max_examples, replace=False))
        ctx, y = ctx[keep], y[keep]
    # row 0 is the zero vector for missing context positions
    emb = np.zeros((len(vocab) + 1, table.dim))
    for w, i in vocab.items():
        emb[i] = table[w]

    d = table.dim
    w = np.zeros(len(CONTEXT_OFFSETS) * d)
    b = np.zeros(1)
    cfg = AdamConfig(lr=lr)
    state = AdamState.for_params([w, b])
    for _ in range(epochs):
        order = rng.permutation(len(y))
        for start in range(0, len(y), batch_size):
            idx = order[start:start + batch_size]
            xb = emb[ctx[idx]].reshape(len(idx), -1)
            p = sigmoid(xb @ w + b[0])
            g = (p - y[idx]) / len(idx)
            adam_step([w, b], [xb.T @ g, np.array([g.sum()])], state, cfg)
    config = {"seed": seed, "epochs": epochs, "lr": lr, "batch_size": batch_size,
              "max_examples": max_examples, "n_examples": int(len(y))}
    return ImportanceModel(w, float(b[0]), d, config)


def sentence_importance(model, sentence, table: EmbeddingTable) -> tuple[float, float]:
    """Mean and max predicted word importance over the sentence."""
    words = sentence.words if hasattr(sentence, "words") else list(sentence)
    scores = model.predict_words(words, table)
    return float(np.mean(scores)), float(np.max(scores))
