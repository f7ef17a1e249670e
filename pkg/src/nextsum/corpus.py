"""Corpus ingestion: tokenization, sentence segmentation, splits and vocabulary."""

from __future__ import annotations

import json
import math
import random
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence


class CorpusError(ValueError):
    """Raised for malformed corpus input."""


@dataclass(frozen=True)
class Token:
    surface: str
    pos: str = "X"
    ner: str = "NONE"

    @property
    def lower(self) -> str:
        return self.surface.lower()


@dataclass(frozen=True)
class Sentence:
    index: int
    tokens: tuple[Token, ...]

    @property
    def words(self) -> list[str]:
        return [t.lower for t in self.tokens]

    @property
    def surfaces(self) -> list[str]:
        return [t.surface for t in self.tokens]

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class Article:
    id: str
    sentences: tuple[Sentence, ...]
    domain: str = ""

    @property
    def num_words(self) -> int:
        return sum(len(s) for s in self.sentences)

    def __len__(self) -> int:
        return len(self.sentences)


@dataclass(frozen=True)
class AbstractSummary:
    id: str
    sentences: tuple[Sentence, ...]

    @property
    def num_words(self) -> int:
        return sum(len(s) for s in self.sentences)


Pair = tuple[Article, AbstractSummary]


@dataclass
class Vocabulary:
    counts: dict[str, int]
    top: list[str]
    total: int

    def to_json(self) -> dict:
        return {"top": self.top, "total": self.total}


@dataclass
class DatasetSplit:
    train: list[Pair] = field(default_factory=list)
    dev: list[Pair] = field(default_factory=list)
    test: list[Pair] = field(default_factory=list)


# Kept attached to their trailing period; never end a sentence.
ABBREVIATIONS = frozenset(
    """mr mrs ms dr prof sr jr st mt gen gov sen rep col lt sgt capt maj rev
    inc corp co ltd jan feb mar apr aug sept oct nov dec vs etc fig ft""".split()
)
TERMINALS = frozenset(".!?")
CLOSERS = frozenset("\"')]}”’")
OPENERS = frozenset("\"'([{“‘")


def _is_abbreviation(core: str) -> bool:
    if not core:
        return False
    if core.lower() in ABBREVIATIONS:
        return True
    # initials ("A.") and dotted forms ("U.S.")
    if len(core) == 1 and core.isalpha() and core.isupper():
        return True
    return "." in core and all(part.isalpha() for part in core.split(".") if part)


def tokenize_chunk(chunk: str) -> list[str]:
    """Split one whitespace-delimited chunk into tokens by detaching edge punctuation."""
    out = []
    start = 0
    while start < len(chunk) and not chunk[start].isalnum():
        out.append(chunk[start])
        start += 1
    if start == len(chunk):
        return out
    end = len(chunk)
    while not chunk[end - 1].isalnum():
        end -= 1
    core, trailing = chunk[start:end], chunk[end:]
    if trailing.startswith(".") and _is_abbreviation(core):
        core += "."
        trailing = trailing[1:]
    out.append(core)
    out.extend(trailing)
    return out


def _starts_upper(tok: str) -> bool:
    return bool(tok) and tok[0].isupper()


def split_sentences(text: str) -> list[list[str]]:
    """Tokenize ``text`` and group the tokens into sentences."""
    chunks = [tokenize_chunk(c) for c in text.split()]
    chunks = [c for c in chunks if c]
    sentences: list[list[str]] = []
    current: list[str] = []
    for ci, toks in enumerate(chunks):
        current.extend(toks)
        # terminal punctuation, possibly followed by closing quotes/brackets
        j = len(toks) - 1
        while j > 0 and toks[j] in CLOSERS:
            j -= 1
        if toks[j] not in TERMINALS:
            continue
        if ci + 1 == len(chunks):
            break
        nxt = chunks[ci + 1]
        k = 0
        while k < len(nxt) - 1 and nxt[k] in OPENERS:
            k += 1
        if _starts_upper(nxt[k]):
            sentences.append(current)
            current = []
    if current:
        sentences.append(current)
    return sentences


Tagger = Callable[[Sequence[str]], list[str]]


def segment_and_tokenize(
    text: str, pos_tagger: Tagger | None = None, ner_tagger: Tagger | None = None
) -> list[Sentence]:
    """Return the sentences of ``text`` with POS and NER labels attached.

    Taggers default to the rule-based ones in :mod:`nextsum.annotate`.
    """
    if not text or not text.strip():
        raise CorpusError("cannot segment empty text")
    if pos_tagger is None or ner_tagger is None:
        from nextsum import annotate

        pos_tagger = pos_tagger or annotate.pos_tag
        ner_tagger = ner_tagger or annotate.ner_tag
    out = []
    for i, surfaces in enumerate(split_sentences(text)):
        pos = pos_tagger(surfaces)
        ner = ner_tagger(surfaces)
        out.append(Sentence(i, tuple(Token(s, p, n) for s, p, n in zip(surfaces, pos, ner))))
    return out


def make_pair(record: dict) -> Pair:
    for key in ("id", "article", "abstract"):
        if key not in record:
            raise CorpusError(f"missing field {key!r}")
        if not isinstance(record[key], str) or not record[key].strip():
            raise CorpusError(f"field {key!r} is empty")
    art = Article(record["id"], tuple(segment_and_tokenize(record["article"])), record.get("domain", ""))
    abst = AbstractSummary(record["id"], tuple(segment_and_tokenize(record["abstract"])))
    return art, abst


def load_corpus(path: str | Path, format: str = "jsonl") -> list[Pair]:
    """Parse a JSON-lines corpus into (article, abstract) pairs, preserving order."""
    if format != "jsonl":
        raise CorpusError(f"unsupported corpus format {format!r}")
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                if not isinstance(record, dict):
                    raise CorpusError("record is not an object")
                pairs.append(make_pair(record))
            except (json.JSONDecodeError, CorpusError) as exc:
                raise CorpusError(f"{path}:{lineno}: {exc}") from exc
    if not pairs:
        raise CorpusError(f"{path}: empty corpus")
    return pairs


def split_dataset(
    pairs: Sequence[Pair], ratios: tuple[float, float, float] = (0.8, 0.1, 0.1), seed: int = 0
) -> DatasetSplit:
    """Shuffle with ``seed`` and cut into train/dev/test; rounding remainder goes to train."""
    if len(pairs) < 3:
        raise CorpusError("need at least 3 pairs to split")
    if abs(sum(ratios) - 1.0) > 1e-9 or min(ratios) < 0:
        raise CorpusError(f"bad split ratios {ratios}")
    n = len(pairs)
    order = list(range(n))
    random.Random(seed).shuffle(order)
    n_dev = math.floor(ratios[1] * n + 1e-9)
    n_test = math.floor(ratios[2] * n + 1e-9)
    n_train = n - n_dev - n_test
    picked = [pairs[i] for i in order]
    return DatasetSplit(
        picked[:n_train], picked[n_train:n_train + n_dev], picked[n_train + n_dev:]
    )


def build_vocabulary(articles: Iterable[Article], top_n: int = 1000) -> Vocabulary:
    counts: Counter[str] = Counter()
    for art in articles:
        for sent in art.sentences:
            counts.update(sent.words)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return Vocabulary(dict(counts), [w for w, _ in ranked[:top_n]], sum(counts.values()))
