"""Map abstract sentences onto source sentences to obtain extractive gold sequences."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from nextsum.corpus import AbstractSummary, Article


@dataclass(frozen=True)
class ExtractiveGold:
    id: str
    indices: tuple[int, ...]
    eos: bool = True

    def targets(self) -> list[int]:
        """Gold indices with repeats removed; a repeated sentence cannot be a positive twice."""
        seen: set[int] = set()
        out = []
        for i in self.indices:
            if i not in seen:
                seen.add(i)
                out.append(i)
        return out

    def to_json(self) -> dict:
        return {"id": self.id, "indices": list(self.indices), "eos": True}

    @classmethod
    def from_json(cls, d: dict) -> "ExtractiveGold":
        return cls(d["id"], tuple(int(i) for i in d["indices"]))


def _cosine_counts(a: Counter, b: Counter) -> float:
    if len(a) > len(b):
        a, b = b, a
    dot = sum(c * b.get(w, 0) for w, c in a.items())
    if dot == 0:
        return 0.0
    # integer products keep identical vectors at exactly 1.0
    norm2 = sum(c * c for c in a.values()) * sum(c * c for c in b.values())
    return min(1.0, dot / math.sqrt(norm2))


def cosine_unigram(p, q) -> float:
    """Cosine between lower-cased unigram count vectors of two sentences (or word lists)."""
    pw = p.words if hasattr(p, "words") else p
    qw = q.words if hasattr(q, "words") else q
    return _cosine_counts(Counter(pw), Counter(qw))


def align(abstract: AbstractSummary, article: Article) -> ExtractiveGold:
    """For every abstract sentence independently pick the most similar source sentence.

    Ties go to the lowest source index.
    """
    source = [Counter(s.words) for s in article.sentences]
    out = []
    for a in abstract.sentences:
        ac = Counter(a.words)
        best, best_sim = 0, -1.0
        for j, sc in enumerate(source):
            sim = _cosine_counts(ac, sc)
            if sim > best_sim:
                best, best_sim = j, sim
        out.append(best)
    return ExtractiveGold(article.id, tuple(out))


def write_gold(path: str | Path, golds: Iterable[ExtractiveGold]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for g in golds:
            fh.write(json.dumps(g.to_json()) + "\n")


def read_gold(path: str | Path) -> dict[str, ExtractiveGold]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                g = ExtractiveGold.from_json(json.loads(line))
                out[g.id] = g
    return out
