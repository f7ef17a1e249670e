"""Summary generation: greedy next-sentence decoding and the content-model baselines."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from nextsum.content_model import ContentHmm, viterbi_decode
from nextsum.features import EOS, SummaryState
from nextsum.predictor import build_candidate_set, predict_next

SYSTEMS = ("nextsum", "nextsum-l", "lead", "chmm", "transition", "chmm-t")


@dataclass
class GeneratedSummary:
    id: str
    system: str
    indices: list[int]
    tokens: list[list[str]]
    reason: str
    steps: int = 0

    @property
    def words(self) -> int:
        return sum(len(t) for t in self.tokens)

    @property
    def text(self) -> str:
        return " ".join(" ".join(t) for t in self.tokens)

    def to_json(self) -> dict:
        return {"id": self.id, "system": self.system, "indices": self.indices,
                "text": self.text, "words": self.words, "reason": self.reason}


def _assemble(article, system: str, indices, reason: str, limit: int | None = None, steps: int = 0) -> GeneratedSummary:
    tokens = [article.sentences[i].surfaces for i in indices]
    if limit is not None:
        kept, total = [], 0
        for toks in tokens:
            if total >= limit:
                break
            kept.append(toks[: limit - total])
            total += len(kept[-1])
        tokens = kept
        indices = list(indices)[: len(tokens)]
    return GeneratedSummary(article.id, system, list(indices), tokens, reason, steps)


def generate(model, article, limit: int | None = None, view=None) -> GeneratedSummary:
    """Repeated next-sentence prediction until EOS; with ``limit`` the NextSum_L variant.

    NextSum_L stops as soon as the summary reaches ``limit`` words and cuts
    the last sentence so the total is exactly ``limit``.
    """
    if limit is not None and limit < 1:
        raise ValueError("length limit must be >= 1")
    view = view if view is not None else model.view(article)
    state = SummaryState()
    reason = "exhaustion"
    steps = 0
    while True:
        cands = build_candidate_set(article, state, model.k, "infer")
        steps += 1
        choice = predict_next(model, view, state, cands)
        if choice == EOS:
            reason = "EOS" if cands.indices else "exhaustion"
            break
        if state.indices and choice <= state.last:
            raise AssertionError("generator broke the subsequence property")
        state.append(choice, len(article.sentences[choice]))
        if limit is not None and state.words >= limit:
            reason = "length-cap"
            break
    state.terminated = True
    system = "nextsum" if limit is None else "nextsum-l"
    return _assemble(article, system, state.indices, reason, limit, steps)


def generate_with_limit(model, article, limit: int, view=None) -> GeneratedSummary:
    return generate(model, article, limit, view)


def lead_baseline(article, k: int) -> GeneratedSummary:
    """First ``k`` words of the article."""
    if k < 1:
        raise ValueError("k must be >= 1")
    indices, total = [], 0
    for i, s in enumerate(article.sentences):
        if total >= k:
            break
        indices.append(i)
        total += len(s)
    reason = "length-cap" if total >= k else "exhaustion"
    return _assemble(article, "lead", indices, reason, k)


@dataclass
class TopicImportance:
    scores: list[float]

    def __getitem__(self, topic: int) -> float:
        return self.scores[topic]

    def to_json(self) -> dict:
        return {"scores": self.scores}


def topic_importance(hmm: ContentHmm, items) -> TopicImportance:
    """P(topic in summary | topic in article) over ``items`` = [(article, gold)].

    The gold extract is decoded as its own sentence sequence.
    """
    in_article = np.zeros(hmm.num_topics)
    in_both = np.zeros(hmm.num_topics)
    for article, gold in items:
        art_topics = set(viterbi_decode(hmm, article.sentences).topics)
        extract = [article.sentences[i] for i in gold.targets()]
        sum_topics = set(viterbi_decode(hmm, extract).topics) if extract else set()
        for v in art_topics:
            in_article[v] += 1
            if v in sum_topics:
                in_both[v] += 1
    scores = np.divide(in_both, in_article, out=np.zeros_like(in_both), where=in_article > 0)
    return TopicImportance(scores.tolist())


def chmm_baseline(hmm: ContentHmm, importance: TopicImportance, article, k: int, seed: int = 0) -> GeneratedSummary:
    """One random sentence per topic, most important topics first, until ``k`` words."""
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = np.random.default_rng([seed, _id_seed(article.id)])
    topics = viterbi_decode(hmm, article.sentences).topics
    order = sorted(range(hmm.num_topics), key=lambda v: (-importance[v], v))
    chosen, total = [], 0
    for v in order:
        if total >= k:
            break
        members = [i for i, t in enumerate(topics) if t == v]
        if not members:
            continue
        pick = int(members[int(rng.integers(len(members)))])
        chosen.append(pick)
        total += len(article.sentences[pick])
    reason = "length-cap" if total >= k else "exhaustion"
    return _assemble(article, "chmm", sorted(chosen), reason, k)


def _greedy_topic(hmm: ContentHmm, article, k: int, window: int, weights, system: str) -> GeneratedSummary:
    if k < 1:
        raise ValueError("k must be >= 1")
    topics = viterbi_decode(hmm, article.sentences).topics
    init = np.exp(hmm.log_initial)
    trans = np.exp(hmm.log_trans)
    state = SummaryState()
    reason = "exhaustion"
    steps = 0
    while True:
        cands = build_candidate_set(article, state, window, "infer").indices
        steps += 1
        if not cands:
            break
        if state.last is None:
            scores = [init[topics[i]] * weights[topics[i]] for i in cands]
        else:
            prev = topics[state.last]
            scores = [trans[prev, topics[i]] * weights[topics[i]] for i in cands]
        best = max(scores)
        choice = cands[scores.index(best)]
        state.append(choice, len(article.sentences[choice]))
        if state.words >= k:
            reason = "length-cap"
            break
    return _assemble(article, system, state.indices, reason, k, steps)


def transition_baseline(hmm: ContentHmm, article, k: int, window: int = 10) -> GeneratedSummary:
    """Greedy argmax of P(topic(s) | topic(last)) over the next-``window`` candidates."""
    return _greedy_topic(hmm, article, k, window, np.ones(hmm.num_topics), "transition")


def chmm_t_baseline(hmm: ContentHmm, importance: TopicImportance, article, k: int, window: int = 10) -> GeneratedSummary:
    return _greedy_topic(hmm, article, k, window, np.asarray(importance.scores), "chmm-t")


def oracle_summary(article, gold, k: int | None = None) -> GeneratedSummary:
    """The aligned gold extract in abstract order, optionally cut to ``k`` words."""
    return _assemble(article, "oracle", gold.targets(), "EOS", k)


def _id_seed(pair_id: str) -> int:
    return int.from_bytes(hashlib.sha256(pair_id.encode("utf-8")).digest()[:8], "little")


def write_summaries(path, summaries) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in summaries:
            fh.write(json.dumps(s.to_json()) + "\n")


def read_summaries(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
