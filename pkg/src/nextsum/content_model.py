"""Domain content model: an HMM over sentences whose states are topics.

Each topic emits sentences from its own add-delta smoothed bigram language
model. Training is hard EM (Viterbi decode, then re-estimate from counts),
initialised by k-medoids clustering of sentences on unigram cosine.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.special import logsumexp

FORMAT_VERSION = 1


class ContentModelError(ValueError):
    pass


@dataclass
class TopicDecode:
    topics: list[int]
    logprob: float


@dataclass
class ContentHmm:
    """Topic HMM.

    Word ids ``0..V-1`` are vocabulary words, ``V`` is UNK. As a predicted
    symbol ``V+1`` is end-of-sentence; as a context it is start-of-sentence.
    Emission tables hold log-probabilities: ``pair_logp[r, t]`` for the bigram
    ``pair_keys[r]`` under topic ``t`` and ``unseen_logp[prev, t]`` for any
    bigram not listed.
    """

    vocab: list[str]
    log_initial: np.ndarray
    log_trans: np.ndarray
    pair_keys: np.ndarray
    pair_logp: np.ndarray
    unseen_logp: np.ndarray
    delta: float = 0.01
    history: dict = field(default_factory=dict)

    def __post_init__(self):
        self.word_index = {w: i for i, w in enumerate(self.vocab)}
        self.pair_index = {(int(a), int(b)): r for r, (a, b) in enumerate(self.pair_keys)}

    @property
    def num_topics(self) -> int:
        return len(self.log_initial)

    @property
    def unk(self) -> int:
        return len(self.vocab)

    @property
    def boundary(self) -> int:
        return len(self.vocab) + 1

    @property
    def num_symbols(self) -> int:
        return len(self.vocab) + 2

    def encode(self, words: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
        """(context ids, predicted ids) of the sentence's bigrams including boundaries."""
        ids = [self.word_index.get(w, self.unk) for w in words]
        return np.array([self.boundary] + ids), np.array(ids + [self.boundary])

    def emission_matrix(self, sentences) -> np.ndarray:
        """log P(s | topic) for each sentence (rows) and topic (columns)."""
        if not sentences:
            return np.zeros((0, self.num_topics))
        prevs, rows, offsets = [], [], []
        for s in sentences:
            words = _words(s)
            if not words:
                raise ContentModelError("empty sentence")
            p, n = self.encode(words)
            offsets.append(len(prevs))
            prevs.extend(p.tolist())
            rows.extend(self.pair_index.get((a, b), -1) for a, b in zip(p.tolist(), n.tolist()))
        prevs_a, rows_a = np.array(prevs), np.array(rows)
        vals = np.where((rows_a >= 0)[:, None], self.pair_logp[np.maximum(rows_a, 0)], self.unseen_logp[prevs_a])
        return np.add.reduceat(vals, np.array(offsets), axis=0)

    def conditional(self, prev: str | None) -> np.ndarray:
        """Full distribution over next symbols (vocab, UNK, end) after ``prev``; None = sentence start."""
        ctx = self.boundary if prev is None else self.word_index.get(prev, self.unk)
        out = np.repeat(np.exp(self.unseen_logp[ctx])[None, :], self.num_symbols, axis=0)
        for r, (a, b) in enumerate(self.pair_keys):
            if a == ctx:
                out[b] = np.exp(self.pair_logp[r])
        return out

    def to_json(self) -> dict:
        return {
            "version": FORMAT_VERSION,
            "num_topics": self.num_topics,
            "delta": self.delta,
            "vocab": self.vocab,
            "initial": self.log_initial.tolist(),
            "transitions": self.log_trans.tolist(),
            "emissions": {
                "pairs": self.pair_keys.tolist(),
                "logp": self.pair_logp.tolist(),
                "unseen": self.unseen_logp.tolist(),
            },
            "history": self.history,
        }

    @classmethod
    def from_json(cls, d: dict) -> "ContentHmm":
        if d.get("version") != FORMAT_VERSION:
            raise ContentModelError(f"unsupported content model version {d.get('version')}")
        em = d["emissions"]
        t = d["num_topics"]
        return cls(
            list(d["vocab"]),
            np.array(d["initial"], dtype=np.float64),
            np.array(d["transitions"], dtype=np.float64),
            np.array(em["pairs"], dtype=np.int64).reshape(-1, 2),
            np.array(em["logp"], dtype=np.float64).reshape(-1, t),
            np.array(em["unseen"], dtype=np.float64).reshape(-1, t),
            float(d["delta"]),
            d.get("history", {}),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "ContentHmm":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def _words(s) -> list[str]:
    return s.words if hasattr(s, "words") else list(s)


def sentence_emission_logprob(hmm: ContentHmm, topic: int, sentence) -> float:
    return float(hmm.emission_matrix([sentence])[0, topic])


def sentence_marginal_log(hmm: ContentHmm, sentence) -> float:
    return float(logsumexp(hmm.emission_matrix([sentence])[0]))


def sentence_marginal(hmm: ContentHmm, sentence) -> float:
    """P(s) = sum over topics of P(s | topic)."""
    return math.exp(sentence_marginal_log(hmm, sentence))


def viterbi(log_initial: np.ndarray, log_trans: np.ndarray, emissions: np.ndarray) -> TopicDecode:
    """Most likely topic path given a (sentences x topics) emission log-prob matrix.

    ``np.argmax`` returns the first maximum, so ties go to the lower topic.
    """
    n = emissions.shape[0]
    if n == 0:
        raise ContentModelError("cannot decode an empty sentence sequence")
    score = log_initial + emissions[0]
    back = np.zeros((n, len(log_initial)), dtype=np.int64)
    for i in range(1, n):
        cand = score[:, None] + log_trans
        back[i] = np.argmax(cand, axis=0)
        score = cand[back[i], np.arange(cand.shape[1])] + emissions[i]
    best = int(np.argmax(score))
    path = [best]
    for i in range(n - 1, 0, -1):
        path.append(int(back[i, path[-1]]))
    path.reverse()
    return TopicDecode(path, float(score[best]))


def viterbi_decode(hmm: ContentHmm, sentences) -> TopicDecode:
    return viterbi(hmm.log_initial, hmm.log_trans, hmm.emission_matrix(list(sentences)))


class _Encoded:
    """Training sentences flattened into bigram rows, shared across EM iterations."""

    def __init__(self, articles, vocab: list[str]):
        word_index = {w: i for i, w in enumerate(vocab)}
        unk, bnd = len(vocab), len(vocab) + 1
        self.article_lengths = []
        pair_index: dict[tuple[int, int], int] = {}
        prevs, rows, sent_of_pair = [], [], []
        self.sent_words: list[list[str]] = []
        for art in articles:
            sents = art.sentences if hasattr(art, "sentences") else art
            self.article_lengths.append(len(sents))
            for s in sents:
                words = _words(s)
                ids = [word_index.get(w, unk) for w in words]
                k = len(self.sent_words)
                self.sent_words.append(words)
                for a, b in zip([bnd] + ids, ids + [bnd]):
                    prevs.append(a)
                    rows.append(pair_index.setdefault((a, b), len(pair_index)))
                    sent_of_pair.append(k)
        self.pair_keys = np.array(list(pair_index), dtype=np.int64).reshape(-1, 2)
        self.prevs = np.array(prevs)
        self.rows = np.array(rows)
        self.sent_of_pair = np.array(sent_of_pair)
        self.offsets = np.searchsorted(self.sent_of_pair, np.arange(len(self.sent_words)))
        self.starts = np.cumsum([0] + self.article_lengths[:-1])
        self.num_sentences = len(self.sent_words)


def _estimate(enc: _Encoded, vocab, assign: np.ndarray, k: int, delta: float, history=None) -> ContentHmm:
    n_sym = len(vocab) + 2
    n_ctx = len(vocab) + 2
    topic_of_pair = assign[enc.sent_of_pair]
    pc = np.zeros((len(enc.pair_keys), k))
    np.add.at(pc, (enc.rows, topic_of_pair), 1.0)
    cc = np.zeros((n_ctx, k))
    np.add.at(cc, (enc.prevs, topic_of_pair), 1.0)
    denom = np.log(cc + delta * n_sym)
    pair_logp = np.log(pc + delta) - denom[enc.pair_keys[:, 0]]
    unseen_logp = math.log(delta) - denom

    trans = np.ones((k, k))
    init = np.ones(k)
    for start, length in zip(enc.starts, enc.article_lengths):
        seq = assign[start:start + length]
        init[seq[0]] += 1
        np.add.at(trans, (seq[:-1], seq[1:]), 1.0)
    log_trans = np.log(trans) - np.log(trans.sum(axis=1, keepdims=True))
    log_init = np.log(init) - math.log(init.sum())
    return ContentHmm(list(vocab), log_init, log_trans, enc.pair_keys, pair_logp, unseen_logp, delta,
                      history if history is not None else {})


def _log_prior(hmm: ContentHmm) -> float:
    """Log Dirichlet prior (up to a constant) whose MAP estimate is the smoothed count ratio."""
    total = float(hmm.log_initial.sum() + hmm.log_trans.sum())
    # per context: listed bigrams + (num_symbols - listed) unseen ones
    listed = np.zeros((hmm.unseen_logp.shape[0], hmm.num_topics))
    np.add.at(listed, hmm.pair_keys[:, 0], hmm.pair_logp)
    n_listed = np.bincount(hmm.pair_keys[:, 0], minlength=hmm.unseen_logp.shape[0])[:, None]
    em = listed + (hmm.num_symbols - n_listed) * hmm.unseen_logp
    return total + hmm.delta * float(em.sum())


def _decode_all(hmm: ContentHmm, enc: _Encoded) -> tuple[np.ndarray, float]:
    # every training bigram is listed in the model's pair table
    em = np.add.reduceat(hmm.pair_logp[enc.rows], enc.offsets, axis=0)
    assign = np.empty(enc.num_sentences, dtype=np.int64)
    total = 0.0
    for start, length in zip(enc.starts, enc.article_lengths):
        dec = viterbi(hmm.log_initial, hmm.log_trans, em[start:start + length])
        assign[start:start + length] = dec.topics
        total += dec.logprob
    return assign, total


def _sentence_vectors(enc: _Encoded, vocab) -> sp.csr_matrix:
    """L2-normalised unigram counts; punctuation-only tokens are left out."""
    word_index = {w: i for i, w in enumerate(vocab)}
    data, indices, indptr = [], [], [0]
    for words in enc.sent_words:
        c = Counter(word_index[w] for w in words if w in word_index and any(ch.isalnum() for ch in w))
        for j in sorted(c):
            indices.append(j)
            data.append(float(c[j]))
        indptr.append(len(indices))
    x = sp.csr_matrix((data, indices, indptr), shape=(enc.num_sentences, max(1, len(vocab))))
    norms = np.sqrt(np.asarray(x.multiply(x).sum(axis=1)).ravel())
    return sp.diags(np.where(norms > 0, 1.0 / np.maximum(norms, 1e-300), 0.0)) @ x


def _kmedoids_once(sim: np.ndarray, k: int, rng: np.random.Generator, iters: int) -> tuple[list[int], float]:
    n = sim.shape[0]
    # k-medoids++ seeding on distance 1 - cosine
    medoids = [int(rng.integers(n))]
    for _ in range(1, k):
        dist = np.clip(1.0 - sim[:, medoids].max(axis=1), 0.0, None)
        dist[medoids] = 0.0
        if dist.sum() <= 0:
            medoids.append(next(i for i in range(n) if i not in medoids))
            continue
        medoids.append(int(rng.choice(n, p=(dist**2) / (dist**2).sum())))
    for _ in range(iters):
        labels = np.argmax(sim[:, medoids], axis=1)
        new = []
        for c in range(k):
            members = np.flatnonzero(labels == c)
            if len(members) == 0:
                new.append(medoids[c])
                continue
            within = sim[np.ix_(members, members)].sum(axis=1)
            new.append(int(members[np.argmax(within)]))
        if new == medoids:
            break
        medoids = new
    return medoids, float(sim[:, medoids].max(axis=1).sum())


def _kmedoids(enc: _Encoded, vocab, k: int, rng: np.random.Generator, sample: int,
              restarts: int = 8, iters: int = 30) -> np.ndarray:
    """Cluster sentences; the restart with the highest total similarity to its medoids wins."""
    x = _sentence_vectors(enc, vocab)
    n = enc.num_sentences
    pool = np.sort(rng.choice(n, sample, replace=False)) if n > sample else np.arange(n)
    xs = x[pool]
    sim = (xs @ xs.T).toarray()
    best = None
    for _ in range(restarts):
        medoids, score = _kmedoids_once(sim, k, rng, iters)
        if best is None or score > best[1]:
            best = (medoids, score)
    centers = xs[best[0]]
    return np.asarray(np.argmax((x @ centers.T).toarray(), axis=1)).ravel().astype(np.int64)


def build_cm_vocab(articles, unk_cutoff: int) -> list[str]:
    counts: Counter[str] = Counter()
    for art in articles:
        for s in (art.sentences if hasattr(art, "sentences") else art):
            counts.update(_words(s))
    return sorted(w for w, c in counts.items() if c >= unk_cutoff)


def train_content_model(
    articles,
    num_topics: int,
    seed: int = 0,
    max_iters: int = 20,
    delta: float = 0.01,
    unk_cutoff: int = 2,
    init_sample: int = 2000,
) -> ContentHmm:
    """Hard-EM training.

    ``history`` records, per iteration, the Viterbi log-likelihood of the
    training articles and the smoothed objective (log-likelihood plus the
    log prior implied by the smoothing), which is non-decreasing.
    """
    if num_topics < 1:
        raise ContentModelError("num_topics must be >= 1")
    articles = list(articles)
    vocab = build_cm_vocab(articles, unk_cutoff)
    enc = _Encoded(articles, vocab)
    if enc.num_sentences < num_topics:
        raise ContentModelError(f"{num_topics} topics but only {enc.num_sentences} training sentences")
    rng = np.random.default_rng(seed)
    if num_topics == 1:
        assign = np.zeros(enc.num_sentences, dtype=np.int64)
    else:
        assign = _kmedoids(enc, vocab, num_topics, rng, init_sample)
    hmm = _estimate(enc, vocab, assign, num_topics, delta)
    loglik, objective = [], []
    converged = False
    for _ in range(max_iters):
        new_assign, ll = _decode_all(hmm, enc)
        loglik.append(ll)
        objective.append(ll + _log_prior(hmm))
        if np.array_equal(new_assign, assign):
            converged = True
            break
        assign = new_assign
        hmm = _estimate(enc, vocab, assign, num_topics, delta)
    hmm.history = {
        "seed": seed,
        "max_iters": max_iters,
        "unk_cutoff": unk_cutoff,
        "converged": converged,
        "loglik": loglik,
        "objective": objective,
    }
    return hmm


def corpus_loglik(hmm: ContentHmm, articles) -> float:
    return sum(viterbi_decode(hmm, a.sentences if hasattr(a, "sentences") else a).logprob for a in articles)


def select_num_topics(train, dev, candidates, seed: int = 0, **kw) -> tuple[int, ContentHmm]:
    """Train one model per candidate count; keep the best dev Viterbi log-likelihood (ties: fewer topics)."""
    candidates = sorted(set(candidates))
    if not candidates:
        raise ContentModelError("empty topic-count range")
    best = None
    for k in candidates:
        hmm = train_content_model(train, k, seed=seed, **kw)
        ll = corpus_loglik(hmm, dev)
        hmm.history["dev_loglik"] = ll
        if best is None or ll > best[0]:
            best = (ll, k, hmm)
    return best[1], best[2]
