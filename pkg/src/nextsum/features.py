"""Fixed-layout feature vectors for (article, partial summary, candidate).

Per-article quantities are computed once in :class:`ArticleView`; the
partial-summary dependent parts are assembled per candidate.
"""

from __future__ import annotations

import bisect
import hashlib
import json
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from nextsum.annotate import NER_TAGS, POS_TAGS, EmbeddingTable
from nextsum.content_model import ContentHmm

EOS = -1
LOG_FLOOR = -50.0
NUM_BINS = 5
KL_DELTA = 0.1


class ManifestError(ValueError):
    """Feature layout or resources disagree with what a model was trained on."""


def fingerprint(obj) -> str:
    if hasattr(obj, "to_json"):
        obj = obj.to_json()
    blob = json.dumps(obj, sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class SummaryState:
    """Partial summary: selected source indices in selection order."""

    indices: list[int] = field(default_factory=list)
    words: int = 0
    terminated: bool = False

    @property
    def last(self) -> int | None:
        return self.indices[-1] if self.indices else None

    def __len__(self) -> int:
        return len(self.indices)

    def append(self, index: int, num_words: int) -> None:
        if self.terminated:
            raise ValueError("summary already terminated")
        self.indices.append(index)
        self.words += num_words

    @classmethod
    def from_indices(cls, indices, article) -> "SummaryState":
        return cls(list(indices), sum(len(article.sentences[i]) for i in indices))


def position_bin(i: int, m: int) -> int:
    return min(NUM_BINS - 1, (NUM_BINS * i) // m)


def length_bin(value: float, cuts: list[float]) -> int:
    return min(NUM_BINS - 1, bisect.bisect_right(cuts, value))


def quintile_cuts(values) -> list[float]:
    return [float(q) for q in np.quantile(np.asarray(values, dtype=np.float64), [0.2, 0.4, 0.6, 0.8])]


def kl_coverage(source_words, summary_words, delta: float = KL_DELTA) -> float:
    """KL(source || summary) between add-delta unigram LMs over the source vocabulary."""
    src = Counter(source_words)
    if not src:
        raise ValueError("empty source")
    summ = Counter(w for w in summary_words if w in src)
    v = len(src)
    n_src = sum(src.values())
    n_sum = sum(summ.values())
    total = 0.0
    for w, c in src.items():
        p = (c + delta) / (n_src + delta * v)
        q = (summ.get(w, 0) + delta) / (n_sum + delta * v)
        total += p * math.log(p / q)
    return max(0.0, total)


@dataclass
class FeatureManifest:
    num_topics: int
    embedding_dim: int
    top_words: list[str]
    word_cuts: list[float]
    sentence_cuts: list[float]
    hmm_fingerprint: str
    importance_fingerprint: str | None = None
    embedding_source: str = "hash"

    @property
    def blocks(self) -> list[tuple[str, int]]:
        t, d, w = self.num_topics, self.embedding_dim, len(self.top_words)
        return [
            ("topic_source", t),
            ("topic_summary", t),
            ("topic_candidate", t + 1),
            ("topic_emission", t),
            ("topic_transition", 1),
            ("topic_marginal", 1),
            ("emb_source", d),
            ("emb_summary", d),
            ("emb_candidate", d),
            ("top_words_s", w),
            ("top_words_prev", w),
            ("pos_s", len(POS_TAGS)),
            ("pos_prev", len(POS_TAGS)),
            ("ner_s", len(NER_TAGS)),
            ("ner_prev", len(NER_TAGS)),
            ("redundancy_cos", 3),
            ("redundancy_overlap", 2),
            ("position_last", NUM_BINS),
            ("position_candidate", NUM_BINS),
            ("position_distance", 1),
            ("length_source_words", NUM_BINS),
            ("length_source_sentences", NUM_BINS),
            ("length_summary_words", 1),
            ("length_summary_sentences", 1),
            ("coverage_kl", 1),
            ("importance_unigram", 1),
            ("importance_model", 2),
            ("eos", 1),
        ]

    @property
    def slices(self) -> dict[str, slice]:
        out, start = {}, 0
        for name, dim in self.blocks:
            out[name] = slice(start, start + dim)
            start += dim
        return out

    @property
    def dim(self) -> int:
        return sum(d for _, d in self.blocks)

    def to_json(self) -> dict:
        return {
            "num_topics": self.num_topics,
            "embedding_dim": self.embedding_dim,
            "top_words": self.top_words,
            "word_cuts": self.word_cuts,
            "sentence_cuts": self.sentence_cuts,
            "hmm_fingerprint": self.hmm_fingerprint,
            "importance_fingerprint": self.importance_fingerprint,
            "embedding_source": self.embedding_source,
            "blocks": [[n, d] for n, d in self.blocks],
            "dim": self.dim,
        }

    @classmethod
    def from_json(cls, d: dict) -> "FeatureManifest":
        m = cls(
            d["num_topics"], d["embedding_dim"], list(d["top_words"]), list(d["word_cuts"]),
            list(d["sentence_cuts"]), d["hmm_fingerprint"], d.get("importance_fingerprint"),
            d.get("embedding_source", "hash"),
        )
        if [list(b) for b in d.get("blocks", [])] != [[n, k] for n, k in m.blocks] or d.get("dim") != m.dim:
            raise ManifestError("stored feature layout differs from this version's layout")
        return m


def build_manifest(train_articles, hmm: ContentHmm, embeddings: EmbeddingTable, vocab, importance=None) -> FeatureManifest:
    return FeatureManifest(
        num_topics=hmm.num_topics,
        embedding_dim=embeddings.dim,
        top_words=list(vocab.top),
        word_cuts=quintile_cuts([a.num_words for a in train_articles]),
        sentence_cuts=quintile_cuts([len(a.sentences) for a in train_articles]),
        hmm_fingerprint=fingerprint(hmm),
        importance_fingerprint=fingerprint(importance) if importance is not None else None,
        embedding_source=embeddings.source,
    )


class ArticleView:
    """Candidate-independent quantities of one article."""

    def __init__(self, article, featurizer: "Featurizer"):
        man = featurizer.manifest
        hmm = featurizer.hmm
        emb = featurizer.embeddings
        self.article = article
        sents = article.sentences
        self.m = m = len(sents)
        self.words = [s.words for s in sents]
        self.lengths = np.array([len(w) for w in self.words])
        em = hmm.emission_matrix(sents)
        self.decode = featurizer.decode(em)
        self.emission = np.maximum(em, LOG_FLOOR)
        self.argmax_topic = np.argmax(em, axis=1)
        self.log_marginal = np.maximum(logsumexp(em, axis=1), LOG_FLOOR)
        self.log_initial = np.maximum(hmm.log_initial, LOG_FLOOR)
        self.log_trans = np.maximum(hmm.log_trans, LOG_FLOOR)

        t = man.num_topics
        self.source_topics = np.bincount(self.decode, minlength=t) / m
        self.emb_sums = np.array([np.sum([emb[w] for w in ws], axis=0) for ws in self.words])
        self.emb_source = self.emb_sums.sum(axis=0) / self.lengths.sum()

        top_index = {w: i for i, w in enumerate(man.top_words)}
        self.top = np.zeros((m, len(top_index)))
        self.pos = np.zeros((m, len(POS_TAGS)))
        self.ner = np.zeros((m, len(NER_TAGS)))
        pos_index = {p: i for i, p in enumerate(POS_TAGS)}
        ner_index = {n: i for i, n in enumerate(NER_TAGS)}
        self.nouns, self.verbs = [], []
        for i, s in enumerate(sents):
            for tok in s.tokens:
                j = top_index.get(tok.lower)
                if j is not None:
                    self.top[i, j] = 1.0
                self.pos[i, pos_index.get(tok.pos, pos_index["X"])] = 1.0
                self.ner[i, ner_index.get(tok.ner, ner_index["NONE"])] = 1.0
            self.nouns.append({tok.lower for tok in s.tokens if tok.pos == "NOUN"})
            self.verbs.append({tok.lower for tok in s.tokens if tok.pos == "VERB"})

        self.counts = [Counter(ws) for ws in self.words]
        self.sq_norms = [sum(c * c for c in ct.values()) for ct in self.counts]

        # unigram LMs over the source vocabulary for coverage
        src = Counter(w for ws in self.words for w in ws)
        self.src_vocab = {w: i for i, w in enumerate(src)}
        v = len(src)
        src_counts = np.array(list(src.values()), dtype=np.float64)
        self.p_source = (src_counts + KL_DELTA) / (src_counts.sum() + KL_DELTA * v)
        self.sent_vocab_counts = np.zeros((m, v))
        for i, ct in enumerate(self.counts):
            for w, c in ct.items():
                self.sent_vocab_counts[i, self.src_vocab[w]] = c
        uni = src_counts / src_counts.sum()
        self.uni_mean = np.array([np.mean([uni[self.src_vocab[w]] for w in ws]) for ws in self.words])

        self.importance = np.zeros((m, 2))
        if featurizer.importance is not None:
            for i, ws in enumerate(self.words):
                scores = featurizer.importance.predict_words(ws, emb)
                self.importance[i] = (scores.mean(), scores.max())

        self.word_bin = length_bin(float(self.lengths.sum()), man.word_cuts)
        self.sentence_bin = length_bin(float(m), man.sentence_cuts)

    def cosine(self, i: int, j: int) -> float:
        a, b = self.counts[i], self.counts[j]
        if len(a) > len(b):
            a, b = b, a
        dot = sum(c * b.get(w, 0) for w, c in a.items())
        if dot == 0:
            return 0.0
        return min(1.0, dot / math.sqrt(self.sq_norms[i] * self.sq_norms[j]))

    def coverage(self, selected: list[int]) -> float:
        q_counts = self.sent_vocab_counts[selected].sum(axis=0) if selected else np.zeros(len(self.p_source))
        q = (q_counts + KL_DELTA) / (q_counts.sum() + KL_DELTA * len(self.p_source))
        return max(0.0, float(np.sum(self.p_source * np.log(self.p_source / q))))


class Featurizer:
    """Feature extraction bound to one content model, embedding table and importance model."""

    def __init__(self, manifest: FeatureManifest, hmm: ContentHmm, embeddings: EmbeddingTable, importance=None):
        if manifest.num_topics != hmm.num_topics or manifest.hmm_fingerprint != fingerprint(hmm):
            raise ManifestError("content model does not match the feature manifest")
        if manifest.embedding_dim != embeddings.dim:
            raise ManifestError(
                f"embedding dimension {embeddings.dim} != manifest dimension {manifest.embedding_dim}"
            )
        imp_fp = fingerprint(importance) if importance is not None else None
        if imp_fp != manifest.importance_fingerprint:
            raise ManifestError("importance model does not match the feature manifest")
        self.manifest = manifest
        self.hmm = hmm
        self.embeddings = embeddings
        self.importance = importance
        self.slices = manifest.slices
        self.dim = manifest.dim

    def decode(self, emissions: np.ndarray) -> np.ndarray:
        from nextsum.content_model import viterbi

        return np.array(viterbi(self.hmm.log_initial, self.hmm.log_trans, emissions).topics)

    def view(self, article) -> ArticleView:
        return ArticleView(article, self)

    def featurize(self, view: ArticleView, state: SummaryState, candidates) -> np.ndarray:
        """One row per candidate; ``EOS`` entries use the end-of-summary convention."""
        sl = self.slices
        t = self.manifest.num_topics
        sel = list(state.indices)
        n_sel = len(sel)
        last = sel[-1] if sel else None
        base = np.zeros(self.dim)

        # candidate-independent part
        base[sl["topic_source"]] = view.source_topics
        if sel:
            base[sl["topic_summary"]] = np.bincount(view.decode[sel], minlength=t) / n_sel
            n_words = view.lengths[sel].sum()
            base[sl["emb_summary"]] = view.emb_sums[sel].sum(axis=0) / n_words
            base[sl["position_last"].start + position_bin(last, view.m)] = 1.0
        base[sl["emb_source"]] = view.emb_source
        base[sl["length_source_words"].start + view.word_bin] = 1.0
        base[sl["length_source_sentences"].start + view.sentence_bin] = 1.0
        base[sl["length_summary_words"]] = state.words
        base[sl["length_summary_sentences"]] = n_sel
        sel_nouns = set().union(*(view.nouns[i] for i in sel)) if sel else set()
        sel_verbs = set().union(*(view.verbs[i] for i in sel)) if sel else set()

        out = np.repeat(base[None, :], len(candidates), axis=0)
        for r, c in enumerate(candidates):
            x = out[r]
            if c == EOS:
                x[sl["topic_candidate"].start + t] = 1.0
                if sel:
                    x[sl["position_candidate"].start + position_bin(last, view.m)] = 1.0
                x[sl["coverage_kl"]] = view.coverage(sel)
                x[sl["eos"]] = 1.0
                continue
            x[sl["topic_candidate"].start + view.argmax_topic[c]] = 1.0
            x[sl["topic_emission"]] = view.emission[c]
            topic_c = view.decode[c]
            x[sl["topic_transition"]] = (
                view.log_trans[view.decode[last], topic_c] if sel else view.log_initial[topic_c]
            )
            x[sl["topic_marginal"]] = view.log_marginal[c]
            x[sl["emb_candidate"]] = view.emb_sums[c] / view.lengths[c]
            x[sl["top_words_s"]] = view.top[c]
            x[sl["pos_s"]] = view.pos[c]
            x[sl["ner_s"]] = view.ner[c]
            if c > 0:
                x[sl["top_words_prev"]] = view.top[c - 1]
                x[sl["pos_prev"]] = view.pos[c - 1]
                x[sl["ner_prev"]] = view.ner[c - 1]
            cos = sl["redundancy_cos"].start
            for k in range(min(3, n_sel)):
                x[cos + k] = view.cosine(c, sel[-1 - k])
            ov = sl["redundancy_overlap"].start
            x[ov] = len(view.nouns[c] & sel_nouns)
            x[ov + 1] = len(view.verbs[c] & sel_verbs)
            x[sl["position_candidate"].start + position_bin(c, view.m)] = 1.0
            # with an empty summary, distance is measured from a virtual sentence before the first
            prev = last if sel else -1
            x[sl["position_distance"]] = (c - prev) / view.m
            x[sl["coverage_kl"]] = view.coverage(sel + [c])
            x[sl["importance_unigram"]] = view.uni_mean[c]
            x[sl["importance_model"]] = view.importance[c]
        return out


@dataclass
class Normalizer:
    """Per-dimension z-score; near-constant dimensions pass through unchanged."""

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, x: np.ndarray) -> "Normalizer":
        x = np.asarray(x, dtype=np.float64)
        if x.shape[0] < 2:
            raise ValueError("need at least two vectors to fit a normalizer")
        mean = x.mean(axis=0)
        std = x.std(axis=0)
        const = std < 1e-12
        return cls(np.where(const, 0.0, mean), np.where(const, 1.0, std))

    def apply(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.scale

    def to_json(self) -> dict:
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_json(cls, d: dict) -> "Normalizer":
        return cls(np.array(d["mean"], dtype=np.float64), np.array(d["scale"], dtype=np.float64))


def fit_normalizer(x) -> Normalizer:
    return Normalizer.fit(x)


def apply_normalizer(norm: Normalizer, x) -> np.ndarray:
    return norm.apply(x)
