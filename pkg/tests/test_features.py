import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import logsumexp

from nextsum.annotate import NER_TAGS, POS_TAGS, EmbeddingTable
from nextsum.corpus import make_pair
from nextsum.features import (
    EOS,
    FeatureManifest,
    Featurizer,
    ManifestError,
    Normalizer,
    SummaryState,
    fingerprint,
    kl_coverage,
    length_bin,
    position_bin,
)

from oracles import brute_viterbi, chain_logprob, kl_hand, random_hmm


def test_kl_examples():
    src = "a b b c".split()
    assert abs(kl_coverage(src, src)) < 1e-12
    # empty summary: smoothed summary LM is uniform over the 3 source words
    p = [(1 + 0.1) / 4.3, (2 + 0.1) / 4.3, (1 + 0.1) / 4.3]
    assert kl_coverage(src, []) == pytest.approx(sum(pi * math.log(pi * 3) for pi in p), abs=1e-15)
    two = "x x x y".split()
    for summ in ([], ["x"], ["y"], ["y", "y"]):
        assert kl_coverage(two, summ + two) <= kl_coverage(two, summ)


@given(st.lists(st.sampled_from("abcde"), min_size=1, max_size=12),
       st.lists(st.sampled_from("abcdez"), max_size=12))
def test_kl_matches_hand_sum(src, summ):
    v = kl_coverage(src, summ)
    assert v >= 0
    assert v == pytest.approx(kl_hand(src, summ), abs=1e-12)


@given(st.integers(1, 200))
def test_position_bins_partition(m):
    bins = [position_bin(i, m) for i in range(m)]
    assert bins[0] == 0
    assert all(0 <= b <= 4 for b in bins)
    assert bins == sorted(bins)
    if m >= 5:
        assert set(bins) == set(range(5))


def test_length_bins():
    cuts = [10.0, 20.0, 30.0, 40.0]
    assert [length_bin(v, cuts) for v in (0, 10, 15, 39.9, 40, 1e9)] == [0, 1, 1, 3, 4, 4]


def test_normalizer():
    rng = np.random.default_rng(0)
    x = np.column_stack([rng.normal(3, 2, 200), np.full(200, 7.0), rng.uniform(size=200)])
    norm = Normalizer.fit(x)
    z = norm.apply(x)
    assert np.allclose(z[:, [0, 2]].mean(axis=0), 0, atol=1e-9)
    assert np.allclose(z[:, [0, 2]].std(axis=0), 1, atol=1e-6)
    assert np.array_equal(z[:, 1], x[:, 1])
    held = np.array([1.0, 2.0, 3.0])
    mu, sd = x[:, 0].sum() / 200, math.sqrt(((x[:, 0] - x[:, 0].sum() / 200) ** 2).sum() / 200)
    assert norm.apply(held)[0] == pytest.approx((1.0 - mu) / sd, rel=1e-12)
    back = Normalizer.from_json(norm.to_json())
    assert np.array_equal(back.apply(held), norm.apply(held))


@pytest.fixture(scope="module")
def golden():
    rng = np.random.default_rng(11)
    hmm, table = random_hmm(rng, 2, 3)
    art = make_pair({"id": "g", "article": "W0 w1. W2 w2. W0 w2.", "abstract": "W0."})[0]
    vecs = {"w0": np.array([1.0, 0.0]), "w1": np.array([0.0, 2.0]), "w2": np.array([-1.0, 1.0]),
            ".": np.array([0.5, 0.5])}
    emb = EmbeddingTable(dim=2, vectors=vecs, source="fixture")
    man = FeatureManifest(2, 2, ["w0", "w2"], [5.0, 8.0, 9.0, 10.0], [1.0, 2.0, 3.0, 4.0], fingerprint(hmm),
                          None, "fixture")
    return hmm, table, art, emb, man, Featurizer(man, hmm, emb)


def _onehot(n, i):
    v = np.zeros(n)
    v[i] = 1.0
    return v


def _presence(tags, names):
    v = np.zeros(len(names))
    for t in tags:
        v[names.index(t)] = 1.0
    return v


def test_golden_vectors(golden):
    hmm, table, art, emb, man, fz = golden
    ids = {"w0": 0, "w1": 1, "w2": 2}
    sents = [[ids.get(w, 3) for w in s.words] for s in art.sentences]
    em = np.array([[chain_logprob(table, t, s, 4) for t in range(2)] for s in sents])
    path, _ = brute_viterbi(hmm.log_initial, hmm.log_trans, em)
    words = [s.words for s in art.sentences]
    allw = [w for ws in words for w in ws]
    mean = lambda ws: np.mean([emb[w] for w in ws], axis=0)
    s0, s1, s2 = art.sentences

    row = np.concatenate([
        np.bincount(path, minlength=2) / 3,
        _onehot(2, path[0]),
        _onehot(3, int(np.argmax(em[2]))),
        np.maximum(em[2], -50),
        [max(hmm.log_trans[path[0], path[2]], -50)],
        [max(logsumexp(em[2]), -50)],
        mean(allw), mean(words[0]), mean(words[2]),
        [1.0, 1.0], [0.0, 1.0],
        _presence([t.pos for t in s2.tokens], POS_TAGS), _presence([t.pos for t in s1.tokens], POS_TAGS),
        _presence([t.ner for t in s2.tokens], NER_TAGS), _presence([t.ner for t in s1.tokens], NER_TAGS),
        [2 / 3, 0.0, 0.0],
        [len({t.lower for t in s2.tokens if t.pos == "NOUN"} & {t.lower for t in s0.tokens if t.pos == "NOUN"}),
         len({t.lower for t in s2.tokens if t.pos == "VERB"} & {t.lower for t in s0.tokens if t.pos == "VERB"})],
        _onehot(5, 0), _onehot(5, 3), [2 / 3],
        _onehot(5, 3), _onehot(5, 3), [3.0], [1.0],
        [kl_hand(allw, words[0] + words[2])],
        [(2 / 9 + 3 / 9 + 3 / 9) / 3],
        [0.0, 0.0],
        [0.0],
    ])
    eos = np.concatenate([
        np.bincount(path, minlength=2) / 3, _onehot(2, path[0]), _onehot(3, 2), np.zeros(2), [0.0], [0.0],
        mean(allw), mean(words[0]), np.zeros(2),
        np.zeros(4), np.zeros(24), np.zeros(8), np.zeros(5),
        _onehot(5, 0), _onehot(5, 0), [0.0],
        _onehot(5, 3), _onehot(5, 3), [3.0], [1.0],
        [kl_hand(allw, words[0])], [0.0], [0.0, 0.0], [1.0],
    ])
    got = fz.featurize(fz.view(art), SummaryState.from_indices([0], art), [2, EOS])
    assert got.shape == (2, man.dim) == (2, len(row))
    assert np.allclose(got[0], row, atol=1e-12, rtol=0)
    assert np.allclose(got[1], eos, atol=1e-12, rtol=0)


def test_empty_history_conventions(small_world):
    fz = small_world["featurizer"]
    art = small_world["pairs"][0][0]
    sl = fz.slices
    rows = fz.featurize(fz.view(art), SummaryState(), [0, 1, EOS])
    for name in ("topic_summary", "redundancy_cos", "redundancy_overlap", "length_summary_words",
                 "length_summary_sentences", "position_last"):
        assert np.all(rows[:, sl[name]] == 0), name


def test_identical_candidate_has_unit_cosine(small_world):
    fz = small_world["featurizer"]
    art = small_world["pairs"][1][0]
    view = fz.view(art)
    row = fz.featurize(view, SummaryState.from_indices([2], art), [2])[0]
    assert row[fz.slices["redundancy_cos"].start] == 1.0


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_feature_invariants(small_world, data):
    fz = small_world["featurizer"]
    pairs = small_world["pairs"]
    art = pairs[data.draw(st.integers(0, len(pairs) - 1))][0]
    m = len(art.sentences)
    chosen = sorted(data.draw(st.sets(st.integers(0, m - 1), max_size=4)))
    state = SummaryState.from_indices(chosen, art)
    start = chosen[-1] + 1 if chosen else 0
    cands = list(range(start, min(m, start + 10))) + [EOS]
    view = fz.view(art)
    rows = fz.featurize(view, state, cands)
    assert rows.shape == (len(cands), fz.dim)
    assert np.array_equal(rows, fz.featurize(view, state, cands))
    sl = fz.slices
    assert np.all((rows[:, sl["redundancy_cos"]] >= 0) & (rows[:, sl["redundancy_cos"]] <= 1))
    assert np.all(rows[:, sl["coverage_kl"]] >= 0)
    assert np.all(rows[:, sl["topic_emission"]] >= -50)
    for name in ("topic_candidate", "length_source_words", "length_source_sentences"):
        assert np.all(rows[:, sl[name]].sum(axis=1) == 1), name
    # EOS takes the last summary sentence's position bin, none when the summary is empty
    assert np.all(rows[:-1, sl["position_candidate"]].sum(axis=1) == 1)
    assert rows[-1, sl["position_candidate"]].sum() == (1 if chosen else 0)
    assert rows[:, sl["position_last"]].sum() == (len(cands) if chosen else 0)
    assert np.array_equal(rows[:, sl["eos"]].ravel(), np.array([c == EOS for c in cands], dtype=float))


def test_manifest_mismatch(small_world):
    man = small_world["manifest"]
    with pytest.raises(ManifestError):
        Featurizer(man, small_world["hmm"], EmbeddingTable(dim=8), small_world["importance"])
    with pytest.raises(ManifestError):
        Featurizer(man, small_world["hmm"], small_world["emb"], None)
    back = FeatureManifest.from_json(man.to_json())
    assert back.dim == man.dim
    bad = man.to_json() | {"dim": man.dim + 1}
    with pytest.raises(ManifestError):
        FeatureManifest.from_json(bad)
