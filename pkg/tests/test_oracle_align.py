import math

from hypothesis import given
from hypothesis import strategies as st

from nextsum.corpus import make_pair
from nextsum.oracle_align import ExtractiveGold, align, cosine_unigram, read_gold, write_gold

from oracles import brute_ngram_matches


def _pair(article, abstract):
    return make_pair({"id": "p", "article": article, "abstract": abstract})


def test_cosine_examples():
    assert cosine_unigram("a b b".split(), "a b b".split()) == 1.0
    assert cosine_unigram("a b".split(), "c d".split()) == 0.0
    assert math.isclose(cosine_unigram("a b b".split(), "a b c".split()), 3 / math.sqrt(15), rel_tol=1e-15)
    assert abs(cosine_unigram("a b b".split(), "a b c".split()) - 0.7745966692414834) < 1e-15


_words = st.lists(st.sampled_from("a b c d e".split()), min_size=1, max_size=8)


@given(_words, _words)
def test_cosine_symmetric_and_bounded(p, q):
    c = cosine_unigram(p, q)
    assert c == cosine_unigram(q, p)
    assert 0.0 <= c <= 1.0
    if sorted(p) == sorted(q):
        assert c == 1.0


def test_verbatim_copy_maps_to_earliest():
    art, abst = _pair("Dogs bark loud. Cats purr. Dogs bark loud.", "Dogs bark loud.")
    assert align(abst, art).indices == (0,)


def test_two_abstract_sentences_can_share_a_source():
    art, abst = _pair("Rain fell hard today. Sun came out.", "Rain fell today. Rain fell hard.")
    assert align(abst, art).indices == (0, 0)
    assert ExtractiveGold("p", (0, 0)).targets() == [0]


def _cos_by_hand(p, q):
    # dot product and norms from explicit word counts
    dot = sum(p.count(w) * q.count(w) for w in set(p))
    return dot / math.sqrt(sum(p.count(w) ** 2 for w in set(p)) * sum(q.count(w) ** 2 for w in set(q)))


def test_align_matches_exhaustive_table():
    art, abst = _pair(
        "Alpha beta gamma. Beta beta delta. Gamma alpha alpha. Delta epsilon.",
        "Beta delta beta beta. Alpha gamma gamma alpha.",
    )
    expected = []
    for a in abst.sentences:
        table = [_cos_by_hand(a.words, s.words) for s in art.sentences]
        best = max(table)
        expected.append(table.index(best))
    assert list(align(abst, art).indices) == expected == [1, 2]


def test_gold_round_trip(tmp_path):
    golds = [ExtractiveGold("a", (3, 1)), ExtractiveGold("b", ())]
    write_gold(tmp_path / "g.jsonl", golds)
    back = read_gold(tmp_path / "g.jsonl")
    assert back == {"a": golds[0], "b": golds[1]}


def test_brute_counter_sanity():
    # the counting oracle itself on the hand example from the rouge tests
    assert brute_ngram_matches("the cat sat".split(), "the cat ran".split(), 2) == (1, 2, 2)
