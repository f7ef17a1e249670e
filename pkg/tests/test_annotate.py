import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nextsum.annotate import (
    EmbeddingError,
    EmbeddingTable,
    ImportanceModel,
    embed_span,
    load_embeddings,
    ner_tag,
    pos_tag,
    sentence_importance,
    train_importance,
)
from nextsum.corpus import make_pair
from nextsum.oracle_align import ExtractiveGold


def test_pos_examples():
    assert pos_tag(["He", "ran", "."]) == ["PRON", "VERB", "PUNCT"]
    assert pos_tag(["1999"]) == ["NUM"]
    assert pos_tag(["the", "quickly", "and"]) == ["DET", "ADV", "CONJ"]


def test_ner_lowercase_all_none():
    assert ner_tag("the man went to the shop".split()) == ["NONE"] * 6


def test_ner_heuristics():
    assert ner_tag(["Mr.", "John", "Smith", "went", "to", "Paris"]) == ["NONE", "PERSON", "PERSON", "NONE", "NONE", "LOCATION"]
    assert ner_tag(["the", "Acme", "Corp.", "grew"]) == ["NONE", "ORG", "ORG", "NONE"]


def test_load_embeddings_fixture(tmp_path):
    p = tmp_path / "v.txt"
    p.write_text("2 3\ncat 1 2 3\ndog -1 0.5 0\n", encoding="utf-8")
    t = load_embeddings(p)
    assert t.dim == 3
    assert np.array_equal(t["cat"], [1.0, 2.0, 3.0])
    assert np.array_equal(t["dog"], [-1.0, 0.5, 0.0])


def test_load_embeddings_bad_row(tmp_path):
    p = tmp_path / "v.txt"
    p.write_text("2 300\nok " + " ".join(["0"] * 300) + "\nbad " + " ".join(["0"] * 299) + "\n", encoding="utf-8")
    with pytest.raises(EmbeddingError, match="3"):
        load_embeddings(p)


def test_fallback_unit_norm_and_stable():
    t = EmbeddingTable(dim=300)
    v = t["never-seen-word"]
    assert np.linalg.norm(v) == pytest.approx(1.0)
    assert np.array_equal(v, EmbeddingTable(dim=300)["never-seen-word"])


def test_embed_span():
    t = EmbeddingTable(dim=3, vectors={"a": np.array([1.0, 2, 3]), "b": np.array([-1.0, -2, -3]),
                                       "c": np.array([3.0, 0, 0])})
    assert np.array_equal(embed_span(t, ["a"]), [1, 2, 3])
    assert np.array_equal(embed_span(t, ["a", "b"]), [0, 0, 0])
    assert np.allclose(embed_span(t, ["a", "b", "c"]), [1.0, 0.0, 0.0])
    assert np.array_equal(embed_span(t, []), np.zeros(3))


@given(st.permutations(["x", "y", "z", "x", "w"]))
def test_embed_span_order_invariant(perm):
    t = EmbeddingTable(dim=8)
    assert np.allclose(embed_span(t, perm), embed_span(t, ["x", "y", "z", "x", "w"]), atol=1e-15)


class _Stub:
    def __init__(self, scores):
        self.scores = scores

    def predict_words(self, words, table):
        return np.array(self.scores[: len(words)])


def test_sentence_importance_arithmetic():
    t = EmbeddingTable(dim=4)
    s = make_pair({"id": "x", "article": "alpha beta gamma", "abstract": "A."})[0].sentences[0]
    avg, mx = sentence_importance(_Stub([0.1, 0.2, 0.9]), s, t)
    assert avg == pytest.approx(0.4) and mx == 0.9
    assert sentence_importance(_Stub([0.5, 0.5, 0.5]), s, t) == (0.5, 0.5)
    one = make_pair({"id": "x", "article": "alpha", "abstract": "A."})[0].sentences[0]
    avg, mx = sentence_importance(_Stub([0.3]), one, t)
    assert avg == mx


def _marked_corpus(n, seed):
    """Words after IMPORTANT form the gold sentence; everything else never appears in it."""
    rng = np.random.default_rng(seed)
    good = [f"gx{i}" for i in range(6)]
    bad = [f"bx{i}" for i in range(12)]
    items = []
    for k in range(n):
        sents = [" ".join(rng.choice(bad, 5)) for _ in range(3)]
        pos = int(rng.integers(3))
        sents.insert(pos, "IMPORTANT " + " ".join(rng.choice(good, 4)))
        art = make_pair({"id": f"m{k}", "article": ". ".join(s.capitalize() for s in sents) + ".",
                         "abstract": "x."})[0]
        items.append((art, ExtractiveGold(art.id, (pos,))))
    return items


def test_importance_planted_signal():
    table = EmbeddingTable(dim=16)
    items = _marked_corpus(120, 0)
    model = train_importance(items[:100], table, seed=0, epochs=15, lr=0.05)
    right = total = 0
    for art, gold in items[100:]:
        gold_words = {w for w in art.sentences[gold.indices[0]].words}
        for s in art.sentences:
            p = model.predict_words(s.words, table)
            for w, pw in zip(s.words, p):
                if w == "." or w == "important":
                    continue
                right += (pw > 0.5) == (w in gold_words)
                total += 1
    assert right / total >= 0.9


def test_importance_all_positive_and_deterministic():
    table = EmbeddingTable(dim=8)
    items = []
    for k in range(20):
        art = make_pair({"id": str(k), "article": "Alpha beta gamma.", "abstract": "x."})[0]
        items.append((art, ExtractiveGold(str(k), (0,))))
    a = train_importance(items, table, seed=3, epochs=20, lr=0.05)
    b = train_importance(items, table, seed=3, epochs=20, lr=0.05)
    assert np.array_equal(a.weights, b.weights) and a.bias == b.bias
    p = a.predict_words(["alpha", "beta", "gamma"], table)
    assert np.all(p >= 0.9) and np.all(p < 1)


def test_importance_round_trip(tmp_path):
    m = ImportanceModel(np.arange(8.0), 0.5, 2, {"seed": 1})
    m.save(tmp_path / "i.json")
    back = ImportanceModel.load(tmp_path / "i.json")
    assert np.array_equal(back.weights, m.weights) and back.bias == 0.5
