import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from nextsum.corpus import (
    CorpusError,
    build_vocabulary,
    load_corpus,
    make_pair,
    segment_and_tokenize,
    split_dataset,
)


def _write(tmp_path, records, name="c.jsonl"):
    p = tmp_path / name
    p.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")
    return p


def test_load_one_record(tmp_path):
    p = _write(tmp_path, [{"id": "a1", "article": "He ran. He hid.", "abstract": "He ran."}])
    pairs = load_corpus(p)
    assert len(pairs) == 1
    art, abst = pairs[0]
    assert len(art.sentences) == 2
    assert art.id == abst.id == "a1"


def test_empty_abstract_names_field(tmp_path):
    p = _write(tmp_path, [{"id": "a1", "article": "He ran.", "abstract": ""}])
    with pytest.raises(CorpusError, match="abstract"):
        load_corpus(p)


def test_malformed_line_reports_line_number(tmp_path):
    p = tmp_path / "bad.jsonl"
    p.write_text('{"id": "a", "article": "X y.", "abstract": "X."}\n{not json\n', encoding="utf-8")
    with pytest.raises(CorpusError, match=":2:"):
        load_corpus(p)


def test_empty_file_is_error(tmp_path):
    p = tmp_path / "empty.jsonl"
    p.write_text("", encoding="utf-8")
    with pytest.raises(CorpusError):
        load_corpus(p)


def test_record_order_preserved(tmp_path):
    recs = [{"id": f"r{i}", "article": f"Story {i} begins. It ends.", "abstract": "Story."} for i in (2, 0, 1)]
    pairs = load_corpus(_write(tmp_path, recs))
    assert [a.id for a, _ in pairs] == ["r2", "r0", "r1"]
    assert pairs[0][0].sentences[0].surfaces == ["Story", "2", "begins", "."]


def test_segment_basic():
    (s,) = segment_and_tokenize("He ran.")
    assert s.surfaces == ["He", "ran", "."]
    assert len(segment_and_tokenize("He ran. He hid.")) == 2


def test_abbreviation_guard():
    sents = segment_and_tokenize("Mr. Smith left. He hid.")
    assert [s.surfaces for s in sents] == [["Mr.", "Smith", "left", "."], ["He", "hid", "."]]


def test_lowercase_after_period_does_not_split():
    assert len(segment_and_tokenize("It cost 3.5 dollars. then more.")) == 1


def test_quotes_after_terminal():
    sents = segment_and_tokenize('He said "go." She went.')
    assert len(sents) == 2
    assert sents[0].surfaces[-2:] == [".", '"']


def test_whitespace_only_is_error():
    with pytest.raises(CorpusError):
        segment_and_tokenize("   \n ")


_text = st.lists(
    st.text(alphabet="abcXYZ.,!?'\"()-0123 ", min_size=1, max_size=12), min_size=1, max_size=8
).map(" ".join).filter(lambda t: t.strip())


@given(_text)
def test_tokens_reconstruct_nonspace_characters(text):
    sents = segment_and_tokenize(text)
    joined = "".join(tok for s in sents for tok in s.surfaces)
    assert joined == "".join(text.split())


def test_split_sizes_small():
    pairs = list(range(10))
    sp = split_dataset(pairs, seed=7)
    assert (len(sp.train), len(sp.dev), len(sp.test)) == (8, 1, 1)
    again = split_dataset(pairs, seed=7)
    assert sp.train == again.train and sp.dev == again.dev and sp.test == again.test


def test_split_sizes_1349():
    sp = split_dataset(list(range(1349)), seed=0)
    assert (len(sp.train), len(sp.dev), len(sp.test)) == (1081, 134, 134)


def test_split_needs_three():
    with pytest.raises(CorpusError):
        split_dataset([1, 2], seed=0)


@given(st.integers(3, 400), st.integers(0, 10**6))
def test_split_is_partition(n, seed):
    sp = split_dataset(list(range(n)), seed=seed)
    assert sorted(sp.train + sp.dev + sp.test) == list(range(n))
    assert len(sp.dev) == int(0.1 * n + 1e-9)


def _article(text):
    return make_pair({"id": "x", "article": text, "abstract": "A."})[0]


def test_vocabulary_counts_and_ties():
    v = build_vocabulary([_article("a a b")])
    assert v.counts == {"a": 2, "b": 1}
    assert v.top == ["a", "b"]
    v = build_vocabulary([_article("c b a")])
    assert v.top == ["a", "b", "c"]


def test_vocabulary_truncates_to_1000():
    words = [f"w{i:04d}" for i in range(2000)]
    v = build_vocabulary([_article(" ".join(words + words[:1500]))])
    # independent pass: 1500 words seen twice come first, then lexicographic
    expected = sorted(words[:1500])[:1000]
    assert len(v.top) == 1000
    assert v.top == expected
