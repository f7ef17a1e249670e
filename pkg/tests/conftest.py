import pytest

from nextsum.annotate import EmbeddingTable, train_importance
from nextsum.content_model import train_content_model
from nextsum.corpus import build_vocabulary, make_pair
from nextsum.features import Featurizer, build_manifest
from nextsum.oracle_align import align
from nextsum.synthlab import SynthSpec, generate_corpus

ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one acceptance criterion outcome for the end-of-run summary."""

    def record(name, passed, detail):
        line = f"{name} {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def synth_data():
    records, sidecars = generate_corpus(SynthSpec(seed=5), 160)
    pairs = [make_pair(r) for r in records]
    return pairs, sidecars


@pytest.fixture(scope="session")
def small_world(synth_data):
    """Content model, embeddings, importance model and featurizer on a small planted corpus."""
    pairs, _ = synth_data
    train = pairs[:120]
    items = [(a, align(s, a)) for a, s in pairs]
    hmm = train_content_model([a for a, _ in train], 6, seed=0)
    emb = EmbeddingTable(dim=16)
    imp = train_importance(items[:120], emb, seed=0, epochs=2)
    vocab = build_vocabulary([a for a, _ in train], 50)
    manifest = build_manifest([a for a, _ in train], hmm, emb, vocab, imp)
    featurizer = Featurizer(manifest, hmm, emb, imp)
    return {"pairs": pairs, "items": items, "hmm": hmm, "emb": emb, "importance": imp,
            "vocab": vocab, "manifest": manifest, "featurizer": featurizer}
