"""How often the next gold sentence falls inside the candidate window, per K."""

import argparse

from nextsum.corpus import make_pair
from nextsum.features import EOS
from nextsum.oracle_align import align
from nextsum.predictor import gold_steps
from nextsum.synthlab import SynthSpec, generate_corpus


def coverage(items, k: int) -> float:
    hit = total = 0
    for _, gold in items:
        for history, target in gold_steps(gold):
            if target == EOS:
                continue
            total += 1
            hit += target - (history[-1] if history else -1) <= k
    return hit / total if total else float("nan")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--pairs", type=int, default=400)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--min-sentences", type=int, default=15)
    ap.add_argument("--max-sentences", type=int, default=45)
    ap.add_argument("-k", type=int, nargs="+", default=[1, 2, 3, 5, 10, 15, 20])
    a = ap.parse_args()
    spec = SynthSpec(seed=a.seed, min_sentences=a.min_sentences, max_sentences=a.max_sentences)
    records, _ = generate_corpus(spec, a.pairs)
    items = [(art, align(abst, art)) for art, abst in map(make_pair, records)]
    for k in a.k:
        print(f"K={k:>3}  {coverage(items, k):.3f}")
