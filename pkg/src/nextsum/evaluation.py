"""Metrics: ROUGE-N, Kendall tau-b, next-sentence accuracies and length reports."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from nltk.stem.porter import PorterStemmer
from scipy import stats

from nextsum.features import EOS, SummaryState
from nextsum.predictor import _pair_rng, build_candidate_set, gold_steps, select

_stemmer = PorterStemmer(mode=PorterStemmer.ORIGINAL_ALGORITHM)
_NON_ALNUM = re.compile(r"[^a-z0-9]+")


@lru_cache(maxsize=100_000)
def stem(word: str) -> str:
    return _stemmer.stem(word)


def rouge_tokens(text: str, use_stem: bool = True) -> list[str]:
    """Lower-case, split on anything that is not a letter or digit, optionally Porter-stem."""
    toks = _NON_ALNUM.sub(" ", text.lower()).split()
    return [stem(t) for t in toks] if use_stem else toks


@dataclass
class RougeScore:
    precision: float
    recall: float
    f_score: float
    n: int
    empty: bool = False


def f_measure(p: float, r: float, alpha: float = 0.5) -> float:
    denom = alpha * r + (1 - alpha) * p
    return p * r / denom if denom > 0 else 0.0


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(candidate: str, reference: str, n: int = 2, stem: bool = True, alpha: float = 0.5) -> RougeScore:
    if n < 1:
        raise ValueError("n must be >= 1")
    cand = _ngrams(rouge_tokens(candidate, stem), n)
    ref = _ngrams(rouge_tokens(reference, stem), n)
    n_cand, n_ref = sum(cand.values()), sum(ref.values())
    if not n_cand or not n_ref:
        return RougeScore(0.0, 0.0, 0.0, n, empty=True)
    hits = sum(min(c, ref[g]) for g, c in cand.items() if g in ref)
    p, r = hits / n_cand, hits / n_ref
    return RougeScore(p, r, f_measure(p, r, alpha), n)


def kendall_tau_b(xs, ys) -> float:
    """Tau-b (tie-corrected); undefined for constant input."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape or xs.ndim != 1 or len(xs) < 2:
        raise ValueError("need two equal-length sequences of at least 2 values")
    if np.all(xs == xs[0]) or np.all(ys == ys[0]):
        raise ValueError("tau-b is undefined when either sequence is constant")
    return float(stats.kendalltau(xs, ys, variant="b").statistic)


def next_sentence_eval(model, items, k: int = 10, seed: int = 0) -> dict:
    """Oracle-history next-sentence accuracies over size-(k+1) candidate sets.

    ``binary`` thresholds every candidate at p > 0.5; ``binary_balanced``
    uses the gold candidate plus one sampled negative per timestep.
    """
    steps = skipped = 0
    hits = 0
    bin_right = bin_total = 0
    bal_right = bal_total = 0
    for n, (article, gold) in enumerate(items):
        rng = _pair_rng(seed, n)
        view = model.view(article)
        gold_set = set(gold.targets())
        for history, target in gold_steps(gold):
            state = SummaryState.from_indices(history, article)
            cands = build_candidate_set(article, state, k, "train", rng, exclude=gold_set)
            if target != EOS and target not in cands.indices:
                skipped += 1
                continue
            c = cands.candidates
            p = np.asarray(model.score(view, state, c), dtype=np.float64)
            steps += 1
            hits += select(p, c) == target
            labels = np.array([ci == target for ci in c])
            pred = p > 0.5
            bin_right += int(np.sum(pred == labels))
            bin_total += len(c)
            neg = [i for i, ci in enumerate(c) if ci != target]
            if neg:
                j = neg[int(rng.integers(len(neg)))]
                g = c.index(target)
                bal_right += int(pred[g]) + int(not pred[j])
                bal_total += 2
    return {
        "one_of_k": hits / steps if steps else 0.0,
        "binary": bin_right / bin_total if bin_total else 0.0,
        "binary_balanced": bal_right / bal_total if bal_total else 0.0,
        "timesteps": steps,
        "skipped": skipped,
        "k": k,
    }


def histogram(values, width: int = 10) -> list[tuple[int, int]]:
    counts = Counter((int(v) // width) * width for v in values)
    return sorted(counts.items())


def length_report(generated: dict[str, int], abstracts: dict[str, int], width: int = 10) -> dict:
    """Length distribution of generated summaries and its tau-b against abstract lengths."""
    missing = sorted(set(generated) ^ set(abstracts))
    if missing:
        raise ValueError(f"ids without a match: {missing}")
    ids = sorted(generated)
    gen = [generated[i] for i in ids]
    ref = [abstracts[i] for i in ids]
    try:
        tau = kendall_tau_b(gen, ref)
    except ValueError:
        tau = None
    return {
        "histogram": histogram(gen, width),
        "bin_width": width,
        "generated": {"min": min(gen), "max": max(gen), "avg": float(np.mean(gen))},
        "abstract": {"min": min(ref), "max": max(ref), "avg": float(np.mean(ref))},
        "tau": tau,
        "n": len(ids),
    }


_SYSTEM_NAMES = {"nextsum": "NextSum", "nextsum-l": "NextSum_L", "lead": "Lead", "chmm": "CHMM",
                 "transition": "Transition", "chmm-t": "CHMM-T", "oracle": "Oracle extract"}


def format_report(runs: dict[str, dict]) -> str:
    """Plain-text tables, one column (or row) per run: next-sentence accuracy,
    ROUGE-2 F per system, and summary lengths with their tau-b."""
    names = list(runs)
    width = max(12, *(len(n) + 2 for n in names))
    lines = ["Next-sentence prediction (oracle history)"]
    k = next(iter(runs.values()))["next_sentence"]["k"]
    head = f"  {'run':<{width}}{'Binary':>9}{'Balanced':>10}{'1 of ' + str(k + 1):>9}{'Random':>9}{'steps':>7}{'skipped':>9}"
    lines.append(head)
    for n in names:
        ns, rnd = runs[n]["next_sentence"], runs[n].get("next_sentence_random", {})
        lines.append(
            f"  {n:<{width}}{100 * ns['binary']:>9.1f}{100 * ns['binary_balanced']:>10.1f}"
            f"{100 * ns['one_of_k']:>9.1f}{100 * rnd.get('one_of_k', float('nan')):>9.1f}"
            f"{ns['timesteps']:>7}{ns['skipped']:>9}"
        )
    lines += ["", "ROUGE-2 F"]
    systems = [s for s in _SYSTEM_NAMES if any(s in runs[n]["rouge"] for n in names)]
    lines.append(f"  {'system':<16}" + "".join(f"{n:>{width}}" for n in names))
    for s in systems:
        cells = []
        for n in names:
            r = runs[n]["rouge"].get(s)
            cells.append(f"{r['rouge2_f']:>{width}.3f}" if r else f"{'-':>{width}}")
        lines.append(f"  {_SYSTEM_NAMES[s]:<16}" + "".join(cells))
    empties = {n: {s: r["empty"] for s, r in runs[n]["rouge"].items() if r["empty"]} for n in names}
    for n, e in empties.items():
        if e:
            lines.append(f"  empty summaries in {n}: " + ", ".join(f"{s}={c}" for s, c in sorted(e.items())))
    window = [runs[n].get("window") for n in names if "transition" in runs[n]["rouge"] or "chmm-t" in runs[n]["rouge"]]
    if window:
        lines.append(f"  Transition/CHMM-T candidates: next-{window[0]} window")
    lines += ["", "Summary lengths in words (NextSum vs. abstract)"]
    lines.append(f"  {'run':<{width}}{'min':>6}{'max':>6}{'avg':>8}{'abs avg':>9}{'tau-b':>8}")
    for n in names:
        ln = runs[n].get("lengths")
        if not ln:
            continue
        g, a, tau = ln["generated"], ln["abstract"], ln["tau"]
        tau_s = "n/a" if tau is None else f"{tau:.3f}"
        lines.append(f"  {n:<{width}}{g['min']:>6}{g['max']:>6}{g['avg']:>8.1f}{a['avg']:>9.1f}{tau_s:>8}")
    return "\n".join(lines) + "\n"


class RandomScorer:
    """Reference scorer with i.i.d. uniform scores, the chance level of 1-of-K accuracy."""

    def __init__(self, seed: int = 0, k: int = 10):
        self.rng = np.random.default_rng([seed, 99])
        self.k = k

    def view(self, article):
        return article

    def score(self, view, state, candidates) -> np.ndarray:
        return self.rng.random(len(candidates))
