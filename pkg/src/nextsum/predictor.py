"""Next-sentence prediction: candidate sets, training data, MLP training and selection."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from nextsum.features import EOS, Featurizer, FeatureManifest, ManifestError, Normalizer, SummaryState
from nextsum.nn import AdamConfig, AdamState, Mlp, adam_step, loss_and_grad

log = logging.getLogger(__name__)

MODEL_VERSION = 1


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    hidden: tuple[int, ...] = (800, 800, 800, 800)
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_epochs: int = 75
    batch_size: int = 64
    patience: int = 10
    seed: int = 0
    k: int = 10
    negatives: str = "one"  # "one": 1:1 downsampling per step, "all": every candidate

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.negatives not in ("one", "all"):
            raise ValueError("negatives must be 'one' or 'all'")

    @property
    def adam(self) -> AdamConfig:
        return AdamConfig(self.lr, self.beta1, self.beta2, self.eps)


@dataclass
class CandidateSet:
    step: int
    indices: tuple[int, ...]
    sampled: tuple[bool, ...]

    @property
    def candidates(self) -> list[int]:
        return list(self.indices) + [EOS]

    def __len__(self) -> int:
        return len(self.indices) + 1


def build_candidate_set(
    article,
    state: SummaryState,
    k: int = 10,
    mode: str = "infer",
    rng: np.random.Generator | None = None,
    exclude: Sequence[int] = (),
) -> CandidateSet:
    """The ``k`` sentences after the last selected one, plus EOS.

    In train mode a short window is topped up with sentences sampled
    uniformly from the rest of the article, never selected ones or those in
    ``exclude`` (the gold extract).
    """
    if state.terminated:
        raise ValueError("summary already terminated")
    m = article if isinstance(article, int) else len(article.sentences)
    start = 0 if state.last is None else state.last + 1
    selected = set(state.indices)
    window = [i for i in range(start, m) if i not in selected][:k]
    sampled = [False] * len(window)
    if mode == "train" and len(window) < k:
        if rng is None:
            raise ValueError("train-mode candidate sets need an rng")
        banned = selected | set(window) | set(exclude)
        pool = [i for i in range(m) if i not in banned]
        take = min(k - len(window), len(pool))
        if take:
            extra = sorted(int(i) for i in rng.choice(pool, take, replace=False))
            window += extra
            sampled += [True] * take
    elif mode not in ("train", "infer"):
        raise ValueError(f"unknown mode {mode!r}")
    return CandidateSet(len(state) + 1, tuple(window), tuple(sampled))


def select(scores, candidates: Sequence[int]) -> int:
    """Argmax; exact ties go to the earliest source sentence, and any sentence beats EOS."""
    scores = np.asarray(scores, dtype=np.float64)
    best = scores.max()
    tied = [c for c, s in zip(candidates, scores) if s == best]
    real = [c for c in tied if c != EOS]
    return min(real) if real else EOS


@dataclass
class TrainingSet:
    x: np.ndarray
    y: np.ndarray
    coverage: dict


@dataclass
class EvalGroup:
    """One oracle-history timestep: a full candidate set and its gold answer."""

    x: np.ndarray
    candidates: list[int]
    gold: int


def gold_steps(gold):
    """(history, target) per timestep of a gold extract, ending with EOS.

    Repeated gold sentences are not targets and do not re-enter the history.
    """
    targets = gold.targets()
    for t in range(len(targets) + 1):
        yield targets[:t], (targets[t] if t < len(targets) else EOS)


def _pair_rng(seed: int, i: int) -> np.random.Generator:
    return np.random.default_rng([seed, i])


def build_training_set(
    featurizer: Featurizer,
    items,
    k: int = 10,
    seed: int = 0,
    negatives: str = "one",
    views=None,
) -> TrainingSet:
    """Labelled feature rows from ``items`` = [(article, gold)].

    Each timestep yields its positive and either one sampled negative or all
    of them. Timesteps whose gold sentence lies outside the window are
    skipped and counted in ``coverage``.
    """
    xs, ys = [], []
    cov = {"sentence_steps": 0, "in_window": 0, "eos_steps": 0, "duplicates_dropped": 0, "no_negative": 0}
    for n, (article, gold) in enumerate(items):
        rng = _pair_rng(seed, n)
        view = views[n] if views is not None else featurizer.view(article)
        cov["duplicates_dropped"] += len(gold.indices) - len(gold.targets())
        gold_set = set(gold.targets())
        for history, target in gold_steps(gold):
            state = SummaryState.from_indices(history, article)
            cands = build_candidate_set(article, state, k, "train", rng, exclude=gold_set)
            if target == EOS:
                cov["eos_steps"] += 1
            else:
                cov["sentence_steps"] += 1
                if target not in cands.indices:
                    continue
                cov["in_window"] += 1
            others = [c for c in cands.candidates if c != target]
            if not others:
                cov["no_negative"] += 1
                continue
            if negatives == "one":
                others = [others[int(rng.integers(len(others)))]]
            rows = featurizer.featurize(view, state, [target] + others)
            xs.append(rows)
            ys.extend([1.0] + [0.0] * len(others))
    cov["window_rate"] = cov["in_window"] / cov["sentence_steps"] if cov["sentence_steps"] else 1.0
    if not xs:
        return TrainingSet(np.zeros((0, featurizer.dim)), np.zeros(0), cov)
    return TrainingSet(np.vstack(xs), np.array(ys), cov)


def build_eval_groups(featurizer: Featurizer, items, k: int = 10, seed: int = 0, views=None):
    """Size-(k+1) train-mode candidate sets under oracle history; returns (groups, skipped count)."""
    groups, skipped = [], 0
    for n, (article, gold) in enumerate(items):
        rng = _pair_rng(seed, n)
        view = views[n] if views is not None else featurizer.view(article)
        gold_set = set(gold.targets())
        for history, target in gold_steps(gold):
            state = SummaryState.from_indices(history, article)
            cands = build_candidate_set(article, state, k, "train", rng, exclude=gold_set)
            if target != EOS and target not in cands.indices:
                skipped += 1
                continue
            c = cands.candidates
            groups.append(EvalGroup(featurizer.featurize(view, state, c), c, target))
    return groups, skipped


def one_of_k_accuracy(score_fn, groups: Sequence[EvalGroup]) -> float:
    if not groups:
        return 0.0
    hits = sum(select(score_fn(g.x), g.candidates) == g.gold for g in groups)
    return hits / len(groups)


def train_mlp(
    train_set: TrainingSet,
    config: TrainConfig,
    dev_groups: Sequence[EvalGroup] = (),
    normalizer: Normalizer | None = None,
) -> tuple[Mlp, Normalizer, dict]:
    """Mini-batch Adam with the best-dev-accuracy snapshot and early stopping."""
    if len(train_set.y) == 0:
        raise ValueError("empty training set")
    norm = normalizer or Normalizer.fit(train_set.x)
    x = norm.apply(train_set.x)
    y = train_set.y
    dev = [(norm.apply(g.x), g) for g in dev_groups]
    rng = np.random.default_rng([config.seed, 7])
    mlp = Mlp.init([x.shape[1], *config.hidden, 1], int(rng.integers(2**31)))
    state = AdamState.for_params(mlp.params)
    adam = config.adam

    def dev_acc(net):
        hits = sum(select(net.forward(xd), g.candidates) == g.gold for xd, g in dev)
        return hits / len(dev) if dev else 0.0

    best = (-1.0, None, 0)
    history = []
    stale = 0
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(y))
        total = 0.0
        for start in range(0, len(y), config.batch_size):
            idx = order[start:start + config.batch_size]
            loss, grads = loss_and_grad(mlp, x[idx], y[idx])
            if not np.isfinite(loss):
                raise TrainingDiverged(f"loss became {loss} at epoch {epoch}")
            adam_step(mlp.params, grads, state, adam)
            total += loss * len(idx)
        acc = dev_acc(mlp) if dev else float("nan")
        history.append({"epoch": epoch, "train_loss": total / len(y), "dev_1ofk": acc})
        log.info("epoch %d loss %.4f dev 1-of-k %.4f", epoch, total / len(y), acc)
        if not dev:
            best = (acc, [p.copy() for p in mlp.params], epoch)
            continue
        if acc > best[0]:
            best = (acc, [p.copy() for p in mlp.params], epoch)
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    params = best[1]
    final = Mlp(params[0::2], params[1::2])
    metrics = {"best_epoch": best[2], "best_dev_1ofk": best[0] if dev else None, "history": history}
    return final, norm, metrics


class NextSumModel:
    """Trained next-sentence predictor bound to its feature resources."""

    def __init__(self, featurizer: Featurizer, mlp: Mlp, normalizer: Normalizer,
                 config: TrainConfig, metrics: dict | None = None):
        if mlp.dims[0] != featurizer.dim:
            raise ManifestError(f"network expects {mlp.dims[0]} features, manifest has {featurizer.dim}")
        self.featurizer = featurizer
        self.mlp = mlp
        self.normalizer = normalizer
        self.config = config
        self.metrics = metrics or {}

    @property
    def k(self) -> int:
        return self.config.k

    def view(self, article):
        return self.featurizer.view(article)

    def score_rows(self, x: np.ndarray) -> np.ndarray:
        return self.mlp.forward(self.normalizer.apply(x))

    def score(self, view, state: SummaryState, candidates) -> np.ndarray:
        return self.score_rows(self.featurizer.featurize(view, state, candidates))

    def to_json(self) -> dict:
        return {
            "version": MODEL_VERSION,
            "manifest": self.featurizer.manifest.to_json(),
            "normalizer": self.normalizer.to_json(),
            **self.mlp.to_json(),
            "train_config": asdict(self.config),
            "metrics": self.metrics,
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()), encoding="utf-8")

    @classmethod
    def load(cls, path, hmm, embeddings, importance=None) -> "NextSumModel":
        d = json.loads(Path(path).read_text(encoding="utf-8"))
        if d.get("version") != MODEL_VERSION:
            raise ManifestError(f"unsupported model version {d.get('version')}")
        featurizer = Featurizer(FeatureManifest.from_json(d["manifest"]), hmm, embeddings, importance)
        cfg = TrainConfig(**d["train_config"])
        return cls(featurizer, Mlp.from_json(d), Normalizer.from_json(d["normalizer"]), cfg, d.get("metrics"))


def train(featurizer: Featurizer, train_items, dev_items, config: TrainConfig) -> NextSumModel:
    """Build the training set, train the network and return the bound model."""
    ts = build_training_set(featurizer, train_items, config.k, config.seed, config.negatives)
    dev_groups, dev_skipped = build_eval_groups(featurizer, dev_items, config.k, config.seed + 1)
    mlp, norm, metrics = train_mlp(ts, config, dev_groups)
    metrics["coverage"] = ts.coverage
    metrics["train_examples"] = int(len(ts.y))
    metrics["dev_groups"] = len(dev_groups)
    metrics["dev_skipped"] = dev_skipped
    return NextSumModel(featurizer, mlp, norm, config, metrics)


def predict_next(model, view, state: SummaryState, candidates: CandidateSet | Sequence[int]) -> int:
    cands = candidates.candidates if isinstance(candidates, CandidateSet) else list(candidates)
    if cands == [EOS]:
        return EOS
    return select(model.score(view, state, cands), cands)
