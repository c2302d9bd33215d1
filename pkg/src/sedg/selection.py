"""Sample-selection policies and feature-selection weightings.

Sample selection builds the pool of source rows that synthetic samples are
derived from; feature selection decides which columns of a chosen source row
get modified, driven by a per-feature probability vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .metrics import UndefinedAucError, multiclass_auc

RSS = "rss"
PASS = "pass"
PESS = "pess"
PPSS = "ppss"

SELECTION_KINDS = (RSS, PASS, PESS, PPSS)
WEIGHTING_KINDS = ("random", "imbalance", "gini", "permutation", "drop_column")


class UnsupportedModelError(TypeError):
    """Importance method incompatible with the given model family."""


@dataclass(frozen=True)
class SelectionPolicy:
    kind: str = RSS
    member_mode: str = "probabilistic"          # or "deterministic_max"
    cardinality_direction: str = "proportional"  # or "inverse"
    with_replacement: bool = True                # member re-selection (partition policy)
    m: int | tuple[int, int] = 1                 # per-member draw size

    def __post_init__(self):
        if self.kind not in SELECTION_KINDS:
            raise ValueError(f"unknown selection kind {self.kind!r}")
        if self.member_mode not in ("probabilistic", "deterministic_max"):
            raise ValueError(f"unknown member mode {self.member_mode!r}")
        if self.cardinality_direction not in ("proportional", "inverse"):
            raise ValueError(f"unknown direction {self.cardinality_direction!r}")


@dataclass(frozen=True)
class SamplePool:
    """Selected source-row indices; `short` marks an exhausted-members stop."""

    indices: np.ndarray
    short: bool = False

    def __len__(self):
        return int(self.indices.size)


@dataclass(frozen=True)
class FeatureWeighting:
    """Non-negative per-feature selection probabilities summing to one."""

    kind: str
    weights: np.ndarray
    feature_names: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        names = self.feature_names or tuple(str(i) for i in range(self.weights.size))
        return {"kind": self.kind, "weights": {n: float(w) for n, w in zip(names, self.weights)}}


def _normalize(raw: np.ndarray) -> np.ndarray:
    raw = np.maximum(np.asarray(raw, dtype=np.float64), 0.0)
    total = raw.sum()
    if total <= 0.0:
        return np.full(raw.size, 1.0 / raw.size)
    return raw / total


def uniform_weights(dataset: Dataset) -> FeatureWeighting:
    n = len(dataset.schema.features)
    return FeatureWeighting("random", np.full(n, 1.0 / n), dataset.schema.feature_names())


def _draw_weighted_no_replacement(rng, probs: np.ndarray, k: int) -> np.ndarray:
    """Sequential weighted draws, renormalizing after each pick."""
    if k > probs.size:
        raise ValueError(f"cannot draw {k} from {probs.size} without replacement")
    remaining = probs.astype(np.float64).copy()
    chosen = np.empty(k, dtype=np.int64)
    for t in range(k):
        total = remaining.sum()
        if total <= 0.0:
            # all remaining mass is zero: fall back to uniform over unpicked
            open_idx = np.setdiff1d(np.arange(probs.size), chosen[:t])
            pick = int(rng.choice(open_idx))
        else:
            pick = int(rng.choice(probs.size, p=remaining / total))
        chosen[t] = pick
        remaining[pick] = 0.0
    return chosen


def rss(train: Dataset, k: int, seed: int, with_replacement: bool = False) -> SamplePool:
    """Uniform selection of k source rows from the whole training set."""
    n = len(train)
    if k < 0:
        raise ValueError("k must be >= 0")
    if not with_replacement and k > n:
        raise ValueError(f"cannot select {k} of {n} samples without replacement")
    rng = np.random.default_rng(seed)
    idx = rng.choice(n, size=k, replace=with_replacement)
    return SamplePool(np.asarray(idx, dtype=np.int64))


def _member_probabilities(sizes: np.ndarray, direction: str) -> np.ndarray:
    raw = sizes.astype(np.float64) if direction == "proportional" else 1.0 / sizes
    return raw / raw.sum()


def pass_select(train: Dataset, policy: SelectionPolicy, k: int, seed: int) -> SamplePool:
    """Partition-based selection: pick a class member (by cardinality or its
    inverse, or deterministically the largest), then draw m rows from it,
    repeating until the pool holds k rows."""
    if not train.class_index:
        raise ValueError("empty dataset")
    rng = np.random.default_rng(seed)
    classes = sorted(train.class_index)
    sizes = np.array([len(train.class_index[c]) for c in classes], dtype=np.int64)
    available = list(range(len(classes)))
    pool: list[int] = []
    while len(pool) < k:
        if not available:
            return SamplePool(np.asarray(pool, dtype=np.int64), short=True)
        if policy.member_mode == "deterministic_max":
            member = available[int(np.argmax(sizes[available]))]
        else:
            p = _member_probabilities(sizes[available], policy.cardinality_direction)
            member = available[int(rng.choice(len(available), p=p))]
        m = policy.m if isinstance(policy.m, int) else int(rng.integers(policy.m[0], policy.m[1] + 1))
        m = min(m, k - len(pool))
        member_rows = np.asarray(train.class_index[classes[member]])
        take = min(m, member_rows.size)
        pool.extend(rng.choice(member_rows, size=take, replace=False).tolist())
        if not policy.with_replacement:
            available.remove(member)
    return SamplePool(np.asarray(pool, dtype=np.int64))


def sample_losses(classifier, dataset: Dataset) -> np.ndarray:
    """Per-row cross-entropy loss of a fitted classifier on a dataset."""
    scores = np.asarray(classifier.predict_scores(dataset), dtype=np.float64)
    picked = scores[np.arange(len(dataset)), dataset.targets()]
    return -np.log(np.maximum(picked, 1e-12))


def pess_probabilities(losses: np.ndarray) -> np.ndarray:
    """Loss-proportional selection probabilities: p_i = L_i / sum L.

    Proportionality preserves the ordering requirement p_i > p_j exactly when
    L_i > L_j. All-zero losses fall back to uniform.
    """
    losses = np.asarray(losses, dtype=np.float64)
    if np.any(losses < 0):
        raise ValueError("losses must be non-negative")
    total = losses.sum()
    if total <= 0.0:
        return np.full(losses.size, 1.0 / losses.size)
    return losses / total


def pess_select(train: Dataset, classifier, k: int, seed: int,
                losses: np.ndarray | None = None) -> SamplePool:
    """Performance-based selection: rows the classifier loses hardest on are
    most likely to be picked. Losses default to the classifier's own training
    cross entropy."""
    if losses is None:
        losses = sample_losses(classifier, train)
    probs = pess_probabilities(losses)
    rng = np.random.default_rng(seed)
    idx = _draw_weighted_no_replacement(rng, probs, min(k, len(train)))
    return SamplePool(idx, short=k > len(train))


def class_auc_scores(classifier, dataset: Dataset) -> dict[int, float]:
    """Per-class one-vs-rest AUC of a fitted classifier on a dataset."""
    scores = np.asarray(classifier.predict_scores(dataset), dtype=np.float64)
    try:
        report = multiclass_auc(scores, dataset.targets())
    except UndefinedAucError:
        return {}
    return report.class_auc


def ppss_probabilities(class_auc: dict[int, float], classes) -> np.ndarray:
    """Member probabilities q_c proportional to (1 - classAUC_c).

    Classes without a defined AUC count as maximally uncertain (0.5). A
    perfectly separable partition (all AUC 1) falls back to uniform.
    """
    raw = np.array([1.0 - class_auc.get(c, 0.5) for c in classes], dtype=np.float64)
    raw = np.maximum(raw, 0.0)
    total = raw.sum()
    if total <= 0.0:
        return np.full(len(classes), 1.0 / len(classes))
    return raw / total


def ppss_select(train: Dataset, classifier, k: int, seed: int,
                eval_set: Dataset | None = None,
                class_auc: dict[int, float] | None = None) -> SamplePool:
    """Partition-performance selection: class members are chosen with
    probability rising in classifier uncertainty (1 - class AUC), rows within
    a member uniformly. AUCs come from `eval_set` (default: train itself)."""
    if class_auc is None:
        class_auc = class_auc_scores(classifier, eval_set if eval_set is not None else train)
    classes = sorted(train.class_index)
    q = ppss_probabilities(class_auc, classes)
    rng = np.random.default_rng(seed)
    pool = np.empty(k, dtype=np.int64)
    for t in range(k):
        c = classes[int(rng.choice(len(classes), p=q))]
        pool[t] = int(rng.choice(np.asarray(train.class_index[c])))
    return SamplePool(pool)


def two_means(counts: np.ndarray, max_iter: int = 100) -> tuple[float, float]:
    """1-d k-means with k=2, centroids initialized at min and max."""
    counts = np.asarray(counts, dtype=np.float64)
    lo, hi = counts.min(), counts.max()
    if lo == hi:
        return float(lo), float(hi)
    for _ in range(max_iter):
        to_hi = np.abs(counts - hi) < np.abs(counts - lo)
        new_lo = counts[~to_hi].mean()
        new_hi = counts[to_hi].mean()
        if new_lo == lo and new_hi == hi:
            break
        lo, hi = new_lo, new_hi
    return float(lo), float(hi)


def feature_imbalance_ratio(counts) -> float:
    """Distance between the 2-means centroids of a feature's value counts,
    scaled by the maximum count; 0 for perfectly balanced features."""
    counts = np.asarray(counts, dtype=np.float64)
    if counts.size < 2:
        return 0.0
    lo, hi = two_means(counts)
    return float(abs(hi - lo) / counts.max())


def imbalance_weights(train: Dataset) -> FeatureWeighting:
    """Weight features by how imbalanced their observed value counts are."""
    ratios = []
    for j in range(len(train.schema.features)):
        column = [s.features[j] for s in train.samples]
        _, counts = np.unique(np.asarray(column, dtype=object), return_counts=True)
        ratios.append(feature_imbalance_ratio(counts))
    return FeatureWeighting("imbalance", _normalize(np.array(ratios)),
                            train.schema.feature_names())


def _accuracy(classifier, dataset: Dataset) -> float:
    return float(np.mean(np.asarray(classifier.predict(dataset)) == dataset.targets()))


def permutation_importance(classifier, test: Dataset, repeats: int = 5,
                           seed: int = 0) -> FeatureWeighting:
    """Accuracy drop when one feature column is shuffled; averaged over
    repeats, clamped at zero, normalized."""
    if len(test) == 0:
        raise ValueError("empty evaluation set")
    rng = np.random.default_rng(seed)
    baseline = _accuracy(classifier, test)
    n_features = len(test.schema.features)
    drops = np.zeros(n_features)
    from dataclasses import replace as _replace
    for j in range(n_features):
        column = [s.features[j] for s in test.samples]
        acc = 0.0
        for _ in range(repeats):
            perm = rng.permutation(len(column))
            shuffled = tuple(
                _replace(s, features=s.features[:j] + (column[perm[i]],) + s.features[j + 1:])
                for i, s in enumerate(test.samples)
            )
            acc += _accuracy(classifier, Dataset(test.schema, shuffled))
        drops[j] = baseline - acc / repeats
    return FeatureWeighting("permutation", _normalize(drops), test.schema.feature_names())


def drop_column_importance(model_factory, train: Dataset, test: Dataset) -> FeatureWeighting:
    """Accuracy drop when the model is retrained without one feature.

    `model_factory` fits a fresh classifier on a given dataset; this retrains
    once per feature, which is the expensive route among the importances.
    """
    baseline = _accuracy(model_factory(train), test)
    n_features = len(train.schema.features)
    drops = np.zeros(n_features)
    for j in range(n_features):
        model = model_factory(train.drop_feature(j))
        drops[j] = baseline - _accuracy(model, test.drop_feature(j))
    return FeatureWeighting("drop_column", _normalize(drops), train.schema.feature_names())


def gini_importance(model) -> FeatureWeighting:
    """Total split-impurity decrease attributed to each feature, summed over
    all trees of a tree-based model."""
    raw = getattr(model, "feature_importances", None)
    if raw is None:
        raise UnsupportedModelError(
            f"{type(model).__name__} is not tree-based; gini importance unavailable"
        )
    values = np.asarray(raw() if callable(raw) else raw, dtype=np.float64)
    names = getattr(model, "feature_names", ())
    return FeatureWeighting("gini", _normalize(values), tuple(names))


def select_features(sample, weighting: FeatureWeighting, count, seed: int) -> np.ndarray:
    """Draw distinct feature indices without replacement, probability
    proportional to the weighting (renormalized after each draw). `count`
    may be an int or an inclusive (lo, hi) range drawn per call."""
    n = len(sample.features)
    if weighting.weights.size != n:
        raise ValueError("weighting length does not match feature count")
    rng = np.random.default_rng(seed)
    k = count if isinstance(count, int) else int(rng.integers(count[0], count[1] + 1))
    if k > n:
        raise ValueError(f"cannot select {k} of {n} features")
    probs = weighting.weights
    if probs.sum() <= 0.0:
        probs = np.full(n, 1.0 / n)
    return _draw_weighted_no_replacement(rng, probs, k)
