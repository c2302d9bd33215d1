"""Classifier suite behind one fit/predict/predict_scores interface.

Trees, forest, boosting and linear SVMs all consume the shared numeric
encoding (integer codes + scaled continuous). Prediction is always the
argmax of predict_scores, ties resolved toward the lowest class index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset, Encoder
from .nn.core import softmax
from .nn.models import NnModelConfig, NNModel, TrainConfig, train_classifier


class Classifier:
    """Base: encodes datasets once at fit, exposes array-level hooks."""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.n_classes: int | None = None
        self._encoder: Encoder | None = None

    def fit(self, train: Dataset) -> "Classifier":
        if len(train) == 0:
            raise ValueError("empty training set")
        self._encoder = Encoder(train.schema)
        self.n_classes = train.n_classes
        self.feature_names = train.schema.feature_names()
        X, y = self._encoder.encode_dataset(train)
        self._fit_array(X, y, np.random.default_rng(self.seed))
        return self

    def _encode(self, data) -> np.ndarray:
        if isinstance(data, Dataset):
            return self._encoder.encode_samples(data.samples)
        if isinstance(data, np.ndarray):
            return data
        return self._encoder.encode_samples(data)

    def predict_scores(self, data) -> np.ndarray:
        return self._scores_array(self._encode(data))

    def predict(self, data) -> np.ndarray:
        return np.argmax(self.predict_scores(data), axis=1)

    def _fit_array(self, X: np.ndarray, y: np.ndarray, rng) -> None:
        raise NotImplementedError

    def _scores_array(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError


# ---------------------------------------------------------------------------
# decision trees

@dataclass
class _Node:
    feature: int = -1
    threshold: float = 0.0
    left: "_Node | None" = None
    right: "_Node | None" = None
    value: np.ndarray | None = None  # leaf payload

    @property
    def is_leaf(self) -> bool:
        return self.value is not None


def _best_split_gini(X, y, n_classes, features, min_leaf):
    """Exhaustive threshold scan maximizing gini decrease.

    Returns (feature, threshold, weighted_child_impurity) or None. Ties keep
    the first candidate in (feature order, threshold order).
    """
    n = y.size
    best = None
    best_score = np.inf
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y] = 1.0
    for j in features:
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        left = np.cumsum(onehot[order], axis=0)
        total = left[-1]
        positions = np.nonzero(xs[:-1] < xs[1:])[0]
        positions = positions[(positions + 1 >= min_leaf) & (n - positions - 1 >= min_leaf)]
        if positions.size == 0:
            continue
        nl = (positions + 1).astype(np.float64)
        nr = n - nl
        sl = (left[positions] ** 2).sum(axis=1)
        sr = ((total - left[positions]) ** 2).sum(axis=1)
        # weighted child impurity in count units: (nl - sl/nl) + (nr - sr/nr)
        score = nl - sl / nl + nr - sr / nr
        i = int(np.argmin(score))
        if score[i] < best_score - 1e-12:
            best_score = score[i]
            threshold = 0.5 * (xs[positions[i]] + xs[positions[i] + 1])
            best = (int(j), float(threshold), float(score[i]))
    return best


def _best_split_sse(X, y, features, min_leaf):
    """Threshold scan minimizing summed squared error for regression trees."""
    n = y.size
    best = None
    best_score = np.inf
    for j in features:
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        ys = y[order]
        csum = np.cumsum(ys)
        csum2 = np.cumsum(ys**2)
        positions = np.nonzero(xs[:-1] < xs[1:])[0]
        positions = positions[(positions + 1 >= min_leaf) & (n - positions - 1 >= min_leaf)]
        if positions.size == 0:
            continue
        nl = (positions + 1).astype(np.float64)
        nr = n - nl
        sl, sl2 = csum[positions], csum2[positions]
        sr, sr2 = csum[-1] - sl, csum2[-1] - sl2
        score = (sl2 - sl**2 / nl) + (sr2 - sr**2 / nr)
        i = int(np.argmin(score))
        if score[i] < best_score - 1e-12:
            best_score = score[i]
            threshold = 0.5 * (xs[positions[i]] + xs[positions[i] + 1])
            best = (int(j), float(threshold), float(score[i]))
    return best


class _TreeFitter:
    """Grows one tree; criterion is gini (classification, y = int labels)
    or sse (regression, y = float targets)."""

    def __init__(self, criterion: str, n_classes: int = 0, max_depth: int | None = None,
                 min_leaf: int = 1, feature_subset: int | None = None, rng=None):
        self.criterion = criterion
        self.n_classes = n_classes
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.feature_subset = feature_subset
        self.rng = rng
        self.importances: np.ndarray | None = None

    def fit(self, X, y) -> _Node:
        self._n_root = X.shape[0]
        self.importances = np.zeros(X.shape[1])
        return self._grow(X, y, 0)

    def _leaf(self, y) -> _Node:
        if self.criterion == "gini":
            counts = np.bincount(y, minlength=self.n_classes).astype(np.float64)
            return _Node(value=counts / counts.sum())
        return _Node(value=np.array([y.mean()]))

    def _node_impurity(self, y) -> float:
        n = y.size
        if self.criterion == "gini":
            counts = np.bincount(y, minlength=self.n_classes).astype(np.float64)
            return float(n - (counts**2).sum() / n)
        return float((y**2).sum() - y.sum() ** 2 / n)

    def _grow(self, X, y, depth) -> _Node:
        n, d = X.shape
        if (self.max_depth is not None and depth >= self.max_depth) or n < 2 * self.min_leaf:
            return self._leaf(y)
        if self.criterion == "gini" and np.unique(y).size == 1:
            return self._leaf(y)
        if self.feature_subset is not None and self.feature_subset < d:
            features = np.sort(self.rng.choice(d, size=self.feature_subset, replace=False))
        else:
            features = np.arange(d)
        if self.criterion == "gini":
            found = _best_split_gini(X, y, self.n_classes, features, self.min_leaf)
        else:
            found = _best_split_sse(X, y, features, self.min_leaf)
        if found is None:
            return self._leaf(y)
        j, threshold, child_impurity = found
        decrease = self._node_impurity(y) - child_impurity
        if decrease <= 1e-12:
            return self._leaf(y)
        self.importances[j] += decrease / self._n_root
        mask = X[:, j] <= threshold
        return _Node(
            feature=j, threshold=threshold,
            left=self._grow(X[mask], y[mask], depth + 1),
            right=self._grow(X[~mask], y[~mask], depth + 1),
        )


def _tree_apply(root: _Node, X: np.ndarray, width: int) -> np.ndarray:
    out = np.empty((X.shape[0], width))

    def walk(node, idx):
        if node.is_leaf:
            out[idx] = node.value
            return
        mask = X[idx, node.feature] <= node.threshold
        walk(node.left, idx[mask])
        walk(node.right, idx[~mask])

    walk(root, np.arange(X.shape[0]))
    return out


class DecisionTreeClassifier(Classifier):
    """Greedy binary splits maximizing gini decrease; leaves hold class
    frequency distributions."""

    def __init__(self, max_depth: int | None = None, min_leaf: int = 1, seed: int = 0):
        super().__init__(seed)
        self.max_depth = max_depth
        self.min_leaf = min_leaf

    def _fit_array(self, X, y, rng):
        fitter = _TreeFitter("gini", n_classes=self.n_classes,
                             max_depth=self.max_depth, min_leaf=self.min_leaf)
        self._root = fitter.fit(X, y)
        self._importances = fitter.importances

    def _scores_array(self, X):
        return _tree_apply(self._root, X, self.n_classes)

    def feature_importances(self) -> np.ndarray:
        return self._importances.copy()


class RandomForestClassifier(Classifier):
    """Bagged gini trees with per-split feature subsetting.

    Scores are the mean of tree leaf distributions by default; the
    `majority_vote` flag switches scores to hard-vote fractions.
    """

    def __init__(self, n_trees: int = 20, max_depth: int | None = None, min_leaf: int = 1,
                 feature_subset_size: int | None = None, bootstrap: bool = True,
                 majority_vote: bool = False, seed: int = 0):
        super().__init__(seed)
        if n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.feature_subset_size = feature_subset_size
        self.bootstrap = bootstrap
        self.majority_vote = majority_vote

    def _fit_array(self, X, y, rng):
        n, d = X.shape
        subset = self.feature_subset_size or max(1, round(math.sqrt(d)))
        self._roots = []
        self._importances = np.zeros(d)
        for _ in range(self.n_trees):
            rows = rng.integers(0, n, size=n) if self.bootstrap else np.arange(n)
            fitter = _TreeFitter("gini", n_classes=self.n_classes, max_depth=self.max_depth,
                                 min_leaf=self.min_leaf, feature_subset=min(subset, d), rng=rng)
            self._roots.append(fitter.fit(X[rows], y[rows]))
            self._importances += fitter.importances
        self._importances /= self.n_trees

    def _scores_array(self, X):
        stack = np.stack([_tree_apply(r, X, self.n_classes) for r in self._roots])
        if self.majority_vote:
            votes = np.zeros((X.shape[0], self.n_classes))
            for per_tree in stack:
                votes[np.arange(X.shape[0]), np.argmax(per_tree, axis=1)] += 1.0
            return votes / self.n_trees
        return stack.mean(axis=0)

    def feature_importances(self) -> np.ndarray:
        return self._importances.copy()


class GradientBoostingClassifier(Classifier):
    """Additive regression trees fit to the softmax cross-entropy gradient,
    one tree per class per round."""

    def __init__(self, n_rounds: int = 30, learning_rate: float = 0.1,
                 max_depth: int = 3, min_leaf: int = 1, seed: int = 0):
        super().__init__(seed)
        if n_rounds < 0:
            raise ValueError("n_rounds must be >= 0")
        self.n_rounds = n_rounds
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.min_leaf = min_leaf

    def _fit_array(self, X, y, rng):
        n, d = X.shape
        k = self.n_classes
        onehot = np.zeros((n, k))
        onehot[np.arange(n), y] = 1.0
        scores = np.zeros((n, k))
        self._rounds: list[list[_Node]] = []
        self._importances = np.zeros(d)
        self.train_losses_ = [self._loss(scores, y)]
        for _ in range(self.n_rounds):
            probs = softmax(scores)
            residual = onehot - probs  # negative gradient of CE wrt scores
            round_trees = []
            for c in range(k):
                fitter = _TreeFitter("sse", max_depth=self.max_depth, min_leaf=self.min_leaf)
                root = fitter.fit(X, residual[:, c])
                self._importances += fitter.importances
                round_trees.append(root)
                scores[:, c] += self.learning_rate * _tree_apply(root, X, 1)[:, 0]
            self._rounds.append(round_trees)
            self.train_losses_.append(self._loss(scores, y))

    @staticmethod
    def _loss(scores, y) -> float:
        probs = softmax(scores)
        return float(-np.log(np.maximum(probs[np.arange(y.size), y], 1e-12)).mean())

    def _raw_scores(self, X, upto: int | None = None) -> np.ndarray:
        scores = np.zeros((X.shape[0], self.n_classes))
        for round_trees in self._rounds[: len(self._rounds) if upto is None else upto]:
            for c, root in enumerate(round_trees):
                scores[:, c] += self.learning_rate * _tree_apply(root, X, 1)[:, 0]
        return scores

    def _scores_array(self, X):
        return softmax(self._raw_scores(X))

    def staged_scores(self, data) -> list[np.ndarray]:
        """Probability matrices after 0, 1, ... n_rounds boosting rounds."""
        X = self._encode(data)
        return [softmax(self._raw_scores(X, upto=r)) for r in range(len(self._rounds) + 1)]

    def feature_importances(self) -> np.ndarray:
        return self._importances.copy()


class _BinarySvm:
    """Linear soft-margin SVM trained by full-batch subgradient descent on
    hinge loss with L2 regularization."""

    def __init__(self, dim: int, c: float, epochs: int, lr: float):
        self.w = np.zeros(dim)
        self.b = 0.0
        self.c = c
        self.epochs = epochs
        self.lr = lr

    def fit(self, X, y_signed):
        n = X.shape[0]
        lam = 1.0 / (self.c * n)
        for t in range(self.epochs):
            step = self.lr / (1.0 + 0.02 * t)
            margins = y_signed * (X @ self.w + self.b)
            violating = margins < 1.0
            grad_w = lam * self.w - (y_signed[violating, None] * X[violating]).sum(axis=0) / n
            grad_b = -y_signed[violating].sum() / n
            self.w -= step * grad_w
            self.b -= step * grad_b
        return self

    def margin(self, X) -> np.ndarray:
        return X @ self.w + self.b


class LinearSvmClassifier(Classifier):
    """One-vs-rest or one-vs-one linear SVMs.

    OvR scores are raw margins; OvO scores are vote counts with a bounded
    margin-sum term that settles vote ties, normalized to shares.
    """

    def __init__(self, mode: str = "ovr", c: float = 1.0, epochs: int = 300,
                 lr: float = 0.5, seed: int = 0):
        super().__init__(seed)
        if mode not in ("ovr", "ovo"):
            raise ValueError("mode must be 'ovr' or 'ovo'")
        self.mode = mode
        self.c = c
        self.epochs = epochs
        self.lr = lr
        self.degenerate_class: int | None = None

    def _fit_array(self, X, y, rng):
        classes = np.unique(y)
        self._machines = {}
        if classes.size < 2:
            # single-class training data: constant classifier
            self.degenerate_class = int(classes[0])
            return
        if self.mode == "ovr":
            for c in classes:
                machine = _BinarySvm(X.shape[1], self.c, self.epochs, self.lr)
                machine.fit(X, np.where(y == c, 1.0, -1.0))
                self._machines[int(c)] = machine
        else:
            for i, a in enumerate(classes):
                for b in classes[i + 1:]:
                    mask = (y == a) | (y == b)
                    machine = _BinarySvm(X.shape[1], self.c, self.epochs, self.lr)
                    machine.fit(X[mask], np.where(y[mask] == a, 1.0, -1.0))
                    self._machines[(int(a), int(b))] = machine

    @property
    def n_machines(self) -> int:
        return len(self._machines)

    def _scores_array(self, X):
        n = X.shape[0]
        if self.degenerate_class is not None:
            scores = np.zeros((n, self.n_classes))
            scores[:, self.degenerate_class] = 1.0
            return scores
        if self.mode == "ovr":
            scores = np.full((n, self.n_classes), -1e9)
            for c, machine in self._machines.items():
                scores[:, c] = machine.margin(X)
            return scores
        votes = np.zeros((n, self.n_classes))
        margin_sum = np.zeros((n, self.n_classes))
        for (a, b), machine in self._machines.items():
            m = machine.margin(X)
            votes[:, a] += m > 0
            votes[:, b] += m <= 0
            margin_sum[:, a] += m
            margin_sum[:, b] -= m
        # the sigmoid term is < 1, so it can only break exact vote ties
        scores = votes + 0.5 / (1.0 + np.exp(-margin_sum))
        return scores / scores.sum(axis=1, keepdims=True)


class NeuralNetClassifier(Classifier):
    """Classifier-interface wrapper around the neural model. Supports warm
    refits, which continue training the existing weights."""

    def __init__(self, cfg: NnModelConfig | None = None, tcfg: TrainConfig | None = None,
                 seed: int = 0):
        super().__init__(seed)
        self.cfg = cfg
        self.tcfg = tcfg or TrainConfig(seed=seed)
        self.model: NNModel | None = None

    def fit(self, train: Dataset) -> "NeuralNetClassifier":
        cfg = self.cfg or NnModelConfig(output_classes=train.n_classes)
        self.model = train_classifier(train, cfg, self.tcfg)
        self._encoder = self.model.encoder
        self.n_classes = cfg.output_classes
        self.feature_names = train.schema.feature_names()
        return self

    def refit(self, train: Dataset) -> "NeuralNetClassifier":
        if self.model is None:
            return self.fit(train)
        self.model = train_classifier(train, tcfg=self.tcfg, model=self.model)
        return self

    def _scores_array(self, X):
        return self.model.predict_scores(X)


class EmbeddingPreprocessClassifier(Classifier):
    """Wraps a classifier to fit and predict on embedded inputs."""

    def __init__(self, inner: Classifier, embedder):
        super().__init__(inner.seed)
        if embedder.granularity != "whole_sample":
            raise ValueError("preprocessing needs a whole-sample embedder")
        self.inner = inner
        self.embedder = embedder

    def fit(self, train: Dataset) -> "EmbeddingPreprocessClassifier":
        self._encoder = Encoder(train.schema)
        self.n_classes = train.n_classes
        self.feature_names = train.schema.feature_names()
        X, y = self._encoder.encode_dataset(train)
        z = self.embedder.embed_matrix(X)
        self.inner.n_classes = train.n_classes
        self.inner._fit_array(z, y, np.random.default_rng(self.inner.seed))
        return self

    def _scores_array(self, X):
        return self.inner._scores_array(self.embedder.embed_matrix(X))


CLASSIFIERS = {
    "decision_tree": DecisionTreeClassifier,
    "random_forest": RandomForestClassifier,
    "gradient_boosting": GradientBoostingClassifier,
    "svm_ovr": lambda **kw: LinearSvmClassifier(mode="ovr", **kw),
    "svm_ovo": lambda **kw: LinearSvmClassifier(mode="ovo", **kw),
    "nnmodel": NeuralNetClassifier,
}


def make_classifier(name: str, params: dict | None = None, seed: int = 0) -> Classifier:
    """Build a classifier by registry name; `params` map to constructor args."""
    if name not in CLASSIFIERS:
        raise ValueError(f"unknown classifier {name!r}; known: {sorted(CLASSIFIERS)}")
    params = dict(params or {})
    if name == "nnmodel":
        cfg_fields = {}
        if "embedding_dim" in params or "blocks" in params or "output_classes" in params:
            from .nn.models import LrndBlockConfig
            blocks = tuple(
                LrndBlockConfig(int(w), float(d))
                for w, d in params.pop("blocks", [[128, 0.25], [64, 0.25], [32, 0.25]])
            )
            cfg_fields = {
                "embedding_dim": int(params.pop("embedding_dim", 8)),
                "blocks": blocks,
                "output_classes": int(params.pop("output_classes", 21)),
            }
        tcfg_keys = {f for f in TrainConfig.__dataclass_fields__}
        tcfg_params = {k: params.pop(k) for k in list(params) if k in tcfg_keys}
        tcfg = TrainConfig(**{"seed": seed, **tcfg_params})
        cfg = NnModelConfig(**cfg_fields) if cfg_fields else None
        return NeuralNetClassifier(cfg=cfg, tcfg=tcfg, seed=seed)
    return CLASSIFIERS[name](seed=seed, **params)
