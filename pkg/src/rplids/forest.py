"""Self-contained random-forest learner, stratified k-fold CV, detection metrics.

Labels are 0 (benign) and 1 (malicious). Every tie, in tree leaves and in the
forest vote, resolves to benign so that reported TPR/FPR are reproducible.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np


@dataclass
class Metrics:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.total if self.total else math.nan

    @property
    def tpr(self) -> float:
        pos = self.tp + self.fn
        return self.tp / pos if pos else math.nan

    @property
    def fpr(self) -> float:
        neg = self.fp + self.tn
        return self.fp / neg if neg else math.nan

    def add(self, y_true: np.ndarray, y_pred: np.ndarray) -> None:
        y_true = np.asarray(y_true)
        y_pred = np.asarray(y_pred)
        self.tp += int(np.sum((y_true == 1) & (y_pred == 1)))
        self.fp += int(np.sum((y_true == 0) & (y_pred == 1)))
        self.tn += int(np.sum((y_true == 0) & (y_pred == 0)))
        self.fn += int(np.sum((y_true == 1) & (y_pred == 0)))


def stable_seed(*parts) -> int:
    """Deterministic 63-bit seed from arbitrary string-able parts."""
    text = "|".join(str(p) for p in parts)
    raw = hashlib.blake2b(text.encode(), digest_size=8).digest()
    return int.from_bytes(raw, "big") >> 1


class _Node:
    __slots__ = ("feature", "threshold", "left", "right", "label")

    def __init__(self):
        self.feature = -1
        self.threshold = 0.0
        self.left = None
        self.right = None
        self.label = 0


class DecisionTree:
    """CART with Gini impurity, axis-aligned splits, random feature subsets per split."""

    def __init__(self, max_features: int, min_leaf: int = 1):
        self.max_features = max_features
        self.min_leaf = min_leaf
        self.root: _Node | None = None

    def fit(self, X: np.ndarray, y: np.ndarray, rng: np.random.Generator) -> "DecisionTree":
        self.root = self._grow(X, y, rng)
        return self

    def _leaf(self, y: np.ndarray) -> _Node:
        node = _Node()
        ones = int(y.sum())
        node.label = 1 if ones * 2 > len(y) else 0  # tie -> benign
        return node

    def _grow(self, X: np.ndarray, y: np.ndarray, rng: np.random.Generator) -> _Node:
        n = len(y)
        ones = int(y.sum())
        if ones == 0 or ones == n or n < 2 * self.min_leaf:
            return self._leaf(y)
        n_feat = X.shape[1]
        feats = rng.choice(n_feat, size=min(self.max_features, n_feat), replace=False)
        best = None  # (score, feature, threshold)
        for f in feats:
            col = X[:, f]
            order = np.argsort(col, kind="mergesort")
            cs = col[order]
            ys = y[order]
            cut = np.nonzero(cs[:-1] < cs[1:])[0]
            if cut.size == 0:
                continue
            left_n = cut + 1
            right_n = n - left_n
            ok = (left_n >= self.min_leaf) & (right_n >= self.min_leaf)
            if not ok.any():
                continue
            cum1 = np.cumsum(ys)
            left1 = cum1[cut]
            right1 = ones - left1
            gl = 1.0 - (left1**2 + (left_n - left1) ** 2) / left_n.astype(float) ** 2
            gr = 1.0 - (right1**2 + (right_n - right1) ** 2) / right_n.astype(float) ** 2
            score = (left_n * gl + right_n * gr) / n
            score[~ok] = np.inf
            i = int(np.argmin(score))
            if best is None or score[i] < best[0]:
                best = (float(score[i]), int(f), (cs[cut[i]] + cs[cut[i] + 1]) / 2.0)
        if best is None or not np.isfinite(best[0]):
            return self._leaf(y)
        node = _Node()
        node.feature = best[1]
        node.threshold = best[2]
        mask = X[:, node.feature] < node.threshold
        node.left = self._grow(X[mask], y[mask], rng)
        node.right = self._grow(X[~mask], y[~mask], rng)
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(len(X), dtype=np.int64)
        for i, row in enumerate(X):
            node = self.root
            while node.left is not None:
                node = node.left if row[node.feature] < node.threshold else node.right
            out[i] = node.label
        return out


class RandomForest:
    """Bagged CART ensemble; prediction is the majority tree vote, ties benign."""

    def __init__(
        self,
        n_trees: int = 100,
        max_features: int | None = None,
        min_leaf: int = 1,
        seed: int = 0,
    ):
        self.n_trees = n_trees
        self.max_features = max_features
        self.min_leaf = min_leaf
        self.seed = seed
        self.trees: list[DecisionTree] = []
        self.n_features_ = 0

    def fit(self, X: np.ndarray, y: np.ndarray) -> "RandomForest":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=np.int64)
        if X.ndim != 2 or len(X) != len(y):
            raise ValueError("X must be 2-D with one label per row")
        if np.isnan(X).any():
            raise ValueError("features contain NaN")
        classes = np.unique(y)
        if len(classes) < 2:
            raise ValueError(
                f"training needs both classes; got only {classes.tolist()} "
                f"({len(y)} rows)"
            )
        self.n_features_ = X.shape[1]
        max_features = self.max_features or max(1, int(math.isqrt(self.n_features_)))
        rng = np.random.default_rng(self.seed)
        n = len(y)
        self.trees = []
        for _ in range(self.n_trees):
            idx = rng.integers(0, n, size=n)
            tree = DecisionTree(max_features=max_features, min_leaf=self.min_leaf)
            tree.fit(X[idx], y[idx], rng)
            self.trees.append(tree)
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[1] != self.n_features_:
            raise ValueError(f"expected {self.n_features_} features, got {X.shape[1]}")
        votes = np.zeros(len(X), dtype=np.int64)
        for tree in self.trees:
            votes += tree.predict(X)
        return (votes * 2 > len(self.trees)).astype(np.int64)  # tie -> benign


def stratified_fold_indices(y: np.ndarray, k: int, seed: int) -> list[np.ndarray]:
    """Deal each class round-robin into k folds after a seeded shuffle.

    Keeps every fold's class ratio within one row of the global ratio.
    """
    y = np.asarray(y)
    if k < 2:
        raise ValueError("k must be >= 2")
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    for cls in np.unique(y):
        idx = np.nonzero(y == cls)[0]
        if len(idx) < k:
            raise ValueError(f"class {cls} has {len(idx)} rows, need >= {k} for {k}-fold CV")
        idx = idx[rng.permutation(len(idx))]
        for i, row in enumerate(idx):
            folds[i % k].append(int(row))
    return [np.array(sorted(f), dtype=np.int64) for f in folds]


def kfold_cv(
    X: np.ndarray,
    y: np.ndarray,
    k: int = 10,
    seed: int = 0,
    n_trees: int = 100,
    min_leaf: int = 1,
) -> Metrics:
    """Stratified k-fold cross-validation, metrics pooled over held-out predictions."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    folds = stratified_fold_indices(y, k, seed)
    metrics = Metrics()
    for fold_no, test_idx in enumerate(folds):
        mask = np.ones(len(y), dtype=bool)
        mask[test_idx] = False
        model = RandomForest(
            n_trees=n_trees, min_leaf=min_leaf, seed=stable_seed(seed, "fold", fold_no)
        )
        model.fit(X[mask], y[mask])
        metrics.add(y[test_idx], model.predict(X[test_idx]))
    return metrics
