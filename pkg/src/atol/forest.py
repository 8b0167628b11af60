"""Random forest of Gini CART trees.

Pinned defaults: 100 trees, sqrt(p) candidate features per split, trees grown
until pure or smaller than ``min_samples_split``, bootstrap resampling.
Prediction is a hard majority vote over trees; each tree votes the argmax of
its leaf histogram. Ties go to the class that sorts first.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_features: str | int = "sqrt"
    min_samples_split: int = 2
    max_depth: int | None = None
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if not (self.max_features in ("sqrt", "all")
                or (isinstance(self.max_features, int) and self.max_features >= 1)):
            raise ValueError(f"bad max_features {self.max_features!r}")

    def n_candidates(self, p):
        if self.max_features == "sqrt":
            return max(1, int(math.sqrt(p)))
        if self.max_features == "all":
            return p
        return min(p, self.max_features)


@dataclass(frozen=True, eq=False)
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray

    @property
    def n_nodes(self):
        return len(self.feature)

    @property
    def is_leaf(self):
        return self.left < 0

    def apply(self, X):
        return _backend.kernels().apply_tree(X, self.feature, self.threshold, self.left, self.right)

    def predict_codes(self, X):
        return np.argmax(self.counts, axis=1)[self.apply(X)]


@dataclass(frozen=True, eq=False)
class ForestModel:
    trees: tuple
    classes: np.ndarray
    n_features: int
    config: ForestConfig = field(default_factory=ForestConfig)

    def _check(self, X):
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got shape {X.shape}")
        return X

    def votes(self, X):
        X = self._check(X)
        votes = np.zeros((X.shape[0], len(self.classes)), dtype=np.int64)
        rows = np.arange(X.shape[0])
        for tree in self.trees:
            np.add.at(votes, (rows, tree.predict_codes(X)), 1)
        return votes

    def predict(self, X):
        return self.classes[np.argmax(self.votes(X), axis=1)]

    def accuracy(self, X, y):
        X = np.asarray(X)
        if X.shape[0] == 0:
            raise ValueError("empty evaluation set")
        y = np.asarray(y)
        if len(y) != X.shape[0]:
            raise ValueError("X and y differ in length")
        return float(np.mean(self.predict(X) == y))

    @property
    def feature_importances(self):
        """Total Gini decrease per feature, normalised to sum to one (zeros if no split)."""
        total = np.zeros(self.n_features)
        for t in self.trees:
            n = t.counts.sum(axis=1).astype(np.float64)
            gini = n - (t.counts ** 2).sum(axis=1) / np.maximum(n, 1)
            inner = np.flatnonzero(~t.is_leaf)
            gain = gini[inner] - gini[t.left[inner]] - gini[t.right[inner]]
            np.add.at(total, t.feature[inner], gain)
        s = total.sum()
        return total / s if s > 0 else total


def fit(X, y, cfg: ForestConfig | None = None) -> ForestModel:
    cfg = cfg or ForestConfig()
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2:
        raise ValueError("X must be 2-D")
    n, p = X.shape
    if len(y) != n:
        raise ValueError("X and y differ in length")
    if n < 2:
        raise ValueError("need at least 2 samples")
    if np.isnan(X).any():
        raise ValueError("NaN in features")
    classes, codes = np.unique(y, return_inverse=True)
    if len(classes) < 2:
        raise ValueError("degenerate labels")
    codes = np.ascontiguousarray(codes.ravel(), dtype=np.int64)
    k = _backend.kernels()
    max_depth = -1 if cfg.max_depth is None else cfg.max_depth
    mtry = cfg.n_candidates(p)
    trees = []
    for t in range(cfg.n_trees):
        rng = np.random.default_rng([cfg.seed, t])
        sample = rng.integers(0, n, size=n) if cfg.bootstrap else np.arange(n)
        tree_seed = int(rng.integers(0, 2**63))
        arrays = k.build_tree(X, codes, np.ascontiguousarray(sample, dtype=np.int64), len(classes),
                              mtry, cfg.min_samples_split, max_depth, tree_seed)
        trees.append(Tree(*arrays))
    return ForestModel(tuple(trees), classes, p, cfg)


def accuracy(model: ForestModel, X, y) -> float:
    return model.accuracy(X, y)
