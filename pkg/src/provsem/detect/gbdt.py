"""Gradient-boosted regression trees on the logistic loss.

Features are quantile-binned once per fit (at most ``max_bins`` bins); with fewer
distinct values than bins the binning is exact. Each round fits a depth-limited
least-squares tree to the pseudo-residuals ``y - p`` and then sets every leaf to a
damped Newton step. A leaf step that would raise that leaf's loss is halved until
it does not, which makes the staged training loss nonincreasing.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, ShapeError, TrainingError

P_CLIP = 1e-15
DEFAULT_GRID = {"max_depth": [2, 3, 4], "n_rounds": [100, 200], "learning_rate": [0.05, 0.1]}


def sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def logistic_loss(y: np.ndarray, raw: np.ndarray) -> float:
    """Mean binary cross-entropy on raw log-odds, computed stably."""
    return float(np.mean(np.logaddexp(0.0, raw) - y * raw))


@dataclass(frozen=True)
class GbdtConfig:
    max_depth: int = 3
    n_rounds: int = 200
    learning_rate: float = 0.1
    max_bins: int = 64
    min_samples_leaf: int = 1

    def __post_init__(self):
        if self.max_depth < 0 or self.n_rounds < 0 or not self.learning_rate > 0:
            raise ConfigError(f"invalid GBDT config {self}")
        if not 2 <= self.max_bins <= 255:
            raise ConfigError("max_bins must be in [2, 255]")


@dataclass
class Tree:
    """Flat array tree. Leaves have ``feature == -1``; a row goes left when x <= threshold."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            feat = self.feature[node]
            inner = feat >= 0
            if not inner.any():
                return node
            rows = np.nonzero(inner)[0]
            go_left = X[rows, feat[rows]] <= self.threshold[node[rows]]
            node[rows] = np.where(go_left, self.left[node[rows]], self.right[node[rows]])

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]


@dataclass
class GbdtModel:
    trees: list[Tree]
    base_score: float
    config: GbdtConfig
    n_features: int
    train_loss: list[float] = field(default_factory=list)

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ShapeError(f"expected {self.n_features} features, got shape {X.shape}")
        raw = np.full(X.shape[0], self.base_score)
        for t in self.trees:
            raw += t.predict(X)
        return raw

    def staged_decision(self, X: np.ndarray):
        raw = np.full(X.shape[0], self.base_score)
        yield raw.copy()
        for t in self.trees:
            raw = raw + t.predict(X)
            yield raw.copy()

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return sigmoid(self.decision_function(X))


def _bin_edges(X: np.ndarray, max_bins: int) -> list[np.ndarray]:
    """Per-feature split thresholds (midpoints between consecutive bin values)."""
    edges = []
    for j in range(X.shape[1]):
        u = np.unique(X[:, j])
        if u.size > max_bins:
            q = np.quantile(X[:, j], np.linspace(0, 1, max_bins + 1)[1:-1], method="linear")
            cuts = np.unique(q)
        else:
            cuts = (u[:-1] + u[1:]) / 2.0
        edges.append(cuts)
    return edges


def _binned(X: np.ndarray, edges: list[np.ndarray]) -> np.ndarray:
    out = np.empty(X.shape, dtype=np.uint8)
    for j, e in enumerate(edges):
        out[:, j] = np.searchsorted(e, X[:, j], side="left")
    return out


def _leaf_step(y, raw, lr):
    """Damped Newton step for one leaf, halved until the leaf loss does not increase."""
    p = sigmoid(raw)
    g = np.sum(y - p)
    h = np.sum(p * (1.0 - p))
    step = lr * g / max(h, 1e-12)
    if step == 0.0:
        return 0.0
    before = np.sum(np.logaddexp(0.0, raw) - y * raw)
    for _ in range(60):
        r = raw + step
        if np.sum(np.logaddexp(0.0, r) - y * r) <= before:
            return float(step)
        step *= 0.5
    return 0.0


def _build_tree(B, edges, resid, y, raw, cfg: GbdtConfig) -> Tree:
    n, d = B.shape
    nb = cfg.max_bins + 1
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(feature) - 1

    root = new_node()
    stack = [(root, np.arange(n), 0)]
    offsets = (np.arange(d) * nb)[None, :]
    while stack:
        node, rows, depth = stack.pop()
        m = rows.size
        best = None
        if depth < cfg.max_depth and m >= 2 * cfg.min_samples_leaf:
            codes = (B[rows].astype(np.int64) + offsets).ravel()
            r = np.repeat(resid[rows], d)
            sums = np.bincount(codes, weights=r, minlength=d * nb).reshape(d, nb)
            cnts = np.bincount(codes, minlength=d * nb).reshape(d, nb)
            csum = np.cumsum(sums, axis=1)[:, :-1]
            ccnt = np.cumsum(cnts, axis=1)[:, :-1]
            total_s, total_c = csum[0, -1] + sums[0, -1], m
            rc = total_c - ccnt
            valid = (ccnt >= cfg.min_samples_leaf) & (rc >= cfg.min_samples_leaf)
            # only cut positions that exist as edges for the feature
            nedges = np.array([e.size for e in edges])
            valid &= np.arange(nb - 1)[None, :] < nedges[:, None]
            if valid.any():
                with np.errstate(divide="ignore", invalid="ignore"):
                    gain = csum**2 / ccnt + (total_s - csum) ** 2 / rc - total_s**2 / total_c
                gain = np.where(valid, gain, -np.inf)
                flat = int(np.argmax(gain))  # first max: lowest feature, then lowest cut
                if np.isfinite(gain.flat[flat]) and gain.flat[flat] >= -1e-12:
                    best = divmod(flat, nb - 1)
        if best is None:
            value[node] = _leaf_step(y[rows], raw[rows], cfg.learning_rate)
            continue
        j, b = best
        go_left = B[rows, j] <= b
        lnode, rnode = new_node(), new_node()
        feature[node], threshold[node] = j, float(edges[j][b])
        left[node], right[node] = lnode, rnode
        stack.append((rnode, rows[~go_left], depth + 1))
        stack.append((lnode, rows[go_left], depth + 1))

    return Tree(
        np.array(feature, dtype=np.int64), np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.int64), np.array(right, dtype=np.int64), np.array(value, dtype=np.float64),
    )


def _check_training(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ShapeError(f"features {X.shape} and labels {y.shape} do not align")
    if not np.all(np.isfinite(X)):
        raise TrainingError("features contain NaN or infinite values")
    if not np.all((y == 0) | (y == 1)):
        raise TrainingError("labels must be 0/1")
    return X, y.astype(np.float64)


def fit_gbdt(X, y, config: GbdtConfig = GbdtConfig(), allow_single_class: bool = True) -> GbdtModel:
    X, y = _check_training(X, y)
    if not allow_single_class and np.unique(y).size < 2:
        raise TrainingError("training set holds a single class")
    prior = float(np.clip(y.mean(), P_CLIP, 1 - P_CLIP)) if y.size else 0.5
    base = float(np.log(prior / (1.0 - prior)))
    edges = _bin_edges(X, config.max_bins)
    B = _binned(X, edges)
    raw = np.full(X.shape[0], base)
    losses = [logistic_loss(y, raw)]
    trees = []
    for _ in range(config.n_rounds):
        resid = y - sigmoid(raw)
        tree = _build_tree(B, edges, resid, y, raw, config)
        trees.append(tree)
        raw = raw + tree.predict(X)
        losses.append(logistic_loss(y, raw))
    return GbdtModel(trees, base, config, X.shape[1], losses)


def _kfold_indices(y: np.ndarray, k: int, seed: int) -> list[np.ndarray]:
    """Stratified fold assignment, deterministic in ``seed``."""
    rng = np.random.default_rng(seed)
    folds = [[] for _ in range(k)]
    for cls in (0.0, 1.0):
        idx = np.nonzero(y == cls)[0]
        idx = idx[rng.permutation(idx.size)]
        for i, row in enumerate(idx):
            folds[i % k].append(row)
    return [np.sort(np.array(f, dtype=np.int64)) for f in folds]


def expand_grid(grid: dict) -> list[dict]:
    keys = list(grid)
    return [dict(zip(keys, vals)) for vals in itertools.product(*(grid[k] for k in keys))]


def train_gbdt(X, y, config: GbdtConfig = GbdtConfig(), grid: dict | None = None, seed: int = 0, folds: int = 3) -> GbdtModel:
    """Fit a GBDT; with ``grid``, pick the config by stratified k-fold accuracy.

    Ties go to the earliest grid entry. Training is deterministic given
    (data, config, grid, seed).
    """
    X, yf = _check_training(X, y)
    if np.unique(yf).size < 2:
        raise TrainingError("training set holds a single class")
    if grid:
        fold_idx = _kfold_indices(yf, folds, seed)
        best_cfg, best_acc = None, -1.0
        for params in expand_grid(grid):
            cfg = GbdtConfig(**{**config.__dict__, **params})
            correct = 0
            for f in range(folds):
                test = fold_idx[f]
                train = np.sort(np.concatenate([fold_idx[g] for g in range(folds) if g != f]))
                m = fit_gbdt(X[train], yf[train], cfg)
                correct += int(np.sum((m.predict_proba(X[test]) >= 0.5) == (yf[test] == 1)))
            acc = correct / X.shape[0]
            if acc > best_acc:
                best_cfg, best_acc = cfg, acc
        config = best_cfg
    return fit_gbdt(X, yf, config)
