"""Unsupervised outlier scores against a benign reference set.

Every column is oriented so that larger means more anomalous.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from ..errors import ConfigError, ShapeError

SCORERS = ("knn_max", "knn_mean", "lof", "hbos")


@dataclass(frozen=True)
class OutlierConfig:
    scorers: tuple[str, ...] = SCORERS
    knn_k: int = 5
    lof_k: int = 10
    hbos_bins: int = 10
    hbos_max_dims: int = 32
    hbos_alpha: float = 0.1

    def __post_init__(self):
        unknown = set(self.scorers) - set(SCORERS)
        if unknown:
            raise ConfigError(f"unknown scorers {sorted(unknown)}")


@dataclass
class ScoreRecipe:
    """What is needed to recompute score columns for new rows."""

    reference: np.ndarray
    config: OutlierConfig
    hbos_dims: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    hbos_edges: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    hbos_heights: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    ref_kdist: np.ndarray = field(default_factory=lambda: np.zeros(0))
    ref_lrd: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def n_columns(self) -> int:
        return len(self.config.scorers)


def _neighbors(D: np.ndarray, k: int, exclude: np.ndarray | None):
    """Indices and distances of the k nearest reference points per row (stable order)."""
    if exclude is not None:
        D = D.copy()
        rows = np.nonzero(exclude >= 0)[0]
        D[rows, exclude[rows]] = np.inf
    idx = np.argsort(D, axis=1, kind="stable")[:, :k]
    return idx, np.take_along_axis(D, idx, axis=1)


def fit_recipe(reference: np.ndarray, config: OutlierConfig = OutlierConfig()) -> ScoreRecipe:
    ref = np.asarray(reference, dtype=np.float64)
    if ref.ndim != 2 or ref.shape[0] == 0:
        raise ShapeError("reference must be a nonempty 2-D array")
    n = ref.shape[0]
    needs_knn = {"knn_max", "knn_mean"} & set(config.scorers)
    if needs_knn and config.knn_k >= n:
        raise ConfigError(f"knn_k={config.knn_k} must be smaller than the reference size {n}")
    if "lof" in config.scorers and config.lof_k >= n:
        raise ConfigError(f"lof_k={config.lof_k} must be smaller than the reference size {n}")
    recipe = ScoreRecipe(ref.copy(), config)

    if "lof" in config.scorers:
        D = cdist(ref, ref)
        idx, dist = _neighbors(D, config.lof_k, np.arange(n))
        kdist = dist[:, -1]
        reach = np.maximum(dist, kdist[idx])
        recipe.ref_kdist = kdist
        recipe.ref_lrd = 1.0 / np.maximum(reach.mean(axis=1), 1e-10)

    if "hbos" in config.scorers:
        var = ref.var(axis=0)
        # highest-variance dims first; stable so ties keep column order
        dims = np.argsort(-var, kind="stable")[: config.hbos_max_dims]
        dims = np.sort(dims)
        edges, heights = [], []
        for j in dims:
            lo, hi = ref[:, j].min(), ref[:, j].max()
            if hi <= lo:
                hi = lo + 1.0
            e = np.linspace(lo, hi, config.hbos_bins + 1)
            h, _ = np.histogram(ref[:, j], bins=e)
            edges.append(e)
            heights.append(h / h.max())
        recipe.hbos_dims = dims.astype(np.int64)
        recipe.hbos_edges = np.array(edges).reshape(len(dims), config.hbos_bins + 1)
        recipe.hbos_heights = np.array(heights, dtype=np.float64).reshape(len(dims), config.hbos_bins)
    return recipe


def score_with(recipe: ScoreRecipe, X: np.ndarray, self_index: np.ndarray | None = None) -> np.ndarray:
    """Score columns for ``X``, in the order of ``recipe.config.scorers``.

    ``self_index[i]`` (when >= 0) names the reference row that *is* row ``i``;
    that row is skipped in neighbor searches so training points do not match
    themselves.
    """
    X = np.asarray(X, dtype=np.float64)
    cfg = recipe.config
    if X.ndim != 2 or X.shape[1] != recipe.reference.shape[1]:
        raise ShapeError(f"expected width {recipe.reference.shape[1]}, got shape {X.shape}")
    if X.shape[0] == 0 or not cfg.scorers:
        return np.zeros((X.shape[0], len(cfg.scorers)))
    D = cdist(X, recipe.reference)
    cols = {}
    if {"knn_max", "knn_mean"} & set(cfg.scorers):
        _, dist = _neighbors(D, cfg.knn_k, self_index)
        cols["knn_max"] = dist[:, -1]
        cols["knn_mean"] = dist.mean(axis=1)
    if "lof" in cfg.scorers:
        idx, dist = _neighbors(D, cfg.lof_k, self_index)
        reach = np.maximum(dist, recipe.ref_kdist[idx])
        lrd = 1.0 / np.maximum(reach.mean(axis=1), 1e-10)
        cols["lof"] = recipe.ref_lrd[idx].mean(axis=1) / lrd
    if "hbos" in cfg.scorers:
        total = np.zeros(X.shape[0])
        for t, j in enumerate(recipe.hbos_dims):
            e = recipe.hbos_edges[t]
            b = np.clip(np.searchsorted(e, X[:, j], side="right") - 1, 0, cfg.hbos_bins - 1)
            inside = (X[:, j] >= e[0]) & (X[:, j] <= e[-1])
            h = np.where(inside, recipe.hbos_heights[t][b], 0.0)
            total += np.log(1.0 / (h + cfg.hbos_alpha))
        cols["hbos"] = total
    return np.column_stack([cols[s] for s in cfg.scorers])


def unsupervised_score_features(reference, X, config: OutlierConfig = OutlierConfig(), self_index=None) -> np.ndarray:
    return score_with(fit_recipe(reference, config), X, self_index)
