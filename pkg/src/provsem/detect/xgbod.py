"""XGBOD-style detector: outlier-score columns appended to the features, then boosting.

Simplification of the original method: a fixed set of four scorers is used and
every column is kept (no per-column selection).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gbdt import GbdtConfig, GbdtModel, train_gbdt
from .outliers import OutlierConfig, ScoreRecipe, fit_recipe, score_with


@dataclass
class XgbodModel:
    recipe: ScoreRecipe
    combiner: GbdtModel

    @property
    def n_features(self) -> int:
        return self.recipe.reference.shape[1]

    def augment(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return np.hstack([X, score_with(self.recipe, X)])

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.combiner.predict_proba(self.augment(X))


def train_xgbod(
    X,
    y,
    reference=None,
    config: GbdtConfig = GbdtConfig(),
    outlier_config: OutlierConfig = OutlierConfig(),
    grid: dict | None = None,
    seed: int = 0,
) -> XgbodModel:
    """Train the combiner on ``[X | scores]``.

    ``reference`` defaults to the benign (label 0) rows of ``X``. Training rows
    that are part of the reference skip themselves in neighbor-based scorers.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    self_index = None
    if reference is None:
        ref_rows = np.nonzero(y == 0)[0]
        reference = X[ref_rows]
        self_index = np.full(X.shape[0], -1, dtype=np.int64)
        self_index[ref_rows] = np.arange(ref_rows.size)
    recipe = fit_recipe(reference, outlier_config)
    scores = score_with(recipe, X, self_index)
    combiner = train_gbdt(np.hstack([X, scores]), y, config, grid, seed)
    return XgbodModel(recipe, combiner)
