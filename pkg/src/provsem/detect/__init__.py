"""Detectors over reduced event vectors: MLP, GBDT and XGBOD-style boosting."""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np

from ..artifacts import pack_arrays, read_blob_model, write_blob_model
from ..errors import ConfigError
from .gbdt import DEFAULT_GRID, GbdtConfig, GbdtModel, Tree, fit_gbdt, train_gbdt
from .mlp import MlpConfig, MlpModel, train_mlp
from .outliers import OutlierConfig, ScoreRecipe, fit_recipe, score_with, unsupervised_score_features
from .xgbod import XgbodModel, train_xgbod

__all__ = [
    "DEFAULT_GRID", "GbdtConfig", "GbdtModel", "MlpConfig", "MlpModel", "OutlierConfig",
    "XgbodModel", "fit_gbdt", "load_model", "predict", "save_model", "train_gbdt", "train_mlp",
    "train_xgbod", "unsupervised_score_features", "fit_recipe", "score_with", "serialize_model",
]


def predict(model, X, threshold: float = 0.5) -> tuple[np.ndarray, np.ndarray]:
    """Positive-class probabilities and hard labels (``score >= threshold``)."""
    X = np.asarray(X, dtype=np.float64)
    if X.size == 0:
        return np.zeros(0), np.zeros(0, dtype=np.int64)
    scores = model.predict_proba(X)
    return scores, (scores >= threshold).astype(np.int64)


# --- persistence -------------------------------------------------------------

def _gbdt_arrays(m: GbdtModel, prefix: str = "") -> dict:
    sizes = np.array([t.feature.size for t in m.trees], dtype=np.int64)
    cat = (lambda attr, dt: np.concatenate([getattr(t, attr) for t in m.trees]).astype(dt)
           if m.trees else np.zeros(0, dtype=dt))
    return {
        f"{prefix}tree_sizes": sizes,
        f"{prefix}feature": cat("feature", np.int64),
        f"{prefix}threshold": cat("threshold", np.float64),
        f"{prefix}left": cat("left", np.int64),
        f"{prefix}right": cat("right", np.int64),
        f"{prefix}value": cat("value", np.float64),
        f"{prefix}train_loss": np.array(m.train_loss, dtype=np.float64),
    }


def _gbdt_meta(m: GbdtModel) -> dict:
    return {"base_score": m.base_score, "config": dataclasses.asdict(m.config), "n_features": m.n_features}


def _gbdt_from(meta: dict, arr: dict, prefix: str = "") -> GbdtModel:
    trees, start = [], 0
    for size in arr[f"{prefix}tree_sizes"]:
        sl = slice(start, start + int(size))
        trees.append(Tree(arr[f"{prefix}feature"][sl], arr[f"{prefix}threshold"][sl], arr[f"{prefix}left"][sl],
                          arr[f"{prefix}right"][sl], arr[f"{prefix}value"][sl]))
        start += int(size)
    return GbdtModel(trees, meta["base_score"], GbdtConfig(**meta["config"]), meta["n_features"],
                     list(arr[f"{prefix}train_loss"]))


def _parts(model) -> tuple[dict, dict]:
    if isinstance(model, MlpModel):
        arrays = {}
        for i, (w, b) in enumerate(zip(model.weights, model.biases)):
            arrays[f"W{i}"] = w
            arrays[f"b{i}"] = b
        cfg = dataclasses.asdict(model.config)
        cfg["hidden"] = list(cfg["hidden"])
        meta = {"kind": "mlp", "layers": len(model.weights), "layer_widths": model.layer_widths,
                "config": cfg, "best_epoch": model.best_epoch, "history": model.history}
        return arrays, meta
    if isinstance(model, GbdtModel):
        return _gbdt_arrays(model), {"kind": "gbdt", **_gbdt_meta(model)}
    if isinstance(model, XgbodModel):
        r = model.recipe
        arrays = {
            "reference": r.reference, "hbos_dims": r.hbos_dims, "hbos_edges": r.hbos_edges,
            "hbos_heights": r.hbos_heights, "ref_kdist": r.ref_kdist, "ref_lrd": r.ref_lrd,
            **_gbdt_arrays(model.combiner, "combiner_"),
        }
        ocfg = dataclasses.asdict(r.config)
        ocfg["scorers"] = list(ocfg["scorers"])
        meta = {"kind": "xgbod", "outlier_config": ocfg, "combiner": _gbdt_meta(model.combiner)}
        return arrays, meta
    raise ConfigError(f"cannot serialize {type(model).__name__}")


def save_model(model, directory: str | Path) -> None:
    arrays, meta = _parts(model)
    write_blob_model(directory, "model", arrays, meta)


def serialize_model(model) -> bytes:
    """Deterministic byte form (manifest JSON + blob) used for reproducibility checks."""
    arrays, meta = _parts(model)
    blob, layout = pack_arrays(arrays)
    head = json.dumps({**meta, "arrays": layout}, sort_keys=True).encode()
    return head + b"\n" + blob


def load_model(directory: str | Path):
    meta, arr = read_blob_model(directory, "model")
    kind = meta["kind"]
    if kind == "mlp":
        cfg = meta["config"]
        cfg["hidden"] = tuple(cfg["hidden"])
        n = meta["layers"]
        return MlpModel([arr[f"W{i}"] for i in range(n)], [arr[f"b{i}"] for i in range(n)],
                        MlpConfig(**cfg), meta["best_epoch"], meta["history"])
    if kind == "gbdt":
        return _gbdt_from(meta, arr)
    if kind == "xgbod":
        ocfg = meta["outlier_config"]
        ocfg["scorers"] = tuple(ocfg["scorers"])
        recipe = ScoreRecipe(arr["reference"], OutlierConfig(**ocfg), arr["hbos_dims"], arr["hbos_edges"],
                             arr["hbos_heights"], arr["ref_kdist"], arr["ref_lrd"])
        return XgbodModel(recipe, _gbdt_from(meta["combiner"], arr, "combiner_"))
    raise ConfigError(f"unknown model kind {kind!r}")
