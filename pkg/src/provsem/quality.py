"""Embedding-quality audit: analogy residuals and 2-D projections."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .embed import cosine_distance, cosine_distance_matrix
from .errors import ProjectionError, ShapeError
from .reduce import Coordinates2D, classical_mds

DEFAULT_TOLERANCE = 0.05


@dataclass
class AnalogyResult:
    """Residuals for the relation E1 - E2 ~ E3 - E4."""

    residual: float  # |d(E1,E2) - d(E3,E4)|, cosine scale
    vector_residual: float  # |(E1-E2) - (E3-E4)| / mean pair norm
    d12: float
    d34: float
    passed: bool
    tolerance: float
    name: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def analogy_residual(e1, e2, e3, e4, tolerance: float = DEFAULT_TOLERANCE, name: str = "") -> AnalogyResult:
    vs = [np.asarray(getattr(e, "values", e), dtype=np.float64) for e in (e1, e2, e3, e4)]
    if len({v.shape for v in vs}) != 1:
        raise ShapeError("analogy embeddings must share one width")
    d12 = cosine_distance(vs[0], vs[1])
    d34 = cosine_distance(vs[2], vs[3])
    residual = abs(d12 - d34)
    diff1, diff2 = vs[0] - vs[1], vs[2] - vs[3]
    scale = (np.linalg.norm(diff1) + np.linalg.norm(diff2)) / 2.0
    vres = float(np.linalg.norm(diff1 - diff2) / scale) if scale > 0 else 0.0
    return AnalogyResult(float(residual), vres, float(d12), float(d34), bool(residual <= tolerance), tolerance, name)


def balanced_sample(labels, per_label: int, seed: int) -> np.ndarray:
    """``per_label`` rows drawn without replacement from each label, sorted."""
    labels = np.asarray(labels, dtype=object)
    rng = np.random.default_rng(seed)
    chosen = []
    for lab in sorted(set(labels.tolist())):
        idx = np.nonzero(labels == lab)[0]
        if idx.size < per_label:
            raise ProjectionError(f"label {lab!r} has {idx.size} rows, fewer than {per_label} requested")
        chosen.append(rng.choice(idx, size=per_label, replace=False))
    return np.sort(np.concatenate(chosen))


@dataclass
class Projection:
    keys: list[str]
    labels: list[str]
    coords: Coordinates2D

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["id", "label", "x", "y"])
            for k, lab, (x, y) in zip(self.keys, self.labels, self.coords.points[:, :2]):
                w.writerow([k, lab, repr(float(x)), repr(float(y))])


def project_2d(embeddings, keys=None, labels=None, per_label: int | None = None, seed: int = 0) -> Projection:
    """Cosine distances -> classical MDS in two dimensions.

    With ``per_label``, a label-balanced sample of that many rows per label is projected.
    """
    X = np.asarray(getattr(embeddings, "values", embeddings), dtype=np.float64)
    n = X.shape[0]
    keys = list(keys) if keys is not None else [str(i) for i in range(n)]
    labels = list(labels) if labels is not None else [""] * n
    if per_label is not None:
        idx = balanced_sample(labels, per_label, seed)
        X = X[idx]
        keys = [keys[i] for i in idx]
        labels = [labels[i] for i in idx]
    if X.shape[0] < 3:
        raise ProjectionError("need at least 3 embeddings to project")
    D = cosine_distance_matrix(X)
    if np.all(D <= 1e-12):
        raise ProjectionError("all embeddings are identical; projection is degenerate")
    return Projection(keys, labels, classical_mds(D, 2))
