"""RBF kernel PCA and classical multidimensional scaling."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist

from .artifacts import read_blob_model, write_blob_model
from .errors import ConfigError, ProjectionError, ShapeError

logger = logging.getLogger(__name__)

EIGEN_FLOOR = 1e-10


def fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive."""
    if vectors.size == 0:
        return vectors
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def sq_distances(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    aa = np.einsum("ij,ij->i", A, A)
    bb = np.einsum("ij,ij->i", B, B)
    D = aa[:, None] + bb[None, :] - 2.0 * (A @ B.T)
    return np.maximum(D, 0.0)


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    return np.exp(-gamma * sq_distances(A, B))


def default_gamma(X: np.ndarray, method: str = "scale") -> float:
    """``scale``: 1 / (d * mean feature variance). ``median``: 1 / median squared pairwise distance."""
    X = np.asarray(X, dtype=np.float64)
    if method == "scale":
        var = X.var(axis=0).mean()
        return 1.0 / (X.shape[1] * var) if var > 0 else 1.0
    if method == "median":
        D = sq_distances(X, X)
        off = D[np.triu_indices_from(D, k=1)]
        med = np.median(off) if off.size else 0.0
        return 1.0 / med if med > 0 else 1.0
    raise ConfigError(f"unknown gamma heuristic {method!r}")


@dataclass
class KpcaModel:
    training_rows: np.ndarray
    gamma: float
    eigenvalues: np.ndarray  # descending, all > EIGEN_FLOOR
    eigenvectors: np.ndarray  # n x k', unit columns of the centered Gram matrix
    col_means: np.ndarray  # mean of the training Gram matrix per column
    total_mean: float
    k_requested: int
    warning: bool = False

    @property
    def k(self) -> int:
        return int(self.eigenvalues.shape[0])

    @property
    def components(self) -> np.ndarray:
        """Dual coefficients: eigenvectors scaled by 1/sqrt(eigenvalue)."""
        return self.eigenvectors / np.sqrt(self.eigenvalues)

    def save(self, directory: str | Path) -> None:
        arrays = {
            "training_rows": self.training_rows,
            "eigenvalues": self.eigenvalues,
            "eigenvectors": self.eigenvectors,
            "col_means": self.col_means,
        }
        meta = {
            "kind": "kpca_rbf",
            "gamma": self.gamma,
            "total_mean": self.total_mean,
            "k_requested": self.k_requested,
            "warning": self.warning,
        }
        write_blob_model(directory, "kpca", arrays, meta)

    @classmethod
    def load(cls, directory: str | Path) -> KpcaModel:
        man, arr = read_blob_model(directory, "kpca")
        return cls(
            arr["training_rows"], man["gamma"], arr["eigenvalues"], arr["eigenvectors"],
            arr["col_means"], man["total_mean"], man["k_requested"], man["warning"],
        )


def kpca_fit_transform(X: np.ndarray, gamma: float, k: int = 256) -> tuple[KpcaModel, np.ndarray]:
    """Fit RBF kernel PCA and return the training projection.

    The Gram matrix is double-centered, the top ``k`` eigenpairs above
    ``EIGEN_FLOOR`` are kept, and training coordinates are eigenvectors scaled by
    sqrt(eigenvalue). If fewer than ``k`` eigenvalues survive, the model carries
    fewer components and ``warning`` is set.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ShapeError(f"need an n x d matrix with n >= 2, got shape {X.shape}")
    n = X.shape[0]
    if not 1 <= k <= n - 1:
        raise ConfigError(f"k={k} must lie in [1, n-1={n - 1}]")
    if not gamma > 0:
        raise ConfigError(f"gamma must be positive, got {gamma}")

    K = rbf_kernel(X, X, gamma)
    col_means = K.mean(axis=0)
    total = float(col_means.mean())
    Kc = K - col_means[None, :] - col_means[:, None] + total
    Kc = (Kc + Kc.T) / 2.0

    vals, vecs = linalg.eigh(Kc, subset_by_index=[n - k, n - 1])
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    keep = vals > EIGEN_FLOOR
    vals, vecs = vals[keep], fix_signs(vecs[:, keep])

    warn = vals.shape[0] < k
    if warn:
        warnings.warn(f"kernel PCA kept {vals.shape[0]} of {k} requested components", RuntimeWarning, stacklevel=2)

    model = KpcaModel(X.copy(), float(gamma), vals, vecs, col_means, total, k, warn)
    return model, vecs * np.sqrt(vals)


def kpca_transform(model: KpcaModel, Y: np.ndarray) -> np.ndarray:
    """Project new rows through the stored dual coefficients."""
    Y = np.asarray(Y, dtype=np.float64)
    d = model.training_rows.shape[1]
    if Y.size == 0:
        return np.zeros((0, model.k))
    if Y.ndim != 2 or Y.shape[1] != d:
        raise ShapeError(f"expected rows of width {d}, got shape {Y.shape}")
    Ky = rbf_kernel(Y, model.training_rows, model.gamma)
    Kc = Ky - model.col_means[None, :] - Ky.mean(axis=1)[:, None] + model.total_mean
    return Kc @ model.components


@dataclass
class Coordinates2D:
    points: np.ndarray
    stress: float
    eigenvalues: np.ndarray


def classical_mds(D: np.ndarray, m: int = 2, atol: float = 1e-9) -> Coordinates2D:
    """Torgerson scaling: B = -1/2 J D^2 J, top-``m`` eigenpairs give coordinates.

    Negative or missing eigenvalues yield zero columns. ``stress`` is
    ||D - D_hat||_F / ||D||_F (0 when D is all zeros).
    """
    D = np.asarray(D, dtype=np.float64)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ProjectionError(f"distance matrix must be square, got {D.shape}")
    if not np.allclose(D, D.T, rtol=0.0, atol=atol):
        raise ProjectionError("distance matrix is not symmetric")
    if np.any(np.abs(np.diag(D)) > atol) or np.any(D < -atol):
        raise ProjectionError("distance matrix needs a zero diagonal and nonnegative entries")
    n = D.shape[0]
    J = np.eye(n) - np.full((n, n), 1.0 / n)
    B = -0.5 * J @ (D**2) @ J
    B = (B + B.T) / 2.0
    vals, vecs = linalg.eigh(B)
    order = np.argsort(vals)[::-1][:m]
    vals, vecs = vals[order], fix_signs(vecs[:, order])
    pos = np.clip(vals, 0.0, None)
    pts = vecs * np.sqrt(pos)
    if pts.shape[1] < m:
        pts = np.hstack([pts, np.zeros((n, m - pts.shape[1]))])
    pts = pts - pts.mean(axis=0)
    Dhat = cdist(pts, pts)
    denom = np.linalg.norm(D)
    stress = float(np.linalg.norm(D - Dhat) / denom) if denom > 0 else 0.0
    return Coordinates2D(pts, stress, vals)
