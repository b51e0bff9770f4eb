"""Independent reference implementations used as test oracles.

They are deliberately plain (explicit loops, general eigensolvers) and share no
code with the package.
"""

import math

import numpy as np


def kpca_oracle(X, gamma, k):
    """Dense kernel PCA via numpy.linalg.eig on H K H; returns (eigenvalues, projections)."""
    n = X.shape[0]
    K = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            K[i, j] = math.exp(-gamma * float(np.sum((X[i] - X[j]) ** 2)))
    H = np.eye(n) - np.ones((n, n)) / n
    Kc = H @ K @ H
    vals, vecs = np.linalg.eig(Kc)
    vals, vecs = vals.real, vecs.real
    order = np.argsort(-vals)[:k]
    vals, vecs = vals[order], vecs[:, order]
    vecs = vecs / np.linalg.norm(vecs, axis=0)
    return vals, vecs * np.sqrt(vals), K


def kpca_oracle_transform(X, Y, gamma, K, vals, proj):
    """Project new rows: centre the cross-kernel against the training Gram matrix."""
    n = X.shape[0]
    kY = np.array([[math.exp(-gamma * float(np.sum((y - x) ** 2))) for x in X] for y in Y])
    ones = np.ones((n, n)) / n
    onesY = np.ones((Y.shape[0], n)) / n
    kYc = kY - onesY @ K - kY @ ones + onesY @ K @ ones
    alphas = proj / vals  # = v / sqrt(lambda)
    return kYc @ alphas


def align_signs(A, B):
    """Flip columns of B to best match A."""
    s = np.sign(np.sum(A * B, axis=0))
    s[s == 0] = 1
    return B * s


def procrustes_residual(A, B):
    """Frobenius residual after optimal translation + rotation/reflection of B onto A."""
    A0 = A - A.mean(axis=0)
    B0 = B - B.mean(axis=0)
    U, _, Vt = np.linalg.svd(B0.T @ A0)
    R = U @ Vt
    return float(np.linalg.norm(A0 - B0 @ R))


def pairwise_auc(labels, scores):
    """Probability that a random positive outranks a random negative; ties count half."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    total = 0.0
    for p in pos:
        for q in neg:
            total += 1.0 if p > q else 0.5 if p == q else 0.0
    return total / (len(pos) * len(neg))


def numeric_gradient(f, params, h=1e-5):
    """Central differences over every entry of every array in ``params`` (modified in place)."""
    grads = []
    for P in params:
        G = np.zeros_like(P)
        it = np.nditer(P, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            old = P[idx]
            P[idx] = old + h
            fp = f()
            P[idx] = old - h
            fm = f()
            P[idx] = old
            G[idx] = (fp - fm) / (2 * h)
        grads.append(G)
    return grads
