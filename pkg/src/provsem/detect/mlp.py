"""Feed-forward network: ReLU hidden layers, softmax output, cross-entropy, Adam."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError, TrainingError


@dataclass(frozen=True)
class MlpConfig:
    hidden: tuple[int, ...] = (128, 64)
    epochs: int = 50
    learning_rate: float = 1e-3
    batch_size: int = 64
    weight_decay: float = 0.0
    validation_fraction: float = 0.1


@dataclass
class MlpModel:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    config: MlpConfig
    best_epoch: int = 0
    history: list[dict] = field(default_factory=list)

    @property
    def layer_widths(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def predict_proba_pairs(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.weights[0].shape[0]:
            raise ShapeError(f"expected {self.weights[0].shape[0]} features, got shape {X.shape}")
        return forward(self.weights, self.biases, X)[-1]

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.predict_proba_pairs(X)[:, 1]


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def forward(weights, biases, X):
    """Activations per layer; the last entry is the softmax output."""
    acts = [X]
    h = X
    for i, (W, b) in enumerate(zip(weights, biases)):
        z = h @ W + b
        h = softmax(z) if i == len(weights) - 1 else np.maximum(z, 0.0)
        acts.append(h)
    return acts


def loss_and_grads(weights, biases, X, y):
    """Mean cross-entropy and its gradients with respect to every weight and bias."""
    acts = forward(weights, biases, X)
    probs = acts[-1]
    n = X.shape[0]
    loss = -float(np.mean(np.log(np.clip(probs[np.arange(n), y], 1e-300, None))))
    delta = probs.copy()
    delta[np.arange(n), y] -= 1.0
    delta /= n
    gw, gb = [None] * len(weights), [None] * len(weights)
    for i in range(len(weights) - 1, -1, -1):
        gw[i] = acts[i].T @ delta
        gb[i] = delta.sum(axis=0)
        if i:
            delta = (delta @ weights[i].T) * (acts[i] > 0)
    return loss, gw, gb


def init_params(widths: list[int], rng: np.random.Generator):
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def _holdout(y: np.ndarray, fraction: float, rng: np.random.Generator):
    """Stratified validation rows; empty when a class is too small to spare one."""
    val = []
    for cls in (0, 1):
        idx = np.nonzero(y == cls)[0]
        k = int(np.floor(idx.size * fraction))
        if k < 1 or idx.size - k < 1:
            return np.arange(y.size), np.array([], dtype=np.int64)
        val.append(rng.permutation(idx)[:k])
    val = np.sort(np.concatenate(val))
    train = np.setdiff1d(np.arange(y.size), val)
    return train, val


def train_mlp(X, y, config: MlpConfig = MlpConfig(), seed: int = 0) -> MlpModel:
    """Mini-batch Adam for ``config.epochs`` epochs; returns the best-accuracy epoch.

    Accuracy for snapshot selection is measured on a stratified held-out fold of
    the training data (or on the training data itself when it is too small to
    split). Ties on accuracy go to the lower validation loss.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.int64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ShapeError(f"features {X.shape} and labels {y.shape} do not align")
    if np.unique(y).size < 2:
        raise TrainingError("training set holds a single class")
    if not np.all(np.isfinite(X)):
        raise TrainingError("features contain NaN or infinite values")

    rng = np.random.default_rng(seed)
    tr, val = _holdout(y, config.validation_fraction, rng)
    if val.size == 0:
        val = tr
    Xt, yt = X[tr], y[tr]

    widths = [X.shape[1], *config.hidden, 2]
    weights, biases = init_params(widths, rng)
    params = weights + biases
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    b1, b2, eps = 0.9, 0.999, 1e-8
    step = 0

    best = ((-1.0, -np.inf), 0, [w.copy() for w in weights], [b.copy() for b in biases])
    history = []
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(Xt.shape[0])
        total = 0.0
        for start in range(0, order.size, config.batch_size):
            batch = order[start : start + config.batch_size]
            loss, gw, gb = loss_and_grads(weights, biases, Xt[batch], yt[batch])
            if not np.isfinite(loss):
                raise TrainingError(f"loss diverged (NaN/Inf) in epoch {epoch}")
            total += loss * batch.size
            grads = gw + gb
            if config.weight_decay:
                for i, w in enumerate(weights):
                    grads[i] = grads[i] + config.weight_decay * w
            step += 1
            for i, (p, g) in enumerate(zip(params, grads)):
                m[i] = b1 * m[i] + (1 - b1) * g
                v[i] = b2 * v[i] + (1 - b2) * g * g
                mhat = m[i] / (1 - b1**step)
                vhat = v[i] / (1 - b2**step)
                p -= config.learning_rate * mhat / (np.sqrt(vhat) + eps)
        probs = forward(weights, biases, X[val])[-1]
        acc = float(np.mean(probs.argmax(axis=1) == y[val]))
        val_loss = -float(np.mean(np.log(np.clip(probs[np.arange(val.size), y[val]], 1e-300, None))))
        history.append({"epoch": epoch, "loss": total / Xt.shape[0], "val_accuracy": acc, "val_loss": val_loss})
        # accuracy first; on a small holdout many epochs tie, so lower validation loss breaks ties
        if (acc, -val_loss) > best[0]:
            best = ((acc, -val_loss), epoch, [w.copy() for w in weights], [b.copy() for b in biases])

    _, epoch, bw, bb = best
    return MlpModel(bw, bb, config, epoch, history)
