"""Splitting, confusion metrics, ROC/AUC and the experiment drivers."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from .detect import (
    GbdtConfig, MlpConfig, OutlierConfig, predict, train_gbdt, train_mlp, train_xgbod,
)
from .errors import ConfigError, RocError, ShapeError, SplitError
from .normalize import LabeledEventSet

REPORT_SCHEMA_VERSION = 1
MODES = ("supervised_mlp", "supervised_gbdt", "semisupervised_xgbod", "unseen_attack")


# --- splitting ---------------------------------------------------------------

def _train_count(n: int, fraction: float) -> int:
    # floor on a value rounded to 9 places absorbs binary noise such as 0.3 * 10 = 2.9999999999999996
    k = math.floor(round(n * fraction, 9))
    return min(max(k, 1), n - 1)


def stratified_split_indices(labels, train_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-class split; each class keeps floor(n_c * fraction) rows for training.

    Returned index arrays are sorted, disjoint and together cover every row.
    """
    if not 0.0 < train_fraction < 1.0:
        raise SplitError(f"train_fraction must be in (0, 1), got {train_fraction}")
    labels = np.asarray(labels)
    classes = sorted(set(labels.tolist()))
    if len(classes) < 2:
        raise SplitError("both classes must be present to split")
    rng = np.random.default_rng(seed)
    train, test = [], []
    for c in classes:
        idx = np.nonzero(labels == c)[0]
        if idx.size < 2:
            raise SplitError(f"class {c!r} has fewer than 2 members")
        perm = idx[rng.permutation(idx.size)]
        k = _train_count(idx.size, train_fraction)
        train.append(perm[:k])
        test.append(perm[k:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def stratified_split(ds: LabeledEventSet, train_fraction: float = 0.8, seed: int = 0):
    tr, te = stratified_split_indices(ds.labels, train_fraction, seed)
    return ds.subset(tr, "train"), ds.subset(te, "test")


# --- metrics -----------------------------------------------------------------

@dataclass
class Metrics:
    tp: int
    fp: int
    tn: int
    fn: int
    accuracy: float
    precision: float
    recall: float
    f1: float
    flags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def confusion_metrics(labels, predictions) -> Metrics:
    y = np.asarray(labels).astype(np.int64)
    p = np.asarray(predictions).astype(np.int64)
    if y.shape != p.shape:
        raise ShapeError(f"labels {y.shape} and predictions {p.shape} differ in length")
    if y.size == 0:
        raise ShapeError("need at least one prediction")
    tp = int(np.sum((y == 1) & (p == 1)))
    fp = int(np.sum((y == 0) & (p == 1)))
    tn = int(np.sum((y == 0) & (p == 0)))
    fn = int(np.sum((y == 1) & (p == 0)))
    flags = []

    def ratio(num, den, flag):
        if den == 0:
            flags.append(flag)
            return 0.0
        return num / den

    precision = ratio(tp, tp + fp, "precision_undefined")
    recall = ratio(tp, tp + fn, "recall_undefined")
    f1 = ratio(2 * precision * recall, precision + recall, "f1_undefined")
    return Metrics(tp, fp, tn, fn, (tp + tn) / y.size, precision, recall, f1, flags)


@dataclass
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray  # thresholds[0] is +inf (the (0, 0) point)
    auc: float
    auc_pairwise: float

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))

    def to_dict(self) -> dict:
        return {
            "auc": self.auc,
            "auc_pairwise": self.auc_pairwise,
            "points": [
                {"threshold": None if math.isinf(t) else t, "fpr": f, "tpr": r}
                for t, f, r in zip(self.thresholds.tolist(), self.fpr.tolist(), self.tpr.tolist())
            ],
        }

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["threshold", "fpr", "tpr"])
            for t, f, r in zip(self.thresholds, self.fpr, self.tpr):
                w.writerow(["inf" if math.isinf(t) else repr(float(t)), repr(float(f)), repr(float(r))])


def roc_auc(labels, scores) -> RocCurve:
    """ROC over distinct score thresholds, descending; tied scores form one step.

    The trapezoid area is cross-checked against the rank (Mann-Whitney) statistic.
    """
    y = np.asarray(labels).astype(np.int64)
    s = np.asarray(scores, dtype=np.float64)
    if y.shape != s.shape:
        raise ShapeError("labels and scores differ in length")
    if not np.all(np.isfinite(s)):
        raise RocError("scores must be finite")
    n_pos = int(np.sum(y == 1))
    n_neg = int(np.sum(y == 0))
    if n_pos == 0 or n_neg == 0:
        raise RocError("ROC needs both classes")

    order = np.argsort(-s, kind="stable")
    s_sorted, y_sorted = s[order], y[order]
    # last index of each group of equal scores
    ends = np.r_[np.nonzero(np.diff(s_sorted))[0], s_sorted.size - 1]
    tps = np.cumsum(y_sorted == 1)[ends]
    fps = np.cumsum(y_sorted == 0)[ends]
    tpr = np.r_[0.0, tps / n_pos]
    fpr = np.r_[0.0, fps / n_neg]
    thresholds = np.r_[np.inf, s_sorted[ends]]
    auc = float(np.sum((fpr[1:] - fpr[:-1]) * (tpr[1:] + tpr[:-1]) / 2.0))

    ranks = rankdata(s, method="average")
    u = float(np.sum(ranks[y == 1])) - n_pos * (n_pos + 1) / 2.0
    auc_pairwise = u / (n_pos * n_neg)
    if abs(auc - auc_pairwise) > 1e-9:
        raise RuntimeError(f"AUC self-check failed: trapezoid {auc} vs rank {auc_pairwise}")
    return RocCurve(fpr, tpr, thresholds, auc, auc_pairwise)


# --- experiments -------------------------------------------------------------

@dataclass
class DetectorSettings:
    mlp: MlpConfig = field(default_factory=MlpConfig)
    gbdt: GbdtConfig = field(default_factory=GbdtConfig)
    gbdt_grid: dict | None = None
    outliers: OutlierConfig = field(default_factory=OutlierConfig)


@dataclass
class ExperimentReport:
    mode: str
    metrics: Metrics
    roc: RocCurve | None
    config_hash: str
    seed: int
    n_train: int
    n_test: int
    dataset: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "mode": self.mode,
            "metrics": self.metrics.to_dict(),
            "roc": self.roc.to_dict() if self.roc is not None else None,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "dataset": self.dataset,
            **({"extra": self.extra} if self.extra else {}),
        }


def binary_labels(labels) -> np.ndarray:
    return np.array([1 if lab == "adversary" else 0 for lab in labels], dtype=np.int64)


def unseen_attack_indices(labels, scenario_ids, scenario: str, test_size: int, seed: int):
    """Hold out one scenario's adversary events plus disjoint benign events for testing.

    Training keeps every other adversary event and the remaining benign events.
    """
    y = binary_labels(labels)
    scen = np.array([s if s is not None else "" for s in scenario_ids], dtype=object)
    held = np.nonzero((y == 1) & (scen == scenario))[0]
    if held.size == 0:
        raise ConfigError(f"scenario {scenario!r} has no adversary events")
    benign = np.nonzero(y == 0)[0]
    rng = np.random.default_rng(seed)
    n_adv = min(test_size, held.size)
    n_ben = min(test_size, benign.size // 2)
    if n_ben < 1:
        raise SplitError("not enough benign events for an unseen-attack test set")
    test_adv = np.sort(rng.choice(held, size=n_adv, replace=False))
    test_ben = np.sort(rng.choice(benign, size=n_ben, replace=False))
    test = np.sort(np.concatenate([test_adv, test_ben]))
    train_mask = np.ones(y.size, dtype=bool)
    train_mask[held] = False
    train_mask[test_ben] = False
    train = np.nonzero(train_mask)[0]
    if np.unique(y[train]).size < 2:
        raise SplitError("unseen-attack training set lacks adversary events from other scenarios")
    return train, test


def fit_detector(kind: str, X, y, settings: DetectorSettings, seed: int):
    if kind == "mlp":
        return train_mlp(X, y, settings.mlp, seed)
    if kind == "gbdt":
        return train_gbdt(X, y, settings.gbdt, settings.gbdt_grid, seed)
    if kind == "xgbod":
        return train_xgbod(X, y, None, settings.gbdt, settings.outliers, settings.gbdt_grid, seed)
    raise ConfigError(f"unknown detector {kind!r}")


MODE_DETECTOR = {"supervised_mlp": "mlp", "supervised_gbdt": "gbdt", "semisupervised_xgbod": "xgbod", "unseen_attack": "xgbod"}


def evaluate_model(model, X, y) -> tuple[Metrics, RocCurve | None]:
    scores, preds = predict(model, X)
    metrics = confusion_metrics(y, preds)
    roc = roc_auc(y, scores) if np.unique(y).size == 2 else None
    return metrics, roc


def experiment_indices(mode: str, labels, scenario_ids, *, train_fraction=0.8, seed=0, scenario=None, test_size=500):
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}; expected one of {MODES}")
    if mode == "unseen_attack":
        if not scenario:
            raise ConfigError("unseen_attack needs a scenario id")
        return unseen_attack_indices(labels, scenario_ids, scenario, test_size, seed)
    return stratified_split_indices(labels, train_fraction, seed)


def run_experiment(
    features: np.ndarray,
    labels,
    scenario_ids,
    mode: str,
    settings: DetectorSettings | None = None,
    seed: int = 0,
    *,
    train_fraction: float = 0.8,
    scenario: str | None = None,
    test_size: int = 500,
    config_hash: str = "",
    dataset: dict | None = None,
) -> tuple[ExperimentReport, object]:
    """Split, train the mode's detector, evaluate on the held-out rows.

    Returns the report and the trained model.
    """
    settings = settings or DetectorSettings()
    X = np.asarray(features, dtype=np.float64)
    y = binary_labels(labels)
    train, test = experiment_indices(
        mode, labels, scenario_ids, train_fraction=train_fraction, seed=seed, scenario=scenario, test_size=test_size
    )
    model = fit_detector(MODE_DETECTOR[mode], X[train], y[train], settings, seed)
    metrics, roc = evaluate_model(model, X[test], y[test])
    extra = {"scenario": scenario} if mode == "unseen_attack" else {}
    report = ExperimentReport(mode, metrics, roc, config_hash, seed, int(train.size), int(test.size), dataset or {}, extra)
    return report, model
