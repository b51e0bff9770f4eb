"""Figures written next to the CSV/JSON outputs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

LABEL_COLORS = {"benign": "tab:blue", "adversary": "tab:red"}


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return Path(path)


def plot_roc(roc, path, title: str = "ROC"):
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    ax.plot(roc.fpr, roc.tpr, color="tab:red", lw=1.8, label=f"AUC = {roc.auc:.4f}")
    ax.plot([0, 1], [0, 1], color="0.6", lw=0.8, ls="--")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.01)
    ax.set_xlabel("False positive rate")
    ax.set_ylabel("True positive rate")
    ax.set_title(title)
    ax.legend(loc="lower right", frameon=False)
    return _finish(fig, path)


def plot_projection(projection, path, title: str = "Event embeddings (MDS)"):
    fig, ax = plt.subplots(figsize=(5, 4.5))
    pts = projection.coords.points
    labels = projection.labels
    for lab in sorted(set(labels)):
        mask = [lab_i == lab for lab_i in labels]
        ax.scatter(pts[mask, 0], pts[mask, 1], s=8, alpha=0.7,
                   color=LABEL_COLORS.get(lab, "tab:gray"), label=lab or "events")
    ax.set_title(title)
    ax.set_xticks([])
    ax.set_yticks([])
    if any(labels):
        ax.legend(frameon=False, markerscale=2)
    return _finish(fig, path)


def plot_named_points(points, names, path, title: str = "Relative positions (MDS)"):
    """Small labelled scatter, used for the hand-picked analogy events."""
    fig, ax = plt.subplots(figsize=(6, 5))
    ax.scatter(points[:, 0], points[:, 1], color="tab:purple", s=20)
    for (x, y), name in zip(points, names):
        ax.annotate(name, (x, y), fontsize=7, xytext=(3, 3), textcoords="offset points")
    ax.set_title(title)
    ax.margins(0.25)
    return _finish(fig, path)
