"""Figure rendering for the report paths (PNG files next to the CSV output)."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def plot_history(history, path) -> None:
    epochs = np.arange(1, len(history) + 1)
    fig, (ax_loss, ax_acc) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax_loss.plot(epochs, history.train_loss, label="train")
    if not all(np.isnan(history.test_loss)):
        ax_loss.plot(epochs, history.test_loss, label="test")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("cross-entropy loss")
    ax_loss.legend()
    ax_acc.plot(epochs, history.train_acc, label="train")
    if not all(np.isnan(history.test_acc)):
        ax_acc.plot(epochs, history.test_acc, label="test")
    ax_acc.set_xlabel("epoch")
    ax_acc.set_ylabel("accuracy")
    ax_acc.set_ylim(0.0, 1.02)
    ax_acc.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_roc(points, auc_value, path) -> None:
    fpr = [p.fpr for p in points]
    tpr = [p.tpr for p in points]
    fig, ax = plt.subplots(figsize=(4.5, 4.2))
    ax.plot(fpr, tpr, drawstyle="steps-post", label=f"AUC = {auc_value:.3f}")
    ax.plot([0, 1], [0, 1], linestyle="--", color="gray", linewidth=0.8)
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_confusion(cm, path) -> None:
    grid = np.array([[cm.tn, cm.fp], [cm.fn, cm.tp]])
    fig, ax = plt.subplots(figsize=(4.2, 3.8))
    im = ax.imshow(grid, cmap="Blues")
    for (r, c), value in np.ndenumerate(grid):
        color = "white" if value > grid.max() / 2 else "black"
        ax.text(c, r, str(value), ha="center", va="center", color=color)
    ax.set_xticks([0, 1], ["pred non-fall", "pred fall"])
    ax.set_yticks([0, 1], ["non-fall", "fall"])
    fig.colorbar(im, ax=ax, shrink=0.85)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_sweep(rows, path) -> None:
    """rows: iterables of (sparsity, accuracy, recall_fall, specificity, macs_fraction)."""
    rows = list(rows)
    sparsities = [r[0] for r in rows]
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    ax.plot(sparsities, [r[1] for r in rows], marker="o", label="accuracy")
    ax.plot(sparsities, [r[2] for r in rows], marker="s", label="fall recall")
    ax.plot(sparsities, [r[3] for r in rows], marker="^", label="specificity")
    ax.plot(sparsities, [r[4] for r in rows], marker="x", linestyle=":", label="MAC fraction")
    ax.set_xlabel("sparsity")
    ax.set_ylim(0.0, 1.05)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
