"""Report figures rendered to files next to the delimited outputs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from .evaluate import ConfusionMatrix  # noqa: E402
from .trainer import RunHistory  # noqa: E402


def save_history_figure(history: RunHistory, path) -> Path:
    """Loss and accuracy curves (train and validation) over epochs."""
    epochs = np.arange(1, len(history.train_loss) + 1)
    fig, (ax_loss, ax_acc) = plt.subplots(1, 2, figsize=(10, 4))

    ax_loss.plot(epochs, history.train_loss, label="train", color="black", lw=2)
    ax_loss.plot(epochs, history.val_loss, label="val", color="tab:green", lw=2)
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("cross-entropy loss")
    ax_loss.set_title("Loss")
    ax_loss.legend()

    ax_acc.plot(epochs, history.train_acc, label="train", color="black", lw=2)
    ax_acc.plot(epochs, history.val_acc, label="val", color="tab:green", lw=2)
    ax_acc.set_xlabel("epoch")
    ax_acc.set_ylabel("accuracy")
    ax_acc.set_ylim(0, 1.02)
    ax_acc.set_title("Accuracy")
    ax_acc.legend()

    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_confusion_figure(matrix: ConfusionMatrix, labels, path) -> Path:
    """Annotated heatmap of the confusion counts."""
    codes = [lab.code for lab in sorted(labels, key=lambda lab: lab.id)]
    counts = matrix.counts
    fig, ax = plt.subplots(figsize=(6.5, 5.5))
    im = ax.imshow(counts, cmap="Blues")
    ax.set_xticks(range(len(codes)), codes, rotation=45, ha="right")
    ax.set_yticks(range(len(codes)), codes)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    threshold = counts.max() / 2 if counts.max() else 0.5
    for i in range(len(codes)):
        for j in range(len(codes)):
            ax.text(j, i, str(int(counts[i, j])), ha="center", va="center",
                    color="white" if counts[i, j] > threshold else "black")
    fig.colorbar(im, ax=ax, shrink=0.8)
    ax.set_title(f"accuracy {matrix.accuracy():.3f} (n={matrix.total})")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
