"""Supervised training: categorical cross-entropy, full backpropagation
respecting freeze masks, Adam updates with bias correction, and run history.

Runs are deterministic per seed: shuffling, augmentation, and dropout streams
are all derived from (seed, epoch, step) keys, so identical configs yield
bitwise-identical final weights on one platform.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .augment import AugmentConfig
from .data import SplitManifest, batches_for
from .errors import ConfigError, TrainingDivergedError
from .model import Model, set_trainable
from .rng import make_rng
from .weights import save_weights

FREEZE_POLICIES = ("freeze_backbone", "unfreeze_all")
LOSS_CLAMP = 1e-12  # floor for probabilities before the log

HISTORY_COLUMNS = ("epoch", "train_loss", "train_acc", "val_loss", "val_acc")


@dataclass(frozen=True)
class AdamConfig:
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-7


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    learning_rate: float = 1e-5
    batch_size: int = 32
    freeze_policy: str = "unfreeze_all"
    adam: AdamConfig = field(default_factory=AdamConfig)
    seed: int = 0
    augment: AugmentConfig = field(default_factory=AugmentConfig)

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.learning_rate < 0:
            raise ConfigError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.freeze_policy not in FREEZE_POLICIES:
            raise ConfigError(
                f"freeze_policy must be one of {FREEZE_POLICIES}, got "
                f"{self.freeze_policy!r}")


@dataclass
class RunHistory:
    train_loss: list[float] = field(default_factory=list)
    train_acc: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    val_acc: list[float] = field(default_factory=list)
    wall_time_s: float = 0.0

    def rows(self):
        for epoch, row in enumerate(zip(self.train_loss, self.train_acc,
                                        self.val_loss, self.val_acc), start=1):
            yield (epoch, *row)


def one_hot(labels: np.ndarray, num_classes: int, dtype=np.float32) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ConfigError(f"labels must be a 1-D id array, got shape {labels.shape}")
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= num_classes:
        raise ConfigError(
            f"label ids must be in [0, {num_classes}), got range "
            f"[{labels.min()}, {labels.max()}]")
    out = np.zeros((labels.size, num_classes), dtype=dtype)
    out[np.arange(labels.size), labels] = 1
    return out


def cross_entropy(probabilities: np.ndarray, labels) -> float:
    """Mean over the batch of -log p[true class].

    ``labels`` may be integer ids (N,) or a one-hot array (N, C) /
    (N, 1, 1, C). Probabilities are clamped to >= 1e-12 before the log.
    """
    probs = probabilities.reshape(probabilities.shape[0], -1)
    n, c = probs.shape
    labels = np.asarray(labels)
    if labels.ndim == 1 and not np.issubdtype(labels.dtype, np.floating):
        ids = labels
        if ids.min(initial=0) < 0 or ids.max(initial=0) >= c:
            raise ConfigError(
                f"label ids must be in [0, {c}), got range [{ids.min()}, {ids.max()}]")
        picked = probs[np.arange(n), ids]
    else:
        hot = labels.reshape(n, -1)
        if hot.shape != (n, c):
            raise ConfigError(
                f"one-hot labels of shape {labels.shape} do not match "
                f"probabilities {probabilities.shape}")
        picked = (probs * hot).sum(axis=1)
    return float(np.mean(-np.log(np.maximum(picked, LOSS_CLAMP))))


def loss_backward(model: Model, batch: np.ndarray, labels: np.ndarray, rng=None):
    """Forward in train mode, then backpropagate the fused softmax +
    cross-entropy gradient (p - y) / N from the logits.

    Returns (loss, probabilities, grads) where grads maps
    (layer index, param name) -> gradient array for trainable layers only.
    Backpropagation stops below the deepest frozen prefix.
    """
    logits, probs = model.forward(batch, train=True, rng=rng)
    n = batch.shape[0]
    loss = cross_entropy(probs, labels)
    hot = one_hot(np.asarray(labels), model.config.num_classes, dtype=probs.dtype)
    grad = (probs - hot.reshape(probs.shape)) / np.asarray(n, dtype=probs.dtype)

    trainable_idx = [i for i, layer in enumerate(model.layers) if layer.trainable]
    grads: dict[tuple[int, str], np.ndarray] = {}
    if trainable_idx:
        lowest = trainable_idx[0]
        for i in range(len(model.layers) - 1, lowest - 1, -1):
            grad = model.layers[i].backward(grad)
        for i in trainable_idx:
            for name, g in model.layers[i].grads.items():
                grads[(i, name)] = g
    return loss, probs, grads


def adam_step(params: dict, grads: dict, moments: dict, t: int,
              config: TrainConfig) -> None:
    """One bias-corrected Adam update, in place, for every key in ``grads``."""
    if t < 1:
        raise ConfigError(f"adam step count must be >= 1, got {t}")
    b1, b2, eps = config.adam.beta1, config.adam.beta2, config.adam.epsilon
    lr = config.learning_rate
    for key, g in grads.items():
        param = params[key]
        if key not in moments:
            moments[key] = (np.zeros_like(param), np.zeros_like(param))
        m, v = moments[key]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * (g * g)
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        param -= (lr * m_hat / (np.sqrt(v_hat) + eps)).astype(param.dtype, copy=False)


def evaluate_split(model: Model, split: SplitManifest, name: str,
                   batch_size: int) -> tuple[float, float]:
    """Inference-mode loss and accuracy over one split; never augments."""
    total_loss = 0.0
    correct = 0
    count = 0
    res = model.config.input_resolution
    for xb, yb in batches_for(split, name, batch_size, shuffle_seed=0,
                              augment=None, resolution=res):
        _, probs = model.forward(xb, train=False)
        total_loss += cross_entropy(probs, yb) * len(yb)
        correct += int((probs.reshape(len(yb), -1).argmax(axis=1) == yb).sum())
        count += len(yb)
    if count == 0:
        raise ConfigError(f"split {name!r} is empty")
    return total_loss / count, correct / count


def fit(model: Model, split: SplitManifest, config: TrainConfig,
        out_dir=None, log=None) -> tuple[Model, RunHistory]:
    """Train for config.epochs over the train split, validating each epoch.

    Frozen layers receive no parameter updates and keep their running
    statistics. A checkpoint is written to ``out_dir/last.birrw`` after every
    epoch when ``out_dir`` is given. Loss going non-finite aborts with a
    diagnostic naming the epoch and batch.
    """
    if not split.train:
        raise ConfigError("train split is empty")
    set_trainable(model, config.freeze_policy)
    params = model.trainable_params()
    moments: dict = {}
    t = 0
    history = RunHistory()
    augment = config.augment if config.augment.enabled else None
    res = model.config.input_resolution
    started = time.perf_counter()

    for epoch in range(1, config.epochs + 1):
        epoch_loss = 0.0
        correct = 0
        seen = 0
        loader = batches_for(split, "train", config.batch_size,
                             shuffle_seed=(config.seed, epoch), augment=augment,
                             resolution=res)
        for step, (xb, yb) in enumerate(loader):
            rng = make_rng(config.seed, epoch, step, 0xD0)
            loss, probs, grads = loss_backward(model, xb, yb, rng=rng)
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"loss became non-finite at epoch {epoch}, batch {step}")
            t += 1
            adam_step(params, grads, moments, t, config)
            epoch_loss += loss * len(yb)
            correct += int((probs.reshape(len(yb), -1).argmax(axis=1) == yb).sum())
            seen += len(yb)

        val_loss, val_acc = evaluate_split(model, split, "val", config.batch_size)
        history.train_loss.append(epoch_loss / seen)
        history.train_acc.append(correct / seen)
        history.val_loss.append(val_loss)
        history.val_acc.append(val_acc)
        if log is not None:
            log(f"epoch {epoch}/{config.epochs}  "
                f"train_loss={history.train_loss[-1]:.4f} "
                f"train_acc={history.train_acc[-1]:.3f}  "
                f"val_loss={val_loss:.4f} val_acc={val_acc:.3f}")
        if out_dir is not None:
            save_weights(model, Path(out_dir) / "last.birrw")

    history.wall_time_s = time.perf_counter() - started
    return model, history


def write_history_csv(history: RunHistory, path) -> None:
    lines = [",".join(HISTORY_COLUMNS)]
    for row in history.rows():
        epoch, tl, ta, vl, va = row
        lines.append(f"{epoch},{tl:.6f},{ta:.6f},{vl:.6f},{va:.6f}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def save_train_config(config: TrainConfig, path) -> None:
    Path(path).write_text(json.dumps(asdict(config), indent=2) + "\n",
                          encoding="utf-8")


def load_train_config(path) -> TrainConfig:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    doc["adam"] = AdamConfig(**doc.get("adam", {}))
    doc["augment"] = AugmentConfig(**doc.get("augment", {}))
    return TrainConfig(**doc)
