"""Training and fine-tuning: Adam, cross-entropy, early stopping.

The loop shuffles with a seeded generator, trains with batch-statistics
batchnorm (running stats folded with momentum 0.99 after every batch),
evaluates validation log-loss in inference mode after each epoch, keeps
the best-epoch weights, and stops once ``patience`` epochs pass without
improvement. Everything is deterministic for a fixed seed and data.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import model, nn
from .exceptions import ShapeError

cross_entropy = nn.cross_entropy


@dataclass
class TrainConfig:
    batch_size: int = 64
    max_epochs: int = 1000
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    patience: int = 50
    seed: int = 0
    standardize: bool = True

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.patience > self.max_epochs:
            raise ValueError("patience must be <= max_epochs")


@dataclass
class LabeledDataset:
    """Feature maps with integer class labels."""

    features: np.ndarray  # (N, C, H, W)
    labels: np.ndarray  # (N,)
    split: str = ""

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float32)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(self.features) != len(self.labels):
            raise ValueError(
                f"{len(self.features)} feature maps vs {len(self.labels)} labels"
            )
        if len(self.features) == 0:
            raise ValueError("dataset is empty")

    def __len__(self):
        return len(self.features)


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float
    val_acc: float  # percent


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_init(params, keys) -> AdamState:
    state = AdamState()
    for k in keys:
        state.m[k] = np.zeros_like(params[k])
        state.v[k] = np.zeros_like(params[k])
    return state


def adam_step(params, grads, state: AdamState, config: TrainConfig):
    """One bias-corrected Adam update, in place on ``params``."""
    state.t += 1
    b1, b2 = config.beta1, config.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for k, m in state.m.items():
        g = grads[k]
        if g.shape != params[k].shape:
            raise ShapeError(f"gradient shape {g.shape} != param shape {params[k].shape}")
        m += (1.0 - b1) * (g - m)
        v = state.v[k]
        v += (1.0 - b2) * (g * g - v)
        params[k] -= config.learning_rate * (m / c1) / (np.sqrt(v / c2) + config.eps)


def _check_labels(ds: LabeledDataset, n_classes: int, name: str):
    if ds.labels.min() < 0 or ds.labels.max() >= n_classes:
        raise ValueError(f"{name} labels must lie in 0..{n_classes - 1}")


def evaluate_probs(probs, labels) -> tuple:
    """(accuracy percent, mean log-loss) of a probability matrix."""
    acc = 100.0 * float(np.mean(np.argmax(probs, axis=1) == labels))
    return acc, nn.cross_entropy(probs, labels)


def train(net: model.Network, train_set: LabeledDataset, val_set: LabeledDataset,
          config: TrainConfig | None = None):
    """Train a copy of ``net``; returns (best-epoch network, history).

    The initial weights count as the epoch-0 candidate, so a zero-epoch
    run returns the input network unchanged. When ``config.standardize``
    is set and the network carries no input normalization yet, a scalar
    (mean, std) over the training features is computed, applied during
    training, and stored on the returned network.
    """
    config = config or TrainConfig()
    work = net.copy()
    n_classes = work.config.n_classes
    _check_labels(train_set, n_classes, "train")
    _check_labels(val_set, n_classes, "validation")

    if config.standardize and work.input_norm is None:
        mean = float(train_set.features.mean(dtype=np.float64))
        std = float(train_set.features.std(dtype=np.float64))
        work.input_norm = (mean, max(std, 1e-8))

    x_train = model.apply_input_norm(work, train_set.features)
    x_val = model.apply_input_norm(work, val_set.features)
    y_train, y_val = train_set.labels, val_set.labels

    keys = model.trainable_keys(work.config)
    state = adam_init(work.params, keys)
    rng = np.random.default_rng(config.seed)

    def snapshot():
        return {k: v.copy() for k, v in work.params.items()}

    def val_metrics():
        probs = model.infer_probs(work.params, x_val)
        return evaluate_probs(probs, y_val)

    _, best_loss = val_metrics()
    best_params = snapshot()
    since_best = 0
    history = []

    n = len(train_set)
    for epoch in range(1, config.max_epochs + 1):
        perm = rng.permutation(n)
        batch_losses = []
        for start in range(0, n, config.batch_size):
            idx = perm[start : start + config.batch_size]
            probs, caches, bn_stats = model.train_forward(work.params, x_train[idx])
            batch_losses.append(nn.cross_entropy(probs, y_train[idx]))
            grads = model.train_backward(work.params, caches, y_train[idx])
            adam_step(work.params, grads, state, config)
            for bn, (bmean, bvar) in bn_stats.items():
                for stat, value in (("mean", bmean), ("var", bvar)):
                    run = work.params[f"{bn}.{stat}"]
                    run += (1.0 - nn.BN_MOMENTUM) * (value.astype(run.dtype) - run)
        val_acc, val_loss = val_metrics()
        history.append(EpochStats(epoch, float(np.mean(batch_losses)), val_loss, val_acc))
        if val_loss < best_loss:
            best_loss = val_loss
            best_params = snapshot()
            since_best = 0
        else:
            since_best += 1
            if since_best > config.patience:
                break

    best = model.Network(
        config=work.config, params=best_params, precision="float32",
        input_norm=work.input_norm, name=net.name, meta=dict(net.meta),
    )
    return best, history


def finetune(pruned_net: model.Network, train_set: LabeledDataset,
             val_set: LabeledDataset, config: TrainConfig | None = None):
    """Retrain a pruned network from its surviving weights.

    Identical procedure to :func:`train`; an inherited input
    normalization is reused rather than recomputed.
    """
    return train(pruned_net, train_set, val_set, config)


def history_to_csv(history, path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "train_loss", "val_loss", "val_acc"])
        for row in history:
            writer.writerow(
                [row.epoch, f"{row.train_loss:.6f}", f"{row.val_loss:.6f}",
                 f"{row.val_acc:.2f}"]
            )
