"""Adam updates and the epoch loop.

The update rule, with bias correction and step count t starting at 0:

    m <- b1*m + (1-b1)*g        v <- b2*v + (1-b2)*g^2
    m_hat = m/(1-b1^t)          v_hat = v/(1-b2^t)
    theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)

Training is deterministic for a given seed: epoch shuffles and dropout
draws come from RNG streams derived from (seed, epoch).
"""

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .data import DatasetSplit, windows_to_arrays
from .errors import InvalidInputError, InvalidSpecError, NumericError, ShapeError
from .network import (
    LstmModel,
    backward,
    cross_entropy_loss,
    forward,
    model_params,
    one_hot,
    predict_proba,
    with_params,
)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 32
    epochs: int = 30
    seed: int = 0
    shuffle: bool = True
    early_stopping: bool = True
    early_stop_patience: int = 5
    early_stop_min_delta: float = 1e-4
    clip_global_norm: float | None = None  # divergence recovery aid, off by default

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise InvalidSpecError("learning_rate must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise InvalidSpecError("beta1/beta2 must lie in [0, 1)")
        if self.batch_size < 1:
            raise InvalidSpecError("batch_size must be >= 1")
        if self.epochs < 0:
            raise InvalidSpecError("epochs must be >= 0")


@dataclass
class AdamState:
    m: dict
    v: dict
    t: int = 0


def init_adam_state(params: dict) -> AdamState:
    return AdamState(
        m={k: np.zeros_like(a) for k, a in params.items()},
        v={k: np.zeros_like(a) for k, a in params.items()},
        t=0,
    )


def adam_step(params: dict, grads: dict, state: AdamState, config: TrainConfig):
    """One optimizer step over every tensor; returns (params', state')."""
    for name, g in grads.items():
        if name not in params:
            raise ShapeError(f"gradient for unknown tensor {name!r}")
        if g.shape != params[name].shape:
            raise ShapeError(
                f"gradient shape {g.shape} does not match parameter {name} {params[name].shape}"
            )
        if not np.isfinite(g).all():
            raise NumericError(f"non-finite gradient for tensor {name!r}")
    t = state.t + 1
    b1, b2 = config.beta1, config.beta2
    bc1 = 1.0 - b1**t
    bc2 = 1.0 - b2**t
    new_params, new_m, new_v = {}, {}, {}
    for name, theta in params.items():
        g = grads[name]
        m = b1 * state.m[name] + (1.0 - b1) * g
        v = b2 * state.v[name] + (1.0 - b2) * g * g
        m_hat = m / bc1
        v_hat = v / bc2
        new_params[name] = theta - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.epsilon)
        new_m[name] = m
        new_v[name] = v
    return new_params, AdamState(m=new_m, v=new_v, t=t)


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    train_acc: list = field(default_factory=list)
    test_loss: list = field(default_factory=list)
    test_acc: list = field(default_factory=list)

    def __len__(self):
        return len(self.train_loss)

    def append(self, tr_loss, tr_acc, te_loss, te_acc):
        self.train_loss.append(float(tr_loss))
        self.train_acc.append(float(tr_acc))
        self.test_loss.append(float(te_loss))
        self.test_acc.append(float(te_acc))

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["epoch", "train_loss", "train_acc", "test_loss", "test_acc"])
            for e in range(len(self)):
                writer.writerow(
                    [e + 1, self.train_loss[e], self.train_acc[e], self.test_loss[e], self.test_acc[e]]
                )


def epoch_order(n: int, seed: int, epoch: int, shuffle: bool) -> np.ndarray:
    """Deterministic visiting order for one epoch; a permutation of range(n)."""
    if not shuffle:
        return np.arange(n)
    return np.random.default_rng([seed, epoch, 0]).permutation(n)


def evaluate(model: LstmModel, x: np.ndarray, y: np.ndarray):
    """Inference-mode (loss, accuracy) over a window stack."""
    if x.shape[0] == 0:
        return float("nan"), float("nan")
    probs = predict_proba(model, x)
    loss = cross_entropy_loss(probs, one_hot(y))
    acc = float((probs.argmax(axis=1) == y).mean())
    return loss, acc


def _clip_grads(grads: dict, max_norm: float) -> dict:
    total = np.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    if total <= max_norm or total == 0.0:
        return grads
    scale = max_norm / total
    return {k: g * scale for k, g in grads.items()}


def train(
    model: LstmModel,
    split: DatasetSplit,
    config: TrainConfig,
    *,
    keep_mask: dict | None = None,
    progress=None,
):
    """Train on the split's train side; returns (trained model, history).

    Every training window is visited exactly once per epoch; the last
    partial batch is trained, not dropped.  ``keep_mask`` (True = active
    weight) freezes pruned positions at zero: their gradients are dropped
    before each step and the weights re-zeroed after it.  ``progress`` is
    called as progress(epoch_index, history) after each epoch.
    """
    x_train, y_train = windows_to_arrays(split.train)
    if x_train.shape[0] == 0:
        raise InvalidInputError("training set is empty")
    x_test, y_test = windows_to_arrays(split.test)

    params = {k: a.copy() for k, a in model_params(model).items()}
    if keep_mask is not None:
        for name, keep in keep_mask.items():
            params[name] = np.where(keep, params[name], 0.0)
    state = init_adam_state(params)
    work = with_params(model, params)
    history = TrainHistory()

    n = x_train.shape[0]
    best_loss = float("inf")
    stall = 0
    for epoch in range(config.epochs):
        order = epoch_order(n, config.seed, epoch, config.shuffle)
        drop_rng = np.random.default_rng([config.seed, epoch, 1])
        for k in range(0, n, config.batch_size):
            idx = order[k : k + config.batch_size]
            xb, yb = x_train[idx], y_train[idx]
            y_oh = one_hot(yb)
            probs, trace = forward(work, xb, training=True, rng=drop_rng)
            grads = backward(work, trace, y_oh)
            if keep_mask is not None:
                for name, keep in keep_mask.items():
                    grads[name] = np.where(keep, grads[name], 0.0)
            if config.clip_global_norm is not None:
                grads = _clip_grads(grads, config.clip_global_norm)
            params, state = adam_step(params, grads, state, config)
            if keep_mask is not None:
                for name, keep in keep_mask.items():
                    params[name] = np.where(keep, params[name], 0.0)
            work = with_params(work, params)
        # Epoch metrics are inference-mode over the full sets, so the loss
        # curve reflects the objective rather than dropout sampling noise.
        train_loss, train_acc = evaluate(work, x_train, y_train)
        test_loss, test_acc = evaluate(work, x_test, y_test)
        history.append(train_loss, train_acc, test_loss, test_acc)
        if progress is not None:
            progress(epoch, history)

        if config.early_stopping:
            if train_loss < best_loss - config.early_stop_min_delta:
                best_loss = train_loss
                stall = 0
            else:
                stall += 1
                if stall >= config.early_stop_patience:
                    break
        best_loss = min(best_loss, train_loss)
    return work, history
