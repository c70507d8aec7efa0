"""Stacked LSTM classifier with from-scratch forward and backward passes.

Gate layout: the input (w), recurrent (u) and bias (b) parameters of a
layer stack the four gates row-wise in the order input, forget, candidate,
output.  A cell step computes

    i = sigmoid(Wi x + Ui h + bi)      f = sigmoid(Wf x + Uf h + bf)
    g = tanh   (Wg x + Ug h + bg)      o = sigmoid(Wo x + Uo h + bo)
    c = f * c_prev + i * g             h = o * tanh(c)

Layer 1 emits its full hidden sequence; layer 2 consumes it and only the
final hidden state feeds the 2-way softmax head.  Inverted dropout is
applied after each LSTM layer in training mode.  All math is float64.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidSpecError, ShapeError
from .signals import NormParams, PreprocessConfig

N_CLASSES = 2
PROB_FLOOR = 1e-12


@dataclass
class LstmLayerParams:
    w: np.ndarray  # (4*hidden, input)
    u: np.ndarray  # (4*hidden, hidden)
    b: np.ndarray  # (4*hidden,)

    def __post_init__(self):
        w, u, b = (np.asarray(a, dtype=np.float64) for a in (self.w, self.u, self.b))
        if b.ndim != 1 or b.size % 4 != 0:
            raise ShapeError(f"bias must be a vector of length 4*hidden, got {b.shape}")
        hidden = b.size // 4
        if w.shape != (4 * hidden, w.shape[1]) or w.ndim != 2:
            raise ShapeError(f"input weights must be (4*{hidden}, input), got {w.shape}")
        if u.shape != (4 * hidden, hidden):
            raise ShapeError(f"recurrent weights must be (4*{hidden}, {hidden}), got {u.shape}")
        if not (np.isfinite(w).all() and np.isfinite(u).all() and np.isfinite(b).all()):
            raise ShapeError("layer parameters must be finite")
        self.w, self.u, self.b = w, u, b

    @property
    def hidden(self) -> int:
        return self.b.size // 4

    @property
    def input_size(self) -> int:
        return self.w.shape[1]


@dataclass
class DenseParams:
    w: np.ndarray  # (2, input)
    b: np.ndarray  # (2,)

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64)
        b = np.asarray(self.b, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != N_CLASSES or b.shape != (N_CLASSES,):
            raise ShapeError(f"head must map to exactly {N_CLASSES} classes, got {w.shape}, {b.shape}")
        self.w, self.b = w, b


@dataclass
class LstmModel:
    layer1: LstmLayerParams
    layer2: LstmLayerParams
    head: DenseParams
    dropout_rate: float = 0.2
    norm_params: NormParams | None = None
    preprocess: PreprocessConfig | None = None
    sample_rate_hz: float = 50.0
    window_len: int = 50
    features: int = 6

    def __post_init__(self):
        if not 0.0 <= self.dropout_rate < 1.0:
            raise InvalidSpecError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.layer1.input_size != self.features:
            raise ShapeError(
                f"layer1 expects {self.layer1.input_size} features, model declares {self.features}"
            )
        if self.layer2.input_size != self.layer1.hidden:
            raise ShapeError("layer2 input does not match layer1 hidden size")
        if self.head.w.shape[1] != self.layer2.hidden:
            raise ShapeError("head input does not match layer2 hidden size")

    @property
    def units(self) -> tuple:
        return (self.layer1.hidden, self.layer2.hidden)


def _glorot(rng, rows, cols):
    limit = math.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, size=(rows, cols))


def _init_layer(rng, input_size, hidden):
    w = np.vstack([_glorot(rng, hidden, input_size) for _ in range(4)])
    u = np.vstack([_glorot(rng, hidden, hidden) for _ in range(4)])
    b = np.zeros(4 * hidden)
    b[hidden : 2 * hidden] = 1.0  # forget-gate bias aids early gradient flow
    return LstmLayerParams(w=w, u=u, b=b)


def init_model(
    seed: int,
    *,
    features: int = 6,
    hidden: tuple = (64, 32),
    window_len: int = 50,
    dropout_rate: float = 0.2,
    norm_params: NormParams | None = None,
    preprocess: PreprocessConfig | None = None,
    sample_rate_hz: float = 50.0,
) -> LstmModel:
    """Deterministic Glorot-uniform initialization from a seed."""
    rng = np.random.default_rng(seed)
    layer1 = _init_layer(rng, features, hidden[0])
    layer2 = _init_layer(rng, hidden[0], hidden[1])
    head = DenseParams(w=_glorot(rng, N_CLASSES, hidden[1]), b=np.zeros(N_CLASSES))
    return LstmModel(
        layer1=layer1,
        layer2=layer2,
        head=head,
        dropout_rate=dropout_rate,
        norm_params=norm_params,
        preprocess=preprocess,
        sample_rate_hz=sample_rate_hz,
        window_len=window_len,
        features=features,
    )


PARAM_KEYS = ("layer1.w", "layer1.u", "layer1.b", "layer2.w", "layer2.u", "layer2.b", "head.w", "head.b")


def model_params(model: LstmModel) -> dict:
    """Name -> array view of every trainable tensor."""
    return {
        "layer1.w": model.layer1.w,
        "layer1.u": model.layer1.u,
        "layer1.b": model.layer1.b,
        "layer2.w": model.layer2.w,
        "layer2.u": model.layer2.u,
        "layer2.b": model.layer2.b,
        "head.w": model.head.w,
        "head.b": model.head.b,
    }


def with_params(model: LstmModel, params: dict) -> LstmModel:
    """A copy of the model carrying the given tensors."""
    return replace(
        model,
        layer1=LstmLayerParams(w=params["layer1.w"], u=params["layer1.u"], b=params["layer1.b"]),
        layer2=LstmLayerParams(w=params["layer2.w"], u=params["layer2.u"], b=params["layer2.b"]),
        head=DenseParams(w=params["head.w"], b=params["head.b"]),
    )


def models_equal(a: LstmModel, b: LstmModel) -> bool:
    pa, pb = model_params(a), model_params(b)
    return all(np.array_equal(pa[k], pb[k]) for k in PARAM_KEYS)


def sigmoid(x):
    # Clipping keeps exp() in range; error is below 1e-26 for |x| >= 60.
    return 1.0 / (1.0 + np.exp(-np.clip(x, -60.0, 60.0)))


def softmax(logits):
    z = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def dropout_mask(shape, rate: float, rng) -> np.ndarray:
    """Inverted-dropout mask: kept entries carry 1/(1-rate), dropped ones 0."""
    if not 0.0 <= rate < 1.0:
        raise InvalidSpecError(f"dropout rate must be in [0, 1), got {rate}")
    if rate == 0.0:
        return np.ones(shape)
    keep = rng.random(shape) >= rate
    return keep.astype(np.float64) / (1.0 - rate)


def lstm_cell_step(x, h_prev, c_prev, params: LstmLayerParams):
    """One LSTM step. Accepts single vectors or (batch, dim) arrays."""
    x = np.asarray(x, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    c_prev = np.asarray(c_prev, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x, h_prev, c_prev = x[None, :], h_prev[None, :], c_prev[None, :]
    hidden = params.hidden
    if x.shape[1] != params.input_size or h_prev.shape[1] != hidden or c_prev.shape[1] != hidden:
        raise ShapeError(
            f"cell step got x{x.shape}, h{h_prev.shape}, c{c_prev.shape} for a "
            f"{params.input_size}->{hidden} layer"
        )
    a = x @ params.w.T + h_prev @ params.u.T + params.b
    i = sigmoid(a[:, :hidden])
    f = sigmoid(a[:, hidden : 2 * hidden])
    g = np.tanh(a[:, 2 * hidden : 3 * hidden])
    o = sigmoid(a[:, 3 * hidden :])
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    if single:
        return h[0], c[0]
    return h, c


@dataclass
class LayerTrace:
    inputs: np.ndarray  # what the layer actually consumed (B, T, in)
    i: np.ndarray
    f: np.ndarray
    g: np.ndarray
    o: np.ndarray
    c: np.ndarray
    tanh_c: np.ndarray
    h: np.ndarray


@dataclass
class ForwardTrace:
    """Everything the backward pass needs, captured during forward."""

    layer1: LayerTrace
    layer2: LayerTrace
    mask1: np.ndarray
    mask2: np.ndarray
    h2_dropped: np.ndarray
    logits: np.ndarray
    probs: np.ndarray
    training: bool


def _layer_forward(params: LstmLayerParams, x: np.ndarray) -> LayerTrace:
    batch, steps, _ = x.shape
    hidden = params.hidden
    pre = (x.reshape(batch * steps, -1) @ params.w.T).reshape(batch, steps, 4 * hidden)
    pre = pre + params.b
    i_a = np.empty((batch, steps, hidden))
    f_a = np.empty_like(i_a)
    g_a = np.empty_like(i_a)
    o_a = np.empty_like(i_a)
    c_a = np.empty_like(i_a)
    tc_a = np.empty_like(i_a)
    h_a = np.empty_like(i_a)
    h = np.zeros((batch, hidden))
    c = np.zeros((batch, hidden))
    ut = params.u.T
    for t in range(steps):
        a = pre[:, t] + h @ ut
        i = sigmoid(a[:, :hidden])
        f = sigmoid(a[:, hidden : 2 * hidden])
        g = np.tanh(a[:, 2 * hidden : 3 * hidden])
        o = sigmoid(a[:, 3 * hidden :])
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        i_a[:, t], f_a[:, t], g_a[:, t], o_a[:, t] = i, f, g, o
        c_a[:, t], tc_a[:, t], h_a[:, t] = c, tc, h
    return LayerTrace(inputs=x, i=i_a, f=f_a, g=g_a, o=o_a, c=c_a, tanh_c=tc_a, h=h_a)


def forward(model: LstmModel, windows, *, training: bool = False, rng=None, masks=None):
    """Run the classifier.

    ``windows`` is one (window_len, features) matrix or a batch
    (n, window_len, features).  Returns (probabilities, trace);
    probabilities match the input's batchedness.  In training mode the
    dropout masks come from ``rng`` unless fixed ``masks`` are supplied.
    """
    x = np.asarray(windows, dtype=np.float64)
    single = x.ndim == 2
    if single:
        x = x[None]
    if x.ndim != 3 or x.shape[1] != model.window_len or x.shape[2] != model.features:
        raise ShapeError(
            f"expected windows of shape ({model.window_len}, {model.features}), got {np.shape(windows)}"
        )
    batch = x.shape[0]
    rate = model.dropout_rate if training else 0.0

    lt1 = _layer_forward(model.layer1, x)
    if masks is not None:
        mask1 = masks[0]
    elif rate > 0.0:
        if rng is None:
            raise InvalidSpecError("training-mode forward with dropout needs an rng")
        mask1 = dropout_mask(lt1.h.shape, rate, rng)
    else:
        mask1 = np.ones_like(lt1.h)
    h1_dropped = lt1.h * mask1

    lt2 = _layer_forward(model.layer2, h1_dropped)
    h2_final = lt2.h[:, -1]
    if masks is not None:
        mask2 = masks[1]
    elif rate > 0.0:
        mask2 = dropout_mask(h2_final.shape, rate, rng)
    else:
        mask2 = np.ones_like(h2_final)
    h2_dropped = h2_final * mask2

    logits = h2_dropped @ model.head.w.T + model.head.b
    probs = softmax(logits)
    trace = ForwardTrace(
        layer1=lt1,
        layer2=lt2,
        mask1=mask1,
        mask2=mask2,
        h2_dropped=h2_dropped,
        logits=logits,
        probs=probs,
        training=training,
    )
    if single:
        return probs[0], trace
    return probs, trace


def one_hot(labels, n_classes: int = N_CLASSES) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros(labels.shape + (n_classes,))
    np.put_along_axis(out, labels[..., None], 1.0, axis=-1)
    return out


def cross_entropy_loss(probs, labels_onehot) -> float:
    """-sum(y * log(p)) with p clamped to [1e-12, 1]; mean over a batch."""
    p = np.clip(np.asarray(probs, dtype=np.float64), PROB_FLOOR, 1.0)
    y = np.asarray(labels_onehot, dtype=np.float64)
    if p.shape != y.shape:
        raise ShapeError(f"probabilities {p.shape} and labels {y.shape} disagree")
    losses = -(y * np.log(p)).sum(axis=-1)
    return float(losses if losses.ndim == 0 else losses.mean())


def _layer_backward(params: LstmLayerParams, lt: LayerTrace, dh_seq: np.ndarray, need_dx: bool = True):
    batch, steps, hidden = lt.h.shape
    da = np.empty((batch, steps, 4 * hidden))
    dh_next = np.zeros((batch, hidden))
    dc_next = np.zeros((batch, hidden))
    for t in range(steps - 1, -1, -1):
        dh = dh_seq[:, t] + dh_next
        i, f, g, o = lt.i[:, t], lt.f[:, t], lt.g[:, t], lt.o[:, t]
        tc = lt.tanh_c[:, t]
        dc = dc_next + dh * o * (1.0 - tc * tc)
        do = dh * tc
        di = dc * g
        dg = dc * i
        df = dc * lt.c[:, t - 1] if t > 0 else np.zeros_like(dc)
        da[:, t, :hidden] = di * i * (1.0 - i)
        da[:, t, hidden : 2 * hidden] = df * f * (1.0 - f)
        da[:, t, 2 * hidden : 3 * hidden] = dg * (1.0 - g * g)
        da[:, t, 3 * hidden :] = do * o * (1.0 - o)
        dh_next = da[:, t] @ params.u
        dc_next = dc * f
    h_prev = np.concatenate([np.zeros((batch, 1, hidden)), lt.h[:, :-1]], axis=1)
    flat = da.reshape(batch * steps, 4 * hidden)
    dw = flat.T @ lt.inputs.reshape(batch * steps, -1)
    du = flat.T @ h_prev.reshape(batch * steps, hidden)
    db = flat.sum(axis=0)
    dx = (flat @ params.w).reshape(batch, steps, -1) if need_dx else None
    return dw, du, db, dx


def backward(model: LstmModel, trace: ForwardTrace, labels_onehot) -> dict:
    """Exact gradients of the mean cross-entropy w.r.t. every parameter."""
    y = np.asarray(labels_onehot, dtype=np.float64)
    if y.ndim == 1:
        y = y[None]
    probs = trace.probs
    if probs.shape != y.shape:
        raise ShapeError(f"trace batch {probs.shape} does not match labels {y.shape}")
    batch = probs.shape[0]

    dlogits = (probs - y) / batch
    grads = {
        "head.w": dlogits.T @ trace.h2_dropped,
        "head.b": dlogits.sum(axis=0),
    }
    dh2 = (dlogits @ model.head.w) * trace.mask2

    steps = trace.layer2.h.shape[1]
    dh_seq2 = np.zeros_like(trace.layer2.h)
    dh_seq2[:, steps - 1] = dh2
    dw2, du2, db2, dx2 = _layer_backward(model.layer2, trace.layer2, dh_seq2)
    grads["layer2.w"], grads["layer2.u"], grads["layer2.b"] = dw2, du2, db2

    dh_seq1 = dx2 * trace.mask1
    dw1, du1, db1, _ = _layer_backward(model.layer1, trace.layer1, dh_seq1, need_dx=False)
    grads["layer1.w"], grads["layer1.u"], grads["layer1.b"] = dw1, du1, db1
    return grads


def predict_proba(model: LstmModel, x: np.ndarray, batch_size: int = 256) -> np.ndarray:
    """Inference-mode fall probabilities for a stack of windows, (n, 2)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] == 0:
        return np.zeros((0, N_CLASSES))
    outs = []
    for k in range(0, x.shape[0], batch_size):
        probs, _ = forward(model, x[k : k + batch_size])
        outs.append(probs)
    return np.concatenate(outs, axis=0)
