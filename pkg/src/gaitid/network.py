"""Siamese recurrent encoder: gated-cell math, stacked bidirectional scans,
embeddings, contrastive loss, similarity head, and exact analytic gradients.

Cell update rules (gates drawn from the concatenated ``[h_prev, x_t]``):

GRU:
    z = sigmoid(W_z @ [h_prev, x] + b_z)
    r = sigmoid(W_r @ [h_prev, x] + b_r)
    hc = act(W_h @ [r * h_prev, x] + b_h)
    h = (1 - z) * h_prev + z * hc

LSTM (standard gated-memory cell, used for ablations):
    i, f, o = sigmoid(W_{i,f,o} @ [h_prev, x] + b)
    g = act(W_g @ [h_prev, x] + b_g)
    c = f * c_prev + i * g
    h = o * act(c)

Plain RNN (ablation): h = act(W_h @ [h_prev, x] + b_h)

``act`` is the candidate activation (tanh by default, relu optional). A
bidirectional layer runs one cell forward over t = 1..N and an independent
cell backward over t = N..1, both from zero initial state, and emits
``[h_f(t), h_b(t)]`` at each position. Layers stack by feeding one layer's
output rows to the next. The sequence embedding is the final layer's two
end-of-scan states ``[h_f(N), h_b(1)]`` (just ``h_f(N)`` when
unidirectional).

Gradients are reverse-mode, derived by hand and verified against central
finite differences in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import LandmarkSubset, SequenceTensor
from .procrustes import MeanShape

CELL_KINDS = ("gru", "lstm", "rnn")
GATES = {"gru": ("z", "r", "h"), "lstm": ("i", "f", "o", "g"), "rnn": ("h",)}
ACTIVATIONS = ("tanh", "relu")


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _act_forward(name: str, a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Activation value and its elementwise derivative at ``a``."""
    if name == "tanh":
        y = np.tanh(a)
        return y, 1.0 - y * y
    if name == "relu":
        return np.maximum(a, 0.0), (a > 0).astype(np.float64)
    raise ValueError(f"unknown activation {name!r}")


@dataclass
class RecurrentCellParams:
    """One recurrent cell: gate weight matrices H x (H + F_in) plus biases."""

    kind: str
    input_dim: int
    hidden_dim: int
    weights: dict[str, np.ndarray]
    biases: dict[str, np.ndarray]

    def __post_init__(self):
        if self.kind not in CELL_KINDS:
            raise ValueError(f"kind must be one of {CELL_KINDS}")
        expected = GATES[self.kind]
        if tuple(self.weights) != expected or tuple(self.biases) != expected:
            raise ValueError(f"{self.kind} cell needs gates {expected} in order")
        wshape = (self.hidden_dim, self.hidden_dim + self.input_dim)
        for gate in expected:
            if self.weights[gate].shape != wshape:
                raise ValueError(f"W_{gate}: expected shape {wshape}, got {self.weights[gate].shape}")
            if self.biases[gate].shape != (self.hidden_dim,):
                raise ValueError(f"b_{gate}: expected shape ({self.hidden_dim},)")
            if not (np.all(np.isfinite(self.weights[gate])) and np.all(np.isfinite(self.biases[gate]))):
                raise ValueError(f"gate {gate}: non-finite parameters")


@dataclass
class BiLayerParams:
    """A recurrent layer; ``backward_cell`` is None for unidirectional mode."""

    forward_cell: RecurrentCellParams
    backward_cell: RecurrentCellParams | None

    def __post_init__(self):
        fwd = self.forward_cell
        bwd = self.backward_cell
        if bwd is not None:
            if (bwd.kind, bwd.input_dim, bwd.hidden_dim) != (fwd.kind, fwd.input_dim, fwd.hidden_dim):
                raise ValueError("forward and backward cells must share kind and dimensions")

    @property
    def bidirectional(self) -> bool:
        return self.backward_cell is not None

    @property
    def hidden_dim(self) -> int:
        return self.forward_cell.hidden_dim

    @property
    def input_dim(self) -> int:
        return self.forward_cell.input_dim

    @property
    def output_dim(self) -> int:
        return self.hidden_dim * (2 if self.bidirectional else 1)


@dataclass
class EncoderParams:
    """Stacked recurrent layers; layer i+1 consumes layer i's output rows."""

    layers: list[BiLayerParams]
    activation: str = "tanh"

    def __post_init__(self):
        if not self.layers:
            raise ValueError("encoder needs at least one layer")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if nxt.input_dim != prev.output_dim:
                raise ValueError(
                    f"layer input dim {nxt.input_dim} does not chain from previous output {prev.output_dim}"
                )

    @property
    def input_dim(self) -> int:
        return self.layers[0].input_dim

    @property
    def embedding_dim(self) -> int:
        return self.layers[-1].output_dim

    @property
    def cell_kind(self) -> str:
        return self.layers[0].forward_cell.kind

    @property
    def hidden_dim(self) -> int:
        return self.layers[0].hidden_dim

    @property
    def bidirectional(self) -> bool:
        return self.layers[0].bidirectional


@dataclass
class HeadParams:
    """1x1 dense + sigmoid over the two concatenated branch embeddings."""

    weights: np.ndarray  # (2 * embedding_dim,)
    bias: float

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 1:
            raise ValueError("head weights must be a vector")
        self.bias = float(self.bias)
        if not (np.all(np.isfinite(self.weights)) and np.isfinite(self.bias)):
            raise ValueError("head parameters must be finite")


@dataclass
class SiameseModelParams:
    """Everything needed to embed a gait sequence and score a pair.

    The encoder instance is shared by both siamese branches (weight sharing
    is structural, not copied). ``feature_mean``/``feature_std`` standardize
    flattened tensors; zero-variance features carry std 1. ``mean_shape`` is
    the alignment target fitted on training data (None when the model is
    used on pre-aligned tensors).
    """

    encoder: EncoderParams
    head: HeadParams
    margin: float
    subset: LandmarkSubset
    feature_mean: np.ndarray
    feature_std: np.ndarray
    n_frames: int
    dims: int = 3
    allow_scale: bool = True
    mean_shape: MeanShape | None = None

    def __post_init__(self):
        self.margin = float(self.margin)
        if self.margin <= 0:
            raise ValueError("margin must be positive")
        if self.dims not in (2, 3):
            raise ValueError("dims must be 2 or 3")
        if self.n_frames < 2:
            raise ValueError("n_frames must be >= 2")
        f = self.encoder.input_dim
        self.feature_mean = np.asarray(self.feature_mean, dtype=np.float64)
        self.feature_std = np.asarray(self.feature_std, dtype=np.float64)
        if self.feature_mean.shape != (f,) or self.feature_std.shape != (f,):
            raise ValueError(f"feature stats must have shape ({f},)")
        if np.any(self.feature_std <= 0):
            raise ValueError("feature_std entries must be > 0 (zero-variance features get 1)")
        if self.head.weights.shape != (2 * self.encoder.embedding_dim,):
            raise ValueError(
                f"head expects {2 * self.encoder.embedding_dim} inputs, got {self.head.weights.shape}"
            )

    @property
    def feature_dim(self) -> int:
        return self.encoder.input_dim

    def standardize(self, tensor: SequenceTensor) -> SequenceTensor:
        """Apply the model's per-feature standardization to a raw tensor."""
        if tensor.feature_dim != self.feature_dim:
            raise ValueError(f"tensor has F={tensor.feature_dim}, model expects {self.feature_dim}")
        return tensor.with_values((tensor.values - self.feature_mean) / self.feature_std)


def init_cell(kind: str, input_dim: int, hidden_dim: int, rng: np.random.Generator) -> RecurrentCellParams:
    """Weights uniform in (-1/sqrt(H), 1/sqrt(H)); biases zero."""
    bound = 1.0 / np.sqrt(hidden_dim)
    weights = {}
    biases = {}
    for gate in GATES[kind]:
        weights[gate] = rng.uniform(-bound, bound, size=(hidden_dim, hidden_dim + input_dim))
        biases[gate] = np.zeros(hidden_dim)
    return RecurrentCellParams(kind, input_dim, hidden_dim, weights, biases)


def init_encoder(
    input_dim: int,
    hidden_dim: int,
    rng: np.random.Generator,
    cell_kind: str = "gru",
    stack: int = 2,
    bidirectional: bool = True,
    activation: str = "tanh",
) -> EncoderParams:
    layers = []
    dim = input_dim
    for _ in range(stack):
        fwd = init_cell(cell_kind, dim, hidden_dim, rng)
        bwd = init_cell(cell_kind, dim, hidden_dim, rng) if bidirectional else None
        layer = BiLayerParams(fwd, bwd)
        layers.append(layer)
        dim = layer.output_dim
    return EncoderParams(layers, activation=activation)


def init_head(embedding_dim: int) -> HeadParams:
    return HeadParams(np.zeros(2 * embedding_dim), 0.0)


# ---------------------------------------------------------------------------
# single-step cell math (public per-kind entry points wrap the cached steps)


def _gru_step(cell, h_prev, x, activation):
    u = np.concatenate([h_prev, x])
    z = sigmoid(cell.weights["z"] @ u + cell.biases["z"])
    r = sigmoid(cell.weights["r"] @ u + cell.biases["r"])
    v = np.concatenate([r * h_prev, x])
    hc, dact = _act_forward(activation, cell.weights["h"] @ v + cell.biases["h"])
    h = (1.0 - z) * h_prev + z * hc
    return h, None, (u, z, r, v, hc, dact)


def _gru_backward(cell, cache, dh, dc, grads):
    u, z, r, v, hc, dact = cache
    H = cell.hidden_dim
    h_prev = u[:H]
    dz = dh * (hc - h_prev)
    dhc = dh * z
    dh_prev = dh * (1.0 - z)
    da_h = dhc * dact
    grads["W_h"] += np.outer(da_h, v)
    grads["b_h"] += da_h
    dv = cell.weights["h"].T @ da_h
    dr = dv[:H] * h_prev
    dh_prev = dh_prev + dv[:H] * r
    dx = dv[H:].copy()
    da_r = dr * r * (1.0 - r)
    da_z = dz * z * (1.0 - z)
    grads["W_r"] += np.outer(da_r, u)
    grads["b_r"] += da_r
    grads["W_z"] += np.outer(da_z, u)
    grads["b_z"] += da_z
    du = cell.weights["r"].T @ da_r + cell.weights["z"].T @ da_z
    dh_prev = dh_prev + du[:H]
    dx += du[H:]
    return dh_prev, 0.0, dx


def _lstm_step(cell, h_prev, c_prev, x, activation):
    u = np.concatenate([h_prev, x])
    i = sigmoid(cell.weights["i"] @ u + cell.biases["i"])
    f = sigmoid(cell.weights["f"] @ u + cell.biases["f"])
    o = sigmoid(cell.weights["o"] @ u + cell.biases["o"])
    g, dact_g = _act_forward(activation, cell.weights["g"] @ u + cell.biases["g"])
    c = f * c_prev + i * g
    cs, dact_c = _act_forward(activation, c)
    h = o * cs
    return h, c, (u, i, f, o, g, c_prev, cs, dact_g, dact_c)


def _lstm_backward(cell, cache, dh, dc_in, grads):
    u, i, f, o, g, c_prev, cs, dact_g, dact_c = cache
    H = cell.hidden_dim
    do = dh * cs
    dc = dc_in + dh * o * dact_c
    df = dc * c_prev
    di = dc * g
    dg = dc * i
    dc_prev = dc * f
    da_i = di * i * (1.0 - i)
    da_f = df * f * (1.0 - f)
    da_o = do * o * (1.0 - o)
    da_g = dg * dact_g
    du = np.zeros_like(u)
    for gate, da in (("i", da_i), ("f", da_f), ("o", da_o), ("g", da_g)):
        grads[f"W_{gate}"] += np.outer(da, u)
        grads[f"b_{gate}"] += da
        du += cell.weights[gate].T @ da
    return du[:H], dc_prev, du[H:]


def _rnn_step(cell, h_prev, x, activation):
    u = np.concatenate([h_prev, x])
    h, dact = _act_forward(activation, cell.weights["h"] @ u + cell.biases["h"])
    return h, None, (u, dact)


def _rnn_backward(cell, cache, dh, dc, grads):
    u, dact = cache
    H = cell.hidden_dim
    da = dh * dact
    grads["W_h"] += np.outer(da, u)
    grads["b_h"] += da
    du = cell.weights["h"].T @ da
    return du[:H], 0.0, du[H:]


def cell_step_gru(cell: RecurrentCellParams, h_prev: np.ndarray, x_t: np.ndarray, activation: str = "tanh") -> np.ndarray:
    """One GRU update; returns the new hidden state."""
    if cell.kind != "gru":
        raise ValueError("cell_step_gru needs a gru cell")
    _check_step_dims(cell, h_prev, x_t)
    h, _, _ = _gru_step(cell, h_prev, x_t, activation)
    return h


def cell_step_lstm(
    cell: RecurrentCellParams,
    h_prev: np.ndarray,
    c_prev: np.ndarray,
    x_t: np.ndarray,
    activation: str = "tanh",
) -> tuple[np.ndarray, np.ndarray]:
    """One LSTM update; returns (hidden state, cell state)."""
    if cell.kind != "lstm":
        raise ValueError("cell_step_lstm needs an lstm cell")
    _check_step_dims(cell, h_prev, x_t)
    h, c, _ = _lstm_step(cell, h_prev, np.asarray(c_prev, dtype=np.float64), x_t, activation)
    return h, c


def cell_step_rnn(cell: RecurrentCellParams, h_prev: np.ndarray, x_t: np.ndarray, activation: str = "tanh") -> np.ndarray:
    if cell.kind != "rnn":
        raise ValueError("cell_step_rnn needs an rnn cell")
    _check_step_dims(cell, h_prev, x_t)
    h, _, _ = _rnn_step(cell, h_prev, x_t, activation)
    return h


def _check_step_dims(cell, h_prev, x_t):
    if np.asarray(h_prev).shape != (cell.hidden_dim,):
        raise ValueError(f"h_prev must have shape ({cell.hidden_dim},)")
    if np.asarray(x_t).shape != (cell.input_dim,):
        raise ValueError(f"x_t must have shape ({cell.input_dim},)")


_STEPS = {"gru": _gru_step, "lstm": _lstm_step, "rnn": _rnn_step}
_BACKS = {"gru": _gru_backward, "lstm": _lstm_backward, "rnn": _rnn_backward}


def _cell_scan(cell, X, activation, times):
    """Run the cell over rows of X in the given time order, from zero state."""
    H = cell.hidden_dim
    h = np.zeros(H)
    c = np.zeros(H)
    states = np.zeros((X.shape[0], H))
    caches = []
    step = _STEPS[cell.kind]
    for t in times:
        if cell.kind == "lstm":
            h, c, cache = step(cell, h, c, X[t], activation)
        else:
            h, _, cache = step(cell, h, X[t], activation)
        states[t] = h
        caches.append(cache)
    return states, caches


def _cell_scan_backward(cell, caches, d_states, times, grads):
    """BPTT over one scan; returns gradient w.r.t. the input rows."""
    back = _BACKS[cell.kind]
    dX = np.zeros((d_states.shape[0], cell.input_dim))
    dh_carry = np.zeros(cell.hidden_dim)
    dc_carry = np.zeros(cell.hidden_dim)
    for i in range(len(times) - 1, -1, -1):
        t = times[i]
        dh = d_states[t] + dh_carry
        dh_carry, dc_carry, dX[t] = back(cell, caches[i], dh, dc_carry, grads)
    return dX


def _zero_cell_grads(cell) -> dict[str, np.ndarray]:
    grads = {}
    for gate in GATES[cell.kind]:
        grads[f"W_{gate}"] = np.zeros_like(cell.weights[gate])
        grads[f"b_{gate}"] = np.zeros_like(cell.biases[gate])
    return grads


def _bilayer_forward_cached(layer: BiLayerParams, X: np.ndarray, activation: str):
    n = X.shape[0]
    fwd_states, fwd_caches = _cell_scan(layer.forward_cell, X, activation, range(n))
    if layer.bidirectional:
        bwd_states, bwd_caches = _cell_scan(layer.backward_cell, X, activation, range(n - 1, -1, -1))
        out = np.concatenate([fwd_states, bwd_states], axis=1)
    else:
        bwd_caches = None
        out = fwd_states
    return out, (fwd_caches, bwd_caches)


def bilayer_forward(layer: BiLayerParams, X: np.ndarray, activation: str = "tanh") -> np.ndarray:
    """Scan a layer over an N x F_in matrix; row t of the output is
    ``[h_f(t), h_b(t)]`` (just ``h_f(t)`` when unidirectional)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != layer.input_dim:
        raise ValueError(f"X must be N x {layer.input_dim}, got {X.shape}")
    out, _ = _bilayer_forward_cached(layer, X, activation)
    return out


def _encode_cached(encoder: EncoderParams, X: np.ndarray):
    activations = [X]
    caches = []
    for layer in encoder.layers:
        out, cache = _bilayer_forward_cached(layer, activations[-1], encoder.activation)
        activations.append(out)
        caches.append(cache)
    final = activations[-1]
    H = encoder.layers[-1].hidden_dim
    if encoder.layers[-1].bidirectional:
        emb = np.concatenate([final[-1, :H], final[0, H:]])
    else:
        emb = final[-1].copy()
    return emb, activations, caches


def encode(model: SiameseModelParams, tensor: SequenceTensor) -> np.ndarray:
    """Embed one standardized sequence tensor (callers standardize first).

    The embedding is the final layer's concatenated end-of-scan states
    ``[h_f(N), h_b(1)]``.
    """
    if tensor.feature_dim != model.feature_dim:
        raise ValueError(f"tensor has F={tensor.feature_dim}, model expects {model.feature_dim}")
    if tensor.n_frames != model.n_frames:
        raise ValueError(f"tensor has N={tensor.n_frames}, model expects {model.n_frames}")
    emb, _, _ = _encode_cached(model.encoder, tensor.values)
    return emb


def pair_distance(e_a: np.ndarray, e_b: np.ndarray) -> float:
    """Euclidean distance between two embeddings."""
    e_a = np.asarray(e_a, dtype=np.float64)
    e_b = np.asarray(e_b, dtype=np.float64)
    if e_a.shape != e_b.shape:
        raise ValueError(f"embedding length mismatch: {e_a.shape} vs {e_b.shape}")
    return float(np.linalg.norm(e_a - e_b))


def contrastive_loss(distance: float, label: int, margin: float) -> float:
    """(1 - Y) * D^2 + Y * max(0, m - D)^2 with Y=0 similar, Y=1 dissimilar."""
    if label not in (0, 1):
        raise ValueError("label must be 0 (similar) or 1 (dissimilar)")
    if distance < 0:
        raise ValueError("distance must be non-negative")
    if margin <= 0:
        raise ValueError("margin must be positive")
    hinge = max(0.0, margin - distance)
    return (1 - label) * distance * distance + label * hinge * hinge


def similarity_score(model: SiameseModelParams, e_a: np.ndarray, e_b: np.ndarray) -> float:
    """Sigmoid similarity in [0, 1] from the dense head over [e_a, e_b]."""
    e_a = np.asarray(e_a, dtype=np.float64)
    e_b = np.asarray(e_b, dtype=np.float64)
    joint = np.concatenate([e_a, e_b])
    if joint.shape != model.head.weights.shape:
        raise ValueError(f"head expects {model.head.weights.shape[0]} inputs, got {joint.shape[0]}")
    return float(sigmoid(np.array([model.head.weights @ joint + model.head.bias]))[0])


# ---------------------------------------------------------------------------
# reverse-mode gradients of the contrastive objective


def encoder_param_items(encoder: EncoderParams):
    """(name, array) pairs in the canonical order used by the optimizer and
    checkpoints: layers ascending, forward then backward cell, gates in
    definition order, weight before bias."""
    for li, layer in enumerate(encoder.layers):
        cells = [("fwd", layer.forward_cell)]
        if layer.backward_cell is not None:
            cells.append(("bwd", layer.backward_cell))
        for direction, cell in cells:
            for gate in GATES[cell.kind]:
                yield f"layers.{li}.{direction}.W_{gate}", cell.weights[gate]
                yield f"layers.{li}.{direction}.b_{gate}", cell.biases[gate]


def encoder_params_flat(encoder: EncoderParams) -> dict[str, np.ndarray]:
    return dict(encoder_param_items(encoder))


def set_encoder_params(encoder: EncoderParams, flat: dict[str, np.ndarray]) -> None:
    """Write a flat parameter dict back into the encoder structure."""
    for li, layer in enumerate(encoder.layers):
        cells = [("fwd", layer.forward_cell)]
        if layer.backward_cell is not None:
            cells.append(("bwd", layer.backward_cell))
        for direction, cell in cells:
            for gate in GATES[cell.kind]:
                cell.weights[gate] = np.asarray(flat[f"layers.{li}.{direction}.W_{gate}"], dtype=np.float64)
                cell.biases[gate] = np.asarray(flat[f"layers.{li}.{direction}.b_{gate}"], dtype=np.float64)


def _zero_encoder_grads(encoder: EncoderParams) -> dict[str, np.ndarray]:
    return {name: np.zeros_like(arr) for name, arr in encoder_param_items(encoder)}


def _encode_backward(encoder: EncoderParams, activations, caches, d_emb, grads) -> None:
    """Accumulate encoder gradients for one branch given d(loss)/d(embedding)."""
    top = encoder.layers[-1]
    H = top.hidden_dim
    n = activations[-1].shape[0]
    d_out = np.zeros_like(activations[-1])
    if top.bidirectional:
        d_out[-1, :H] += d_emb[:H]
        d_out[0, H:] += d_emb[H:]
    else:
        d_out[-1] += d_emb
    for li in range(len(encoder.layers) - 1, -1, -1):
        layer = encoder.layers[li]
        fwd_caches, bwd_caches = caches[li]
        Hl = layer.hidden_dim
        fwd_grads = {k: grads[f"layers.{li}.fwd.{k}"] for k in _cell_grad_keys(layer.forward_cell)}
        d_in = _cell_scan_backward(layer.forward_cell, fwd_caches, d_out[:, :Hl], range(n), fwd_grads)
        if layer.bidirectional:
            bwd_grads = {k: grads[f"layers.{li}.bwd.{k}"] for k in _cell_grad_keys(layer.backward_cell)}
            d_in += _cell_scan_backward(
                layer.backward_cell, bwd_caches, d_out[:, Hl:], range(n - 1, -1, -1), bwd_grads
            )
        d_out = d_in


def _cell_grad_keys(cell):
    return [f"{p}_{g}" for g in GATES[cell.kind] for p in ("W", "b")]


@dataclass
class ModelGradients:
    """Contrastive loss, pair distance, and encoder gradients for one pair."""

    loss: float
    distance: float
    grads: dict[str, np.ndarray] = field(repr=False)


def model_gradients(model: SiameseModelParams, pair) -> ModelGradients:
    """Exact gradients of the contrastive objective w.r.t. every encoder
    parameter for one (standardized) sequence pair.

    The head is excluded: it is fitted separately on frozen embeddings. The
    hinge subgradient at D = margin is 0; for a dissimilar pair with D = 0
    the (undefined) direction is also taken as 0.
    """
    emb_a, act_a, caches_a = _encode_cached(model.encoder, pair.a.values)
    emb_b, act_b, caches_b = _encode_cached(model.encoder, pair.b.values)
    diff = emb_a - emb_b
    distance = float(np.linalg.norm(diff))
    loss = contrastive_loss(distance, pair.label, model.margin)
    grads = _zero_encoder_grads(model.encoder)
    if pair.label == 0:
        d_emb_a = 2.0 * diff
    elif distance >= model.margin or distance == 0.0:
        d_emb_a = np.zeros_like(diff)
    else:
        d_emb_a = (-2.0 * (model.margin - distance) / distance) * diff
    if np.any(d_emb_a):
        _encode_backward(model.encoder, act_a, caches_a, d_emb_a, grads)
        _encode_backward(model.encoder, act_b, caches_b, -d_emb_a, grads)
    return ModelGradients(loss, distance, grads)
