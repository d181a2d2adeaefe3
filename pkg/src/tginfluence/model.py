"""Shared CNN over per-snapshot feature matrices feeding a stacked LSTM.

Architecture (fixed): conv 16@3x3 pad 1 -> ReLU -> maxpool 2x2 -> conv 32@3x3
pad 1 -> ReLU -> maxpool 2x2 -> flatten -> linear -> scalar per snapshot; the
scalar sequence drives a 2-layer LSTM (input 1, hidden 64) whose final hidden
state maps linearly to the predicted score.  Everything is float64 numpy with
hand-written exact gradients so the backward pass can be verified against
central finite differences and training is bit-reproducible.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field, replace
from typing import Iterator, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError, ContractError, TrainingError
from .metrics import kendall_tau
from .temporal_graph import FeatureMatrix, feature_sequences

HIDDEN = 64
N_LAYERS = 2
CONV1_FILTERS = 16
CONV2_FILTERS = 32
ARCH_TAG = "conv16-conv32-lstm2x64-v1"


def pooled_side(k: int) -> int:
    return (k // 2) // 2


def flat_dim(k: int) -> int:
    side = pooled_side(k)
    return CONV2_FILTERS * side * side


@dataclass
class CnnParams:
    conv1_w: np.ndarray     # (16, 1, 3, 3)
    conv1_b: np.ndarray     # (16,)
    conv2_w: np.ndarray     # (32, 16, 3, 3)
    conv2_b: np.ndarray     # (32,)
    fc_w: np.ndarray        # (flat_dim,)
    fc_b: np.ndarray        # (1,)


@dataclass
class LstmParams:
    w_ih: list[np.ndarray]  # per layer, (4H, input)
    w_hh: list[np.ndarray]  # per layer, (4H, H)
    b_ih: list[np.ndarray]  # per layer, (4H,)
    b_hh: list[np.ndarray]  # per layer, (4H,)
    head_w: np.ndarray      # (H,)
    head_b: np.ndarray      # (1,)


@dataclass
class ModelParams:
    cnn: CnnParams
    lstm: LstmParams
    k: int
    s: int

    def tensors(self) -> Iterator[tuple[str, np.ndarray]]:
        """All trainable tensors in a fixed order."""
        yield "conv1_w", self.cnn.conv1_w
        yield "conv1_b", self.cnn.conv1_b
        yield "conv2_w", self.cnn.conv2_w
        yield "conv2_b", self.cnn.conv2_b
        yield "fc_w", self.cnn.fc_w
        yield "fc_b", self.cnn.fc_b
        for layer in range(N_LAYERS):
            yield f"lstm{layer}_w_ih", self.lstm.w_ih[layer]
            yield f"lstm{layer}_w_hh", self.lstm.w_hh[layer]
            yield f"lstm{layer}_b_ih", self.lstm.b_ih[layer]
            yield f"lstm{layer}_b_hh", self.lstm.b_hh[layer]
        yield "head_w", self.lstm.head_w
        yield "head_b", self.lstm.head_b

    def tensor(self, name: str) -> np.ndarray:
        for key, arr in self.tensors():
            if key == name:
                return arr
        raise KeyError(name)

    def clone(self) -> "ModelParams":
        cnn = CnnParams(*(a.copy() for a in (
            self.cnn.conv1_w, self.cnn.conv1_b, self.cnn.conv2_w,
            self.cnn.conv2_b, self.cnn.fc_w, self.cnn.fc_b)))
        lstm = LstmParams(
            w_ih=[a.copy() for a in self.lstm.w_ih],
            w_hh=[a.copy() for a in self.lstm.w_hh],
            b_ih=[a.copy() for a in self.lstm.b_ih],
            b_hh=[a.copy() for a in self.lstm.b_hh],
            head_w=self.lstm.head_w.copy(),
            head_b=self.lstm.head_b.copy(),
        )
        return ModelParams(cnn=cnn, lstm=lstm, k=self.k, s=self.s)


def init_params(k: int, s: int, seed: int = 0) -> ModelParams:
    """Uniform +-1/sqrt(fan-in) initialization, deterministic per seed.

    k must be >= 4 so two stride-2 pools leave at least one cell.
    """
    if k < 4:
        raise ConfigError(f"neighborhood size k must be >= 4 for this CNN, got {k}")
    if s < 1:
        raise ConfigError(f"number of input snapshots s must be >= 1, got {s}")
    rng = np.random.default_rng(seed)

    def uniform(shape, fan_in):
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    f = flat_dim(k)
    cnn = CnnParams(
        conv1_w=uniform((CONV1_FILTERS, 1, 3, 3), 9),
        conv1_b=uniform((CONV1_FILTERS,), 9),
        conv2_w=uniform((CONV2_FILTERS, CONV1_FILTERS, 3, 3), CONV1_FILTERS * 9),
        conv2_b=uniform((CONV2_FILTERS,), CONV1_FILTERS * 9),
        fc_w=uniform((f,), f),
        fc_b=uniform((1,), f),
    )
    sizes = [1, HIDDEN]
    lstm = LstmParams(
        w_ih=[uniform((4 * HIDDEN, sizes[l]), sizes[l]) for l in range(N_LAYERS)],
        w_hh=[uniform((4 * HIDDEN, HIDDEN), HIDDEN) for l in range(N_LAYERS)],
        b_ih=[uniform((4 * HIDDEN,), sizes[l]) for l in range(N_LAYERS)],
        b_hh=[uniform((4 * HIDDEN,), HIDDEN) for l in range(N_LAYERS)],
        head_w=uniform((HIDDEN,), HIDDEN),
        head_b=uniform((1,), HIDDEN),
    )
    return ModelParams(cnn=cnn, lstm=lstm, k=k, s=s)


def zero_grads(params: ModelParams) -> dict[str, np.ndarray]:
    return {name: np.zeros_like(arr) for name, arr in params.tensors()}


# ---------------------------------------------------------------------------
# CNN forward/backward (batched over M independent k x k matrices).
# Internals run channels-last so every heavy contraction is a plain 2-d GEMM:
# patches are (M*H*W, 3*3*C) rows against (F, 3*3*C) filter rows.

def _filter_rows(w: np.ndarray) -> np.ndarray:
    """(F, C, 3, 3) filters -> (F, 9C) rows matching the patch layout."""
    f, c = w.shape[0], w.shape[1]
    return np.ascontiguousarray(w.transpose(0, 2, 3, 1).reshape(f, 9 * c))


def _rows_to_filters(rows: np.ndarray, c: int) -> np.ndarray:
    f = rows.shape[0]
    return np.ascontiguousarray(
        rows.reshape(f, 3, 3, c).transpose(0, 3, 1, 2))


def _im2col(x: np.ndarray) -> np.ndarray:
    """(M, H, W, C) -> (M*H*W, 9C) padded 3x3 patch rows."""
    m, h, w, c = x.shape
    xp = np.zeros((m, h + 2, w + 2, c))
    xp[:, 1:h + 1, 1:w + 1, :] = x
    win = sliding_window_view(xp, (3, 3), axis=(1, 2))  # (M, H, W, C, 3, 3)
    return np.ascontiguousarray(
        win.transpose(0, 1, 2, 4, 5, 3)).reshape(m * h * w, 9 * c)


def _col2im(dcols: np.ndarray, m: int, h: int, w: int, c: int) -> np.ndarray:
    """Adjoint of _im2col: scatter patch-row gradients back to (M, H, W, C)."""
    d6 = dcols.reshape(m, h, w, 3, 3, c)
    dxp = np.zeros((m, h + 2, w + 2, c))
    for di in range(3):
        for dj in range(3):
            dxp[:, di:di + h, dj:dj + w, :] += d6[:, :, :, di, dj, :]
    return dxp[:, 1:h + 1, 1:w + 1, :]


def _maxpool(x: np.ndarray):
    """2x2 stride-2 max pool over (M, H, W, C); odd trailing rows/columns
    are dropped.  Ties resolve to the first cell in row-major window order,
    so the pool is deterministic."""
    m, h, w, c = x.shape
    ho, wo = h // 2, w // 2
    x00 = x[:, 0:2 * ho:2, 0:2 * wo:2, :]
    x01 = x[:, 0:2 * ho:2, 1:2 * wo:2, :]
    x10 = x[:, 1:2 * ho:2, 0:2 * wo:2, :]
    x11 = x[:, 1:2 * ho:2, 1:2 * wo:2, :]
    top = x00 >= x01
    row_a = np.where(top, x00, x01)
    bottom = x10 >= x11
    row_b = np.where(bottom, x10, x11)
    upper = row_a >= row_b
    out = np.where(upper, row_a, row_b)
    return out, (top, bottom, upper)


def _maxpool_back(dout: np.ndarray, masks, in_shape) -> np.ndarray:
    top, bottom, upper = masks
    m, h, w, c = in_shape
    ho, wo = dout.shape[1], dout.shape[2]
    d_a = dout * upper
    d_b = dout - d_a
    full = np.zeros(in_shape)
    full[:, 0:2 * ho:2, 0:2 * wo:2, :] = d_a * top
    full[:, 0:2 * ho:2, 1:2 * wo:2, :] = d_a * ~top
    full[:, 1:2 * ho:2, 0:2 * wo:2, :] = d_b * bottom
    full[:, 1:2 * ho:2, 1:2 * wo:2, :] = d_b * ~bottom
    return full


def _cnn_forward_batch(x: np.ndarray, cnn: CnnParams, keep_cache: bool = False):
    """x: (M, k, k) -> (M,) scalar embeddings (plus backward cache)."""
    m, k, _ = x.shape
    h1 = k // 2
    w1 = _filter_rows(cnn.conv1_w)                    # (16, 9)
    w2 = _filter_rows(cnn.conv2_w)                    # (32, 144)

    cols1 = _im2col(x[:, :, :, None])                 # (M*k*k, 9)
    z1 = cols1 @ w1.T + cnn.conv1_b
    a1 = np.maximum(z1, 0.0).reshape(m, k, k, CONV1_FILTERS)
    p1, arg1 = _maxpool(a1)                           # (M, h1, h1, 16)

    cols2 = _im2col(p1)                               # (M*h1*h1, 144)
    z2 = cols2 @ w2.T + cnn.conv2_b
    a2 = np.maximum(z2, 0.0).reshape(m, h1, h1, CONV2_FILTERS)
    p2, arg2 = _maxpool(a2)                           # (M, h2, h2, 32)

    flat = p2.reshape(m, -1)
    out = flat @ cnn.fc_w + cnn.fc_b[0]
    if not keep_cache:
        return out, None
    cache = (cols1, z1, arg1, cols2, z2, arg2, flat, k, h1)
    return out, cache


def _cnn_backward_batch(dout: np.ndarray, cache, cnn: CnnParams,
                        grads: dict[str, np.ndarray]):
    cols1, z1, arg1, cols2, z2, arg2, flat, k, h1 = cache
    m = dout.shape[0]
    h2 = pooled_side(k)
    w2 = _filter_rows(cnn.conv2_w)

    grads["fc_w"] += flat.T @ dout
    grads["fc_b"][0] += dout.sum()
    dflat = dout[:, None] * cnn.fc_w[None, :]

    dp2 = dflat.reshape(m, h2, h2, CONV2_FILTERS)
    da2 = _maxpool_back(dp2, arg2, (m, h1, h1, CONV2_FILTERS))
    dz2 = da2.reshape(m * h1 * h1, CONV2_FILTERS) * (z2 > 0.0)
    grads["conv2_b"] += dz2.sum(axis=0)
    grads["conv2_w"] += _rows_to_filters(dz2.T @ cols2, CONV1_FILTERS)
    dcols2 = dz2 @ w2                                 # (M*h1*h1, 144)
    dp1 = _col2im(dcols2, m, h1, h1, CONV1_FILTERS)
    da1 = _maxpool_back(dp1, arg1, (m, k, k, CONV1_FILTERS))
    dz1 = da1.reshape(m * k * k, CONV1_FILTERS) * (z1 > 0.0)
    grads["conv1_b"] += dz1.sum(axis=0)
    grads["conv1_w"] += _rows_to_filters(dz1.T @ cols1, 1)


# ---------------------------------------------------------------------------
# LSTM forward/backward (batched over B sequences of scalars)

def _sigmoid(x: np.ndarray) -> np.ndarray:
    # exp(-log(1+exp(-x))): overflow-safe for large |x|
    return np.exp(-np.logaddexp(0.0, -x))


def _lstm_forward_batch(x: np.ndarray, lstm: LstmParams, keep_cache: bool = False):
    """x: (B, s) scalar sequences -> (B,) scores (plus backward cache)."""
    b, s = x.shape
    h = [np.zeros((b, HIDDEN)) for _ in range(N_LAYERS)]
    c = [np.zeros((b, HIDDEN)) for _ in range(N_LAYERS)]
    steps = []
    for t in range(s):
        inp = x[:, t:t + 1]
        layer_caches = []
        for layer in range(N_LAYERS):
            gates = (inp @ lstm.w_ih[layer].T + h[layer] @ lstm.w_hh[layer].T
                     + lstm.b_ih[layer] + lstm.b_hh[layer])
            gi = _sigmoid(gates[:, :HIDDEN])
            gf = _sigmoid(gates[:, HIDDEN:2 * HIDDEN])
            gg = np.tanh(gates[:, 2 * HIDDEN:3 * HIDDEN])
            go = _sigmoid(gates[:, 3 * HIDDEN:])
            c_new = gf * c[layer] + gi * gg
            tanh_c = np.tanh(c_new)
            h_new = go * tanh_c
            if keep_cache:
                layer_caches.append(
                    (inp, h[layer], c[layer], gi, gf, gg, go, tanh_c))
            inp = h_new
            h[layer] = h_new
            c[layer] = c_new
        if keep_cache:
            steps.append(layer_caches)
    score = h[N_LAYERS - 1] @ lstm.head_w + lstm.head_b[0]
    if not keep_cache:
        return score, None
    return score, (steps, h[N_LAYERS - 1])


def _lstm_backward_batch(dscore: np.ndarray, cache, lstm: LstmParams,
                         grads: dict[str, np.ndarray]) -> np.ndarray:
    """Returns the gradient w.r.t. the scalar input sequence, shape (B, s)."""
    steps, h_last = cache
    b = dscore.shape[0]
    s = len(steps)
    grads["head_w"] += h_last.T @ dscore
    grads["head_b"][0] += dscore.sum()

    dh = [np.zeros((b, HIDDEN)) for _ in range(N_LAYERS)]
    dc = [np.zeros((b, HIDDEN)) for _ in range(N_LAYERS)]
    dh[N_LAYERS - 1] = dscore[:, None] * lstm.head_w[None, :]
    dx = np.zeros((b, s))
    for t in range(s - 1, -1, -1):
        for layer in range(N_LAYERS - 1, -1, -1):
            inp, h_prev, c_prev, gi, gf, gg, go, tanh_c = steps[t][layer]
            dh_t = dh[layer]
            do = dh_t * tanh_c
            dct = dc[layer] + dh_t * go * (1.0 - tanh_c ** 2)
            di = dct * gg
            dg = dct * gi
            df = dct * c_prev
            dc[layer] = dct * gf
            dpre = np.concatenate([
                di * gi * (1.0 - gi),
                df * gf * (1.0 - gf),
                dg * (1.0 - gg ** 2),
                do * go * (1.0 - go),
            ], axis=1)
            grads[f"lstm{layer}_w_ih"] += dpre.T @ inp
            grads[f"lstm{layer}_w_hh"] += dpre.T @ h_prev
            grads[f"lstm{layer}_b_ih"] += dpre.sum(axis=0)
            grads[f"lstm{layer}_b_hh"] += dpre.sum(axis=0)
            dh[layer] = dpre @ lstm.w_hh[layer]
            d_inp = dpre @ lstm.w_ih[layer]
            if layer == 0:
                dx[:, t] = d_inp[:, 0]
            else:
                dh[layer - 1] = dh[layer - 1] + d_inp
    return dx


# ---------------------------------------------------------------------------
# Public operations

def _as_matrix(matrix) -> np.ndarray:
    values = getattr(matrix, "values", matrix)
    return np.asarray(values, dtype=np.float64)


def cnn_forward(matrix, cnn: CnnParams) -> float:
    """Scalar embedding of one k x k feature matrix."""
    x = _as_matrix(matrix)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise ContractError(f"expected a square matrix, got shape {x.shape}")
    if flat_dim(x.shape[0]) != cnn.fc_w.shape[0]:
        raise ContractError(
            f"matrix size {x.shape[0]} does not match CNN trained for "
            f"flat dim {cnn.fc_w.shape[0]}")
    out, _ = _cnn_forward_batch(x[None], cnn)
    return float(out[0])


def lstm_forward(inputs: Sequence[float], lstm: LstmParams) -> float:
    """Score of one scalar sequence through both recurrent layers."""
    x = np.asarray(inputs, dtype=np.float64).reshape(1, -1)
    if x.size == 0:
        raise ContractError("empty input sequence")
    score, _ = _lstm_forward_batch(x, lstm)
    return float(score[0])


def predict(sequence, params: ModelParams) -> float:
    """Score one node from its feature-matrix sequence (oldest first)."""
    mats = [_as_matrix(m) for m in sequence]
    if len(mats) != params.s:
        raise ContractError(f"expected {params.s} matrices, got {len(mats)}")
    x = np.stack(mats)
    emb, _ = _cnn_forward_batch(x, params.cnn)
    return lstm_forward(emb, params.lstm)


def predict_batch(x: np.ndarray, params: ModelParams,
                  chunk: int = 1024) -> np.ndarray:
    """Score many nodes at once; x has shape (B, s, k, k)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 4 or x.shape[1] != params.s or x.shape[2] != params.k:
        raise ContractError(
            f"expected (B, {params.s}, {params.k}, {params.k}), got {x.shape}")
    out = np.empty(x.shape[0])
    for lo in range(0, x.shape[0], chunk):
        part = x[lo:lo + chunk]
        b, s, k, _ = part.shape
        emb, _ = _cnn_forward_batch(part.reshape(b * s, k, k), params.cnn)
        score, _ = _lstm_forward_batch(emb.reshape(b, s), params.lstm)
        out[lo:lo + part.shape[0]] = score
    return out


def loss(predictions, labels) -> float:
    """Mean squared error over the batch."""
    p = np.asarray(predictions, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if p.shape != y.shape:
        raise ContractError(f"length mismatch: {p.shape} vs {y.shape}")
    d = p - y
    return float(d @ d / d.shape[0])


def _loss_and_grads(x: np.ndarray, y: np.ndarray, params: ModelParams,
                    chunk: int = 256):
    """Exact loss/gradients, accumulated over fixed-size chunks so memory
    stays bounded for full-batch training; chunking order is fixed, so the
    result is reproducible."""
    b = x.shape[0]
    grads = zero_grads(params)
    scores = np.empty(b)
    sq_sum = 0.0
    for lo in range(0, b, chunk):
        xb = x[lo:lo + chunk]
        yb = y[lo:lo + chunk]
        nb, s, k, _ = xb.shape
        emb, cnn_cache = _cnn_forward_batch(
            xb.reshape(nb * s, k, k), params.cnn, keep_cache=True)
        score, lstm_cache = _lstm_forward_batch(
            emb.reshape(nb, s), params.lstm, keep_cache=True)
        scores[lo:lo + nb] = score
        diff = score - yb
        sq_sum += float(diff @ diff)
        dscore = 2.0 * diff / b
        dx_seq = _lstm_backward_batch(dscore, lstm_cache, params.lstm, grads)
        _cnn_backward_batch(dx_seq.reshape(nb * s), cnn_cache, params.cnn, grads)
    return sq_sum / b, scores, grads


def backward(batch, params: ModelParams) -> dict[str, np.ndarray]:
    """Exact gradients of the mean squared loss for a (sequences, labels)
    batch, keyed like ``ModelParams.tensors()``."""
    x, y = batch
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape[0] != y.shape[0]:
        raise ContractError(f"batch mismatch: {x.shape[0]} sequences, "
                            f"{y.shape[0]} labels")
    _, _, grads = _loss_and_grads(x, y, params)
    return grads


# ---------------------------------------------------------------------------
# Training

@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    iterations: int = 2000
    batch_size: int | None = 64     # None = full batch
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    label_scale: str = "node-count"  # or "none"

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigError(f"learning rate must be positive, got {self.learning_rate}")
        if self.iterations < 1:
            raise ConfigError(f"iterations must be >= 1, got {self.iterations}")
        if self.label_scale not in ("node-count", "none"):
            raise ConfigError(f"unknown label scaling mode {self.label_scale!r}")


@dataclass
class TrainResult:
    params: ModelParams
    losses: np.ndarray

    @property
    def final_loss(self) -> float:
        return float(self.losses[-1])


def label_scale_factor(cfg: TrainConfig, n_labels: int) -> float:
    return float(n_labels) if cfg.label_scale == "node-count" else 1.0


def train(dataset, cfg: TrainConfig, init_seed: int | None = None,
          init_params_override: ModelParams | None = None) -> TrainResult:
    """Mini-batch Adam on the squared loss; deterministic given the seeds.

    ``dataset`` is a (sequences, labels) pair with sequences shaped
    (N, s, k, k).  Raises :class:`TrainingError` naming the iteration if the
    loss stops being finite.
    """
    x, y_raw = dataset
    x = np.asarray(x, dtype=np.float64)
    y_raw = np.asarray(y_raw, dtype=np.float64)
    if x.ndim != 4 or x.shape[0] == 0:
        raise ContractError("dataset must be a non-empty (N, s, k, k) array")
    if x.shape[0] != y_raw.shape[0]:
        raise ContractError("one label per sequence required")
    n, s, k, _ = x.shape
    y = y_raw / label_scale_factor(cfg, n)

    if init_params_override is not None:
        params = init_params_override.clone()
    else:
        params = init_params(k, s, cfg.seed if init_seed is None else init_seed)

    m_state = zero_grads(params)
    v_state = zero_grads(params)
    tensors = dict(params.tensors())
    rng = np.random.default_rng(cfg.seed)
    order = np.empty(0, dtype=np.int64)
    cursor = 0
    batch = n if cfg.batch_size is None else min(cfg.batch_size, n)
    losses = np.empty(cfg.iterations)

    for it in range(cfg.iterations):
        if batch == n:
            xb, yb = x, y
        else:
            if cursor + batch > len(order):
                order = rng.permutation(n)
                cursor = 0
            sel = order[cursor:cursor + batch]
            cursor += batch
            xb, yb = x[sel], y[sel]
        value, _, grads = _loss_and_grads(xb, yb, params)
        if not np.isfinite(value):
            raise TrainingError(f"loss became non-finite at iteration {it}")
        losses[it] = value
        step = it + 1
        bc1 = 1.0 - cfg.adam_beta1 ** step
        bc2 = 1.0 - cfg.adam_beta2 ** step
        for name, arr in tensors.items():
            g = grads[name]
            m_state[name] = cfg.adam_beta1 * m_state[name] + (1 - cfg.adam_beta1) * g
            v_state[name] = cfg.adam_beta2 * v_state[name] + (1 - cfg.adam_beta2) * g * g
            arr -= cfg.learning_rate * (m_state[name] / bc1) / (
                np.sqrt(v_state[name] / bc2) + cfg.adam_eps)
    return TrainResult(params=params, losses=losses)


# ---------------------------------------------------------------------------
# Input-snapshot selection

@dataclass
class SelectionResult:
    best_s: int
    taus: dict[int, float]
    params: ModelParams


def select_s(snapshots, candidates: Sequence[int], *, k: int,
             train_label_t: int, train_labels: dict,
             val_label_t: int, val_labels: dict,
             train_cfg: TrainConfig, init_seed: int | None = None,
             log1p: bool = False) -> SelectionResult:
    """Train one model per candidate s and keep the one with the best
    validation Kendall tau (smaller s wins ties)."""
    cands = sorted(set(int(s) for s in candidates))
    if not cands:
        raise ConfigError("no candidate values for s")
    max_s = cands[-1]
    if train_label_t - max_s < 1 or val_label_t - max_s < 1:
        raise ConfigError(
            f"not enough history for s={max_s} with training label at "
            f"t={train_label_t} and validation label at t={val_label_t}")
    n = snapshots[0].n_nodes
    y_train = np.array([train_labels[u].value for u in range(n)])
    y_val = np.array([val_labels[u].value for u in range(n)])

    best: tuple[float, int, ModelParams] | None = None
    taus: dict[int, float] = {}
    for s in cands:
        x_train = feature_sequences(
            snapshots, range(train_label_t - s, train_label_t), k, log1p=log1p)
        result = train((x_train, y_train), train_cfg, init_seed=init_seed)
        x_val = feature_sequences(
            snapshots, range(val_label_t - s, val_label_t), k, log1p=log1p)
        preds = predict_batch(x_val, result.params)
        tau = kendall_tau(preds, y_val)
        taus[s] = tau
        if best is None or tau > best[0]:
            best = (tau, s, result.params)
    return SelectionResult(best_s=best[1], taus=taus, params=best[2])


# ---------------------------------------------------------------------------
# Checkpoints

def save_params(path, params: ModelParams):
    """Versioned npz checkpoint; round-trips bit-exactly."""
    meta = {"arch": ARCH_TAG, "k": params.k, "s": params.s}
    arrays = {name: arr for name, arr in params.tensors()}
    with open(path, "wb") as fh:
        np.savez(fh, __meta__=np.frombuffer(
            json.dumps(meta).encode(), dtype=np.uint8), **arrays)


def load_params(path) -> ModelParams:
    with np.load(path) as data:
        meta = json.loads(bytes(data["__meta__"]).decode())
        if meta["arch"] != ARCH_TAG:
            raise ContractError(
                f"checkpoint architecture {meta['arch']!r} != {ARCH_TAG!r}")
        k, s = int(meta["k"]), int(meta["s"])
        cnn = CnnParams(
            conv1_w=data["conv1_w"], conv1_b=data["conv1_b"],
            conv2_w=data["conv2_w"], conv2_b=data["conv2_b"],
            fc_w=data["fc_w"], fc_b=data["fc_b"])
        lstm = LstmParams(
            w_ih=[data[f"lstm{l}_w_ih"] for l in range(N_LAYERS)],
            w_hh=[data[f"lstm{l}_w_hh"] for l in range(N_LAYERS)],
            b_ih=[data[f"lstm{l}_b_ih"] for l in range(N_LAYERS)],
            b_hh=[data[f"lstm{l}_b_hh"] for l in range(N_LAYERS)],
            head_w=data["head_w"], head_b=data["head_b"])
    return ModelParams(cnn=cnn, lstm=lstm, k=k, s=s)
