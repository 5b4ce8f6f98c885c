"""Two-layer LSTM regressor with hand-written backpropagation through time and Adam.

Shapes: sequences are ``(T, D)`` or batched ``(T, B, D)``. Gate blocks in
every ``(4H, ...)`` weight are stacked in the order input ``i``, forget
``f``, cell candidate ``g``, output ``o``. All arithmetic is float64.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

__all__ = [
    "AdamState",
    "CHECKPOINT_FORMAT",
    "LstmLayerParams",
    "Normalizer",
    "SeqModel",
    "adam_step",
    "backward",
    "forward",
    "init_model",
    "load_checkpoint",
    "lstm_step",
    "save_checkpoint",
    "step",
]

CHECKPOINT_FORMAT = "accel2pos-seqmodel/1"


@dataclass
class LstmLayerParams:
    W_ih: np.ndarray  # (4H, D)
    W_hh: np.ndarray  # (4H, H)
    b: np.ndarray  # (4H,)

    @property
    def hidden_size(self) -> int:
        return self.W_hh.shape[1]

    @property
    def input_size(self) -> int:
        return self.W_ih.shape[1]

    def check(self):
        H = self.hidden_size
        if self.W_ih.shape[0] != 4 * H or self.W_hh.shape != (4 * H, H) or self.b.shape != (4 * H,):
            raise ValueError("inconsistent LSTM layer shapes")


@dataclass
class Normalizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def identity(cls, dim: int) -> "Normalizer":
        return cls(np.zeros(dim), np.ones(dim))

    @classmethod
    def fit(cls, samples: np.ndarray, min_std: float = 1e-8) -> "Normalizer":
        samples = np.asarray(samples, dtype=float).reshape(-1, np.shape(samples)[-1])
        return cls(samples.mean(axis=0), np.maximum(samples.std(axis=0), min_std))

    def normalize(self, x):
        return (x - self.mean) / self.std

    def denormalize(self, y):
        return y * self.std + self.mean


@dataclass
class SeqModel:
    layers: list[LstmLayerParams]
    head_W: np.ndarray  # (O, H)
    head_b: np.ndarray  # (O,)
    input_norm: Normalizer
    output_norm: Normalizer

    def __post_init__(self):
        if len(self.layers) != 2:
            raise ValueError("SeqModel has exactly two stacked LSTM layers")
        for layer in self.layers:
            layer.check()
        if self.layers[1].input_size != self.layers[0].hidden_size:
            raise ValueError("layer 2 input size must equal layer 1 hidden size")
        if self.head_W.shape[1] != self.layers[1].hidden_size:
            raise ValueError("head input size must equal layer 2 hidden size")

    @property
    def input_size(self) -> int:
        return self.layers[0].input_size

    @property
    def output_size(self) -> int:
        return self.head_W.shape[0]

    @property
    def hidden_sizes(self) -> tuple[int, int]:
        return tuple(layer.hidden_size for layer in self.layers)

    def params(self) -> dict[str, np.ndarray]:
        """Trainable arrays by name (live references, updated in place by Adam)."""
        out = {}
        for k, layer in enumerate(self.layers):
            out[f"l{k}.W_ih"] = layer.W_ih
            out[f"l{k}.W_hh"] = layer.W_hh
            out[f"l{k}.b"] = layer.b
        out["head.W"] = self.head_W
        out["head.b"] = self.head_b
        return out

    def copy(self) -> "SeqModel":
        return SeqModel(
            [LstmLayerParams(l.W_ih.copy(), l.W_hh.copy(), l.b.copy()) for l in self.layers],
            self.head_W.copy(), self.head_b.copy(),
            Normalizer(self.input_norm.mean.copy(), self.input_norm.std.copy()),
            Normalizer(self.output_norm.mean.copy(), self.output_norm.std.copy()),
        )

    def zero_state(self, batch: int | None = None):
        shape = lambda H: (H,) if batch is None else (batch, H)
        return [(np.zeros(shape(H)), np.zeros(shape(H))) for H in self.hidden_sizes]


def init_model(input_size: int, hidden_size: int | tuple[int, int], output_size: int = 1,
               rng=None, input_norm: Normalizer | None = None,
               output_norm: Normalizer | None = None) -> SeqModel:
    """Uniform(+-1/sqrt(H)) weights, forget-gate bias 1, other biases 0."""
    rng = np.random.default_rng(rng)
    sizes = (hidden_size, hidden_size) if np.isscalar(hidden_size) else tuple(hidden_size)
    layers = []
    d = input_size
    for H in sizes:
        k = 1.0 / np.sqrt(H)
        b = np.zeros(4 * H)
        b[H:2 * H] = 1.0
        layers.append(LstmLayerParams(rng.uniform(-k, k, (4 * H, d)), rng.uniform(-k, k, (4 * H, H)), b))
        d = H
    k = 1.0 / np.sqrt(d)
    return SeqModel(
        layers, rng.uniform(-k, k, (output_size, d)), np.zeros(output_size),
        input_norm or Normalizer.identity(input_size),
        output_norm or Normalizer.identity(output_size),
    )


def _gate_activations(z: np.ndarray, H: int) -> np.ndarray:
    a = np.empty_like(z)
    a[..., :2 * H] = expit(z[..., :2 * H])
    a[..., 2 * H:3 * H] = np.tanh(z[..., 2 * H:3 * H])
    a[..., 3 * H:] = expit(z[..., 3 * H:])
    return a


def lstm_step(layer: LstmLayerParams, x, h, c):
    """One LSTM recurrence step; works on single vectors or ``(B, .)`` batches."""
    x, h, c = np.asarray(x, float), np.asarray(h, float), np.asarray(c, float)
    H = layer.hidden_size
    if x.shape[-1] != layer.input_size or h.shape[-1] != H or c.shape[-1] != H:
        raise ValueError(
            f"dimension mismatch: x {x.shape}, h {h.shape}, c {c.shape} for D={layer.input_size}, H={H}")
    a = _gate_activations(x @ layer.W_ih.T + h @ layer.W_hh.T + layer.b, H)
    i, f, g, o = a[..., :H], a[..., H:2 * H], a[..., 2 * H:3 * H], a[..., 3 * H:]
    c_new = f * c + i * g
    return o * np.tanh(c_new), c_new


def _layer_forward(layer: LstmLayerParams, X, h0, c0):
    T, B, _ = X.shape
    H = layer.hidden_size
    zx = X @ layer.W_ih.T + layer.b
    Whh_T = layer.W_hh.T
    hs = np.empty((T + 1, B, H))
    cs = np.empty((T + 1, B, H))
    acts = np.empty((T, B, 4 * H))
    tcs = np.empty((T, B, H))
    hs[0], cs[0] = h0, c0
    for t in range(T):
        a = acts[t]
        z = zx[t] + hs[t] @ Whh_T
        a[:, :2 * H] = expit(z[:, :2 * H])
        a[:, 2 * H:3 * H] = np.tanh(z[:, 2 * H:3 * H])
        a[:, 3 * H:] = expit(z[:, 3 * H:])
        cs[t + 1] = a[:, H:2 * H] * cs[t] + a[:, :H] * a[:, 2 * H:3 * H]
        tcs[t] = np.tanh(cs[t + 1])
        hs[t + 1] = a[:, 3 * H:] * tcs[t]
    return hs, cs, acts, tcs


def _layer_backward(layer: LstmLayerParams, X, cache, dH):
    hs, cs, acts, tcs = cache
    T, B, D = X.shape
    H = layer.hidden_size
    W_hh = layer.W_hh
    dZ = np.empty((T, B, 4 * H))
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        a = acts[t]
        i, f, g, o = a[:, :H], a[:, H:2 * H], a[:, 2 * H:3 * H], a[:, 3 * H:]
        tc = tcs[t]
        dh = dH[t] + dh_next
        dc = dh * o * (1.0 - tc * tc) + dc_next
        dz = dZ[t]
        dz[:, :H] = dc * g * i * (1.0 - i)
        dz[:, H:2 * H] = dc * cs[t] * f * (1.0 - f)
        dz[:, 2 * H:3 * H] = dc * i * (1.0 - g * g)
        dz[:, 3 * H:] = dh * tc * o * (1.0 - o)
        dh_next = dz @ W_hh
        dc_next = dc * f
    flat = dZ.reshape(T * B, 4 * H)
    grads = {
        "W_ih": flat.T @ X.reshape(T * B, D),
        "W_hh": flat.T @ hs[:-1].reshape(T * B, H),
        "b": flat.sum(axis=0),
    }
    return grads, dZ @ layer.W_ih


def _as_batch(inputs, dim: int):
    X = np.asarray(inputs, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, dim)
    single = X.ndim == 2
    if single:
        X = X[:, None, :]
    if X.ndim != 3 or X.shape[2] != dim:
        raise ValueError(f"expected inputs with feature size {dim}, got shape {np.shape(inputs)}")
    return X, single


def _state_for(model: SeqModel, state, B: int, single: bool):
    if state is None:
        return model.zero_state(B)
    out = []
    for (h, c), H in zip(state, model.hidden_sizes):
        h = np.asarray(h, float).reshape(B, H)
        c = np.asarray(c, float).reshape(B, H)
        out.append((h, c))
    return out


def _run(model: SeqModel, X, state):
    caches = []
    final = []
    inp = model.input_norm.normalize(X)
    layer_inputs = []
    for layer, (h0, c0) in zip(model.layers, state):
        layer_inputs.append(inp)
        cache = _layer_forward(layer, inp, h0, c0)
        caches.append(cache)
        final.append((cache[0][-1], cache[1][-1]))
        inp = cache[0][1:]
    y_norm = inp @ model.head_W.T + model.head_b
    return model.output_norm.denormalize(y_norm), caches, layer_inputs, final


def forward(model: SeqModel, inputs, initial_state=None):
    """Unroll both layers over ``inputs`` and return ``(outputs, final_state)``.

    ``final_state`` is a list of ``(h, c)`` per layer and can be passed back as
    ``initial_state`` to continue the same sequence.
    """
    X, single = _as_batch(inputs, model.input_size)
    T, B, _ = X.shape
    state = _state_for(model, initial_state, B, single)
    if T == 0:
        outputs = np.zeros((0, model.output_size) if single else (0, B, model.output_size))
        if single:
            state = [(h[0], c[0]) for h, c in state]
        return outputs, state
    Y, _, _, final = _run(model, X, state)
    if single:
        return Y[:, 0, :], [(h[0], c[0]) for h, c in final]
    return Y, final


def step(model: SeqModel, x, state):
    """Single time step for one sequence; returns ``(y, new_state)``."""
    inp = model.input_norm.normalize(np.asarray(x, float))
    new_state = []
    for layer, (h, c) in zip(model.layers, state):
        h, c = lstm_step(layer, inp, h, c)
        new_state.append((h, c))
        inp = h
    y = model.output_norm.denormalize(inp @ model.head_W.T + model.head_b)
    return y, new_state


def backward(model: SeqModel, inputs, targets, mask=None, initial_state=None):
    """Masked MSE loss and its gradient with respect to all trainable parameters.

    ``loss = sum_k mask[k] * ||y_hat[k] - y[k]||^2 / (sum_k mask[k] * output_dim)``;
    gradients come from full backpropagation through time.
    """
    X, single = _as_batch(inputs, model.input_size)
    T, B, _ = X.shape
    O = model.output_size
    Yt = np.asarray(targets, float)
    if single:
        Yt = Yt.reshape(T, 1, O)
    Yt = Yt.reshape(T, B, O)
    if mask is None:
        M = np.ones((T, B))
    else:
        M = np.asarray(mask, float).reshape(T, B)
    denom = M.sum() * O
    if denom <= 0:
        raise ValueError("mask selects no time steps")
    state = _state_for(model, initial_state, B, single)
    Y, caches, layer_inputs, _ = _run(model, X, state)
    diff = (Y - Yt) * M[:, :, None]
    loss = float(np.sum(diff * (Y - Yt)) / denom)

    dY_norm = (2.0 / denom) * diff * model.output_norm.std
    h_top = caches[-1][0][1:]
    H = h_top.shape[-1]
    grads = {
        "head.W": dY_norm.reshape(T * B, O).T @ h_top.reshape(T * B, H),
        "head.b": dY_norm.sum(axis=(0, 1)),
    }
    dH = dY_norm @ model.head_W
    for k in range(len(model.layers) - 1, -1, -1):
        g, dH = _layer_backward(model.layers[k], layer_inputs[k], caches[k], dH)
        for name, val in g.items():
            grads[f"l{k}.{name}"] = val
    return loss, grads


@dataclass
class AdamState:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(state: AdamState, params: dict, grads: dict):
    """Bias-corrected Adam update, applied to ``params`` in place."""
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {name} {p.shape}")
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m, v = state.m[name], state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= state.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params, state


# --------------------------------------------------------------------------
# checkpoints


def model_to_dict(model: SeqModel) -> dict:
    return {
        "input_size": model.input_size,
        "hidden_sizes": list(model.hidden_sizes),
        "output_size": model.output_size,
        "input_norm": {"mean": model.input_norm.mean.tolist(), "std": model.input_norm.std.tolist()},
        "output_norm": {"mean": model.output_norm.mean.tolist(), "std": model.output_norm.std.tolist()},
        "params": {name: arr.tolist() for name, arr in model.params().items()},
    }


def model_from_dict(d: dict) -> SeqModel:
    p = {k: np.asarray(v, dtype=float) for k, v in d["params"].items()}
    layers = [LstmLayerParams(p[f"l{k}.W_ih"], p[f"l{k}.W_hh"], p[f"l{k}.b"]) for k in range(2)]
    return SeqModel(
        layers, p["head.W"], p["head.b"],
        Normalizer(np.asarray(d["input_norm"]["mean"]), np.asarray(d["input_norm"]["std"])),
        Normalizer(np.asarray(d["output_norm"]["mean"]), np.asarray(d["output_norm"]["std"])),
    )


def save_checkpoint(model: SeqModel, path, meta: dict | None = None) -> None:
    """JSON checkpoint; floats are written with round-trip precision."""
    doc = {"format": CHECKPOINT_FORMAT, "meta": meta or {}, "model": model_to_dict(model)}
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n", encoding="utf-8", newline="\n")


def load_checkpoint(path) -> tuple[SeqModel, dict]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: unsupported checkpoint format {doc.get('format')!r}")
    return model_from_dict(doc["model"]), doc.get("meta", {})
