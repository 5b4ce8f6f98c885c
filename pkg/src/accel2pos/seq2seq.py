"""Many-to-one, many-to-many and autoregressive position regressors, one model per axis.

All formulations predict the displacement from the known start position
``p0`` and add it back at inference time.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Sequence

import numpy as np

from .neural import (AdamState, Normalizer, SeqModel, adam_step, backward, forward,
                     init_model, step)
from .timeseries import AlignedPair, SampledSignal

__all__ = [
    "AXES",
    "FormulationConfig",
    "FormulationKind",
    "TrainingRun",
    "infer_autoregressive",
    "infer_many_to_many",
    "infer_many_to_one",
    "make_batch_m2m",
    "make_pairs_ar",
    "make_windows_m2o",
    "predict_axis",
    "predict_position",
    "search_hyperparams",
    "train",
    "train_on_pairs",
    "validation_loss",
]

AXES = ("x", "y", "z")


class FormulationKind(str, Enum):
    MANY_TO_ONE = "many_to_one"
    MANY_TO_MANY = "many_to_many"
    AUTOREGRESSIVE = "autoregressive"

    @classmethod
    def parse(cls, value) -> "FormulationKind":
        aliases = {"m2o": cls.MANY_TO_ONE, "m2m": cls.MANY_TO_MANY, "ar": cls.AUTOREGRESSIVE}
        if isinstance(value, str) and value in aliases:
            return aliases[value]
        return cls(value)


@dataclass(frozen=True)
class FormulationConfig:
    kind: FormulationKind = FormulationKind.MANY_TO_MANY
    axis: str = "x"
    window_len: int = 64
    epochs: int = 150
    batch_size: int = 4
    learning_rate: float = 2e-3
    hidden_size: int = 32
    seed: int = 0
    # many-to-one only: windows drawn per epoch (all windows if None)
    windows_per_epoch: int | None = 1024
    grad_clip: float | None = 1.0
    # autoregressive only: std (mm) of Gaussian noise added to the teacher-forced
    # previous-position input, redrawn every batch
    ar_input_noise_mm: float = 0.0
    # autoregressive only: the head predicts the increment over the previous
    # position, which is added back (a skip connection from that input)
    ar_residual: bool = True

    def __post_init__(self):
        object.__setattr__(self, "kind", FormulationKind.parse(self.kind))
        if self.axis not in AXES:
            raise ValueError(f"axis must be one of {AXES}, got {self.axis!r}")
        if self.kind is FormulationKind.MANY_TO_ONE and self.window_len < 2:
            raise ValueError("many-to-one needs window_len >= 2")
        if self.epochs < 0 or self.batch_size < 1 or self.hidden_size < 1:
            raise ValueError("epochs, batch_size and hidden_size must be positive")

    @property
    def axis_index(self) -> int:
        return AXES.index(self.axis)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FormulationConfig":
        return cls(**d)


@dataclass
class TrainingRun:
    config: FormulationConfig
    model: SeqModel
    loss_trace: list[float] = field(default_factory=list)
    val_loss: float | None = None


# --------------------------------------------------------------------------
# dataset shaping


def _axis(axis) -> int:
    return AXES.index(axis) if isinstance(axis, str) else int(axis)


def make_windows_m2o(pair: AlignedPair, axis, window_len: int):
    """Stride-1 acceleration windows and the position at each window's last index.

    Returns ``(windows (M, W), targets (M,), target_index (M,))`` with
    ``M = N - W + 1``.
    """
    j = _axis(axis)
    a = pair.accel.data[:, j]
    p = pair.position.data[:, j]
    n = len(a)
    if window_len < 1 or n < window_len:
        raise ValueError(f"sequence of length {n} is shorter than window {window_len}")
    windows = np.lib.stride_tricks.sliding_window_view(a, window_len).copy()
    idx = np.arange(window_len - 1, n)
    return windows, p[idx].copy(), idx


def make_batch_m2m(pairs: Sequence[AlignedPair], axis, relative_to_p0: bool = False):
    """Zero-padded ``(T, B, 1)`` inputs/targets and a ``(T, B)`` mask of real steps."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("make_batch_m2m needs at least one sequence")
    j = _axis(axis)
    T = max(len(p) for p in pairs)
    B = len(pairs)
    X = np.zeros((T, B, 1))
    Y = np.zeros((T, B, 1))
    M = np.zeros((T, B))
    for b, pair in enumerate(pairs):
        n = len(pair)
        pos = pair.position.data[:, j]
        X[:n, b, 0] = pair.accel.data[:, j]
        Y[:n, b, 0] = pos - pos[0] if relative_to_p0 else pos
        M[:n, b] = 1.0
    return X, Y, M


def make_pairs_ar(pair: AlignedPair, axis, relative_to_p0: bool = False):
    """Teacher-forcing steps: input ``(a[k], p[k-1])``, target ``p[k]`` for k = 1..N-1."""
    j = _axis(axis)
    if len(pair) < 2:
        raise ValueError("autoregressive pairs need at least two samples")
    a = pair.accel.data[:, j]
    p = pair.position.data[:, j]
    if relative_to_p0:
        p = p - p[0]
    inputs = np.column_stack([a[1:], p[:-1]])
    return inputs, p[1:].copy()


def _left_pad(a: np.ndarray, n: int) -> np.ndarray:
    return np.concatenate([np.full(n, a[0]), a])


def _m2o_windows_padded(a: np.ndarray, window_len: int) -> np.ndarray:
    """One window ending at every sample; the head is padded with the first value."""
    return np.lib.stride_tricks.sliding_window_view(_left_pad(a, window_len - 1), window_len)


# --------------------------------------------------------------------------
# inference


def _accel_axis(accel, axis) -> np.ndarray:
    if isinstance(accel, SampledSignal):
        return accel.data[:, _axis(axis)]
    return np.asarray(accel, dtype=float)


def infer_many_to_many(model: SeqModel, accel, axis, p0_component: float) -> np.ndarray:
    a = _accel_axis(accel, axis)
    y, _ = forward(model, a[:, None])
    return y[:, 0] + p0_component


def infer_many_to_one(model: SeqModel, accel, axis, p0_component: float, window_len: int,
                      chunk: int = 4096) -> np.ndarray:
    a = _accel_axis(accel, axis)
    windows = _m2o_windows_padded(a, window_len)
    out = np.empty(len(a))
    for s in range(0, len(a), chunk):
        w = windows[s:s + chunk]
        y, _ = forward(model, w.T[:, :, None])
        out[s:s + chunk] = y[-1, :, 0]
    return out + p0_component


def infer_autoregressive(model: SeqModel, accel, axis, p0_component: float,
                         teacher=None, residual: bool = True) -> np.ndarray:
    """Free-running recursion ``p[k] = f(a[k], p[k-1])`` with carried LSTM state.

    With ``residual`` the model output is an increment and ``f`` adds it to
    ``p[k-1]``. If ``teacher`` (true absolute positions) is given, the true
    previous position is fed instead of the prediction.
    """
    a = _accel_axis(accel, axis)
    n = len(a)
    rel = np.zeros(n)
    state = model.zero_state()
    prev = 0.0
    for k in range(1, n):
        y, state = step(model, np.array([a[k], prev]), state)
        rel[k] = y[0] + prev if residual else y[0]
        prev = rel[k] if teacher is None else teacher[k] - p0_component
    return rel + p0_component


def predict_axis(model: SeqModel, cfg: FormulationConfig, accel, p0_component: float) -> np.ndarray:
    if cfg.kind is FormulationKind.MANY_TO_ONE:
        return infer_many_to_one(model, accel, cfg.axis, p0_component, cfg.window_len)
    if cfg.kind is FormulationKind.MANY_TO_MANY:
        return infer_many_to_many(model, accel, cfg.axis, p0_component)
    return infer_autoregressive(model, accel, cfg.axis, p0_component, residual=cfg.ar_residual)


def predict_position(models: dict, accel: SampledSignal, p0_mm) -> SampledSignal:
    """Combine per-axis models ``{axis: (SeqModel, FormulationConfig)}`` into a 3D trajectory."""
    cols = [predict_axis(models[ax][0], models[ax][1], accel, float(p0_mm[i]))
            for i, ax in enumerate(AXES)]
    return SampledSignal(AXES, np.column_stack(cols), accel.sample_rate_hz, accel.t0_s, "mm")


# --------------------------------------------------------------------------
# training


def _sequences(pairs, cfg: FormulationConfig):
    """Per-sequence (inputs, targets) for the sequence-level formulations."""
    seqs = []
    for pair in pairs:
        if cfg.kind is FormulationKind.AUTOREGRESSIVE:
            x, y = make_pairs_ar(pair, cfg.axis, relative_to_p0=True)
            if cfg.ar_residual:
                y = y - x[:, 1]
        else:
            pos = pair.position.data[:, cfg.axis_index]
            x = pair.accel.data[:, cfg.axis_index][:, None]
            y = pos - pos[0]
        seqs.append((x, y[:, None]))
    return seqs


def _pad(seqs):
    T = max(len(x) for x, _ in seqs)
    B = len(seqs)
    D = seqs[0][0].shape[1]
    X = np.zeros((T, B, D))
    Y = np.zeros((T, B, 1))
    M = np.zeros((T, B))
    for b, (x, y) in enumerate(seqs):
        X[:len(x), b] = x
        Y[:len(y), b] = y
        M[:len(x), b] = 1.0
    return X, Y, M


def _clip(grads, max_norm):
    if max_norm is None:
        return grads
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if norm > max_norm:
        scale = max_norm / norm
        return {k: g * scale for k, g in grads.items()}
    return grads


def train_on_pairs(train_pairs: Sequence[AlignedPair], cfg: FormulationConfig,
                   val_pairs: Sequence[AlignedPair] | None = None) -> TrainingRun:
    """Train one axis model with Adam on MSE; normalization is fit on ``train_pairs`` only."""
    train_pairs = list(train_pairs)
    if not train_pairs:
        raise ValueError("training set is empty")
    rng = np.random.default_rng(cfg.seed)
    j = cfg.axis_index

    if cfg.kind is FormulationKind.MANY_TO_ONE:
        wins, targets = [], []
        for pair in train_pairs:
            a = pair.accel.data[:, j]
            pos = pair.position.data[:, j]
            wins.append(_m2o_windows_padded(a, cfg.window_len))
            targets.append(pos - pos[0])
        windows = np.concatenate(wins)
        targets = np.concatenate(targets)
        in_norm = Normalizer.fit(windows.reshape(-1, 1))
        out_norm = Normalizer.fit(targets[:, None])
        D = 1
    else:
        seqs = _sequences(train_pairs, cfg)
        in_norm = Normalizer.fit(np.concatenate([x for x, _ in seqs]))
        out_norm = Normalizer.fit(np.concatenate([y for _, y in seqs]))
        D = seqs[0][0].shape[1]

    model = init_model(D, cfg.hidden_size, 1, rng, in_norm, out_norm)
    params = model.params()
    opt = AdamState(learning_rate=cfg.learning_rate)
    trace = []

    for _ in range(cfg.epochs):
        losses, weights = [], []
        if cfg.kind is FormulationKind.MANY_TO_ONE:
            order = rng.permutation(len(windows))
            if cfg.windows_per_epoch is not None:
                order = order[:cfg.windows_per_epoch]
            bs = max(cfg.batch_size, 64)
            for s in range(0, len(order), bs):
                idx = order[s:s + bs]
                X = windows[idx].T[:, :, None]
                Y = np.zeros(X.shape)
                Y[-1, :, 0] = targets[idx]
                M = np.zeros(X.shape[:2])
                M[-1] = 1.0
                loss, grads = backward(model, X, Y, M)
                adam_step(opt, params, _clip(grads, cfg.grad_clip))
                losses.append(loss)
                weights.append(len(idx))
        else:
            order = rng.permutation(len(seqs))
            for s in range(0, len(order), cfg.batch_size):
                X, Y, M = _pad([seqs[i] for i in order[s:s + cfg.batch_size]])
                if cfg.kind is FormulationKind.AUTOREGRESSIVE and cfg.ar_input_noise_mm > 0:
                    eps = rng.normal(0.0, cfg.ar_input_noise_mm, X.shape[:2]) * M
                    X[:, :, 1] += eps
                    if cfg.ar_residual:
                        # the increment target must lead back to the true position
                        Y[:, :, 0] -= eps
                loss, grads = backward(model, X, Y, M)
                adam_step(opt, params, _clip(grads, cfg.grad_clip))
                losses.append(loss)
                weights.append(M.sum())
        trace.append(float(np.average(losses, weights=weights)))

    run = TrainingRun(cfg, model, trace)
    if val_pairs:
        run.val_loss = validation_loss(model, cfg, val_pairs)
    return run


def validation_loss(model: SeqModel, cfg: FormulationConfig, pairs: Sequence[AlignedPair]) -> float:
    """Mean squared axis error (mm^2) of the formulation's own inference procedure."""
    j = cfg.axis_index
    errs = []
    for pair in pairs:
        truth = pair.position.data[:, j]
        pred = predict_axis(model, cfg, pair.accel, truth[0])
        errs.append((pred - truth) ** 2)
    return float(np.mean(np.concatenate(errs)))


def train(dataset, cfg: FormulationConfig) -> TrainingRun:
    """Train on ``dataset.train`` (a :class:`~accel2pos.synthgen.ScenarioDataset`)."""
    pairs = dataset.train_pairs if hasattr(dataset, "train_pairs") else list(dataset)
    return train_on_pairs(pairs, cfg)


# --------------------------------------------------------------------------
# hyperparameter search

HIDDEN_CHOICES = (16, 32, 64, 128)
WINDOW_CHOICES = (16, 32, 64, 128)
LR_RANGE = (1e-4, 1e-2)


def _split_by_series(records):
    series = sorted({r.series_id for r in records})
    if len(series) < 2:
        raise ValueError("hyperparameter search needs at least two training series")
    held = series[-1]
    fit = [r.pair for r in records if r.series_id != held]
    val = [r.pair for r in records if r.series_id == held]
    return fit, val


def search_hyperparams(dataset, kind, budget: int, seed: int = 0, axis: str = "x",
                       base: FormulationConfig | None = None, return_history: bool = False):
    """Seeded random search selected by validation loss on a held-out training series.

    Candidate 0 is ``base`` (the default configuration); later candidates draw
    hidden size from {16, 32, 64, 128}, learning rate log-uniformly from
    [1e-4, 1e-2] and, for many-to-one, window length from {16, 32, 64, 128}.
    A larger budget only appends candidates, so the best loss is monotone.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    kind = FormulationKind.parse(kind)
    base = replace(base or FormulationConfig(), kind=kind, axis=axis)
    fit, val = _split_by_series(dataset.train)
    rng = np.random.default_rng(seed)
    lo, hi = (math.log10(v) for v in LR_RANGE)
    history = []
    best_cfg, best = None, math.inf
    for i in range(budget):
        if i == 0:
            cand = base
        else:
            cand = replace(
                base,
                hidden_size=int(rng.choice(HIDDEN_CHOICES)),
                learning_rate=float(10 ** rng.uniform(lo, hi)),
                window_len=int(rng.choice(WINDOW_CHOICES)) if kind is FormulationKind.MANY_TO_ONE
                else base.window_len,
            )
        loss = train_on_pairs(fit, cand, val).val_loss
        history.append((cand, loss))
        if loss < best:
            best_cfg, best = cand, loss
    if return_history:
        return best_cfg, history
    return best_cfg
