"""Small fully connected regressor trained with Adam on an L1 loss.

Inputs and outputs are z-scored with statistics fitted on the training
split; the loss is measured in normalized output units. Hidden layers use a
rectifier, the output layer is affine.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import DEFAULT_CONFIG, Config
from .errors import DomainError, FormatError

MODEL_FORMAT_VERSION = 1


@dataclass
class Normalizer:
    mean: np.ndarray
    scale: np.ndarray
    degenerate: np.ndarray  # bool mask of zero-variance dimensions

    @classmethod
    def fit(cls, data: np.ndarray) -> "Normalizer":
        mean = data.mean(axis=0)
        std = data.std(axis=0)
        degenerate = ~(std > 1e-12)
        scale = np.where(degenerate, 1.0, std)
        return cls(mean, scale, degenerate)

    def apply(self, data):
        return (np.asarray(data, dtype=float) - self.mean) / self.scale

    def invert(self, data):
        return np.asarray(data, dtype=float) * self.scale + self.mean


@dataclass
class MlpModel:
    layer_dims: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    input_norm: Normalizer
    output_norm: Normalizer
    meta: dict = field(default_factory=dict)

    @property
    def n_in(self) -> int:
        return self.layer_dims[0]

    @property
    def n_out(self) -> int:
        return self.layer_dims[-1]

    def __call__(self, x):
        return forward(self, x)

    def params(self) -> list[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]


def init_model(layer_dims, rng: np.random.Generator, input_norm=None, output_norm=None) -> MlpModel:
    """He-style uniform fan-in initialization, zero biases."""
    dims = [int(d) for d in layer_dims]
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    if input_norm is None:
        input_norm = Normalizer(np.zeros(dims[0]), np.ones(dims[0]), np.zeros(dims[0], bool))
    if output_norm is None:
        output_norm = Normalizer(np.zeros(dims[-1]), np.ones(dims[-1]), np.zeros(dims[-1], bool))
    return MlpModel(dims, weights, biases, input_norm, output_norm)


def _as_batch(model: MlpModel, x) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.ndim != 2 or arr.shape[1] != model.n_in:
        raise DomainError(f"model expects {model.n_in} inputs, got shape {np.shape(x)}")
    return arr, single


def _forward_normalized(model: MlpModel, xn: np.ndarray) -> list[np.ndarray]:
    acts = [xn]
    h = xn
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = h @ w + b
        h = z if i == last else np.maximum(z, 0.0)
        acts.append(h)
    return acts


def forward(model: MlpModel, x) -> np.ndarray:
    xb, single = _as_batch(model, x)
    out = model.output_norm.invert(_forward_normalized(model, model.input_norm.apply(xb))[-1])
    return out[0] if single else out


def loss(model: MlpModel, x, y_true) -> float:
    """Mean absolute error in normalized output units."""
    xb, _ = _as_batch(model, x)
    yn = model.output_norm.apply(np.atleast_2d(y_true))
    pred = _forward_normalized(model, model.input_norm.apply(xb))[-1]
    return float(np.mean(np.abs(pred - yn)))


def backward(model: MlpModel, x, y_true) -> tuple[float, list[np.ndarray]]:
    """Loss and its gradient for each parameter, ordered as ``model.params()``."""
    xb, _ = _as_batch(model, x)
    yn = model.output_norm.apply(np.atleast_2d(y_true))
    if yn.shape != (xb.shape[0], model.n_out):
        raise DomainError(f"targets must have shape {(xb.shape[0], model.n_out)}, got {yn.shape}")
    acts = _forward_normalized(model, model.input_norm.apply(xb))
    resid = acts[-1] - yn
    value = float(np.mean(np.abs(resid)))
    delta = np.sign(resid) / resid.size
    grads: list[np.ndarray] = []
    for i in range(len(model.weights) - 1, -1, -1):
        grads.append(delta.sum(axis=0))
        grads.append(acts[i].T @ delta)
        if i > 0:
            delta = (delta @ model.weights[i].T) * (acts[i] > 0)
    grads.reverse()
    # reversed order is [W0, b0, W1, b1, ...]
    return value, grads


def learning_rate(epoch: int, cfg: Config = DEFAULT_CONFIG) -> float:
    return cfg.lr0 * cfg.lr_decay ** (epoch // cfg.lr_step_epochs)


def split_by_group(groups, fraction: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Row indices for train and validation, holding out whole groups."""
    groups = np.asarray(groups)
    unique = np.unique(groups)
    n_val = int(round(fraction * len(unique)))
    if n_val == 0 or n_val >= len(unique):
        return np.arange(len(groups)), np.array([], dtype=int)
    held = rng.permutation(unique)[:n_val]
    is_val = np.isin(groups, held)
    return np.flatnonzero(~is_val), np.flatnonzero(is_val)


@dataclass
class TrainResult:
    model: MlpModel
    history: list[tuple[int, float, float, float]]  # epoch, lr, train loss, val loss
    train_index: np.ndarray
    val_index: np.ndarray


def train(x, y, cfg: Config = DEFAULT_CONFIG, seed: int = 0, groups=None) -> TrainResult:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 2 or y.ndim != 2 or len(x) != len(y):
        raise DomainError("x and y must be 2-D with the same number of rows")
    if len(x) < 2:
        raise DomainError("need at least 2 samples to train")
    rng = np.random.default_rng(seed)
    if groups is None:
        groups = np.arange(len(x))
    train_idx, val_idx = split_by_group(groups, cfg.val_fraction, rng)

    in_norm = Normalizer.fit(x[train_idx])
    out_norm = Normalizer.fit(y[train_idx])
    dims = [x.shape[1], *cfg.hidden_dims, y.shape[1]]
    model = init_model(dims, rng, in_norm, out_norm)
    model.meta["degenerate_inputs"] = np.flatnonzero(in_norm.degenerate).tolist()
    model.meta["degenerate_outputs"] = np.flatnonzero(out_norm.degenerate).tolist()

    params = model.params()
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    b1, b2, eps = 0.9, 0.999, 1e-8
    step = 0
    history = []
    xt, yt = x[train_idx], y[train_idx]
    for epoch in range(cfg.epochs):
        lr = learning_rate(epoch, cfg)
        order = rng.permutation(len(xt))
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            _, grads = backward(model, xt[batch], yt[batch])
            step += 1
            for p, g, mi, vi in zip(params, grads, m, v):
                mi *= b1
                mi += (1 - b1) * g
                vi *= b2
                vi += (1 - b2) * g * g
                m_hat = mi / (1 - b1**step)
                v_hat = vi / (1 - b2**step)
                p -= lr * m_hat / (np.sqrt(v_hat) + eps)
        train_loss = loss(model, xt, yt)
        val_loss = loss(model, x[val_idx], y[val_idx]) if len(val_idx) else float("nan")
        history.append((epoch + 1, lr, train_loss, val_loss))
    return TrainResult(model, history, train_idx, val_idx)


def write_history_csv(history, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "learning_rate", "train_loss", "val_loss"])
        for row in history:
            w.writerow([row[0], *(repr(float(v)) for v in row[1:])])


def _norm_to_json(norm: Normalizer) -> dict:
    return {"mean": norm.mean.tolist(), "scale": norm.scale.tolist(), "degenerate": norm.degenerate.tolist()}


def _norm_from_json(data: dict) -> Normalizer:
    scale = np.array(data["scale"], dtype=float)
    if np.any(scale <= 0):
        raise FormatError("normalization scales must be positive")
    return Normalizer(np.array(data["mean"], dtype=float), scale, np.array(data["degenerate"], dtype=bool))


def save_model(model: MlpModel, path: str | Path) -> None:
    payload = {
        "format_version": MODEL_FORMAT_VERSION,
        "layer_dims": model.layer_dims,
        "meta": model.meta,
        "input_norm": _norm_to_json(model.input_norm),
        "output_norm": _norm_to_json(model.output_norm),
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
    }
    Path(path).write_text(json.dumps(payload) + "\n")


def load_model(path: str | Path) -> MlpModel:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: malformed model JSON ({exc})") from exc
    if not isinstance(data, dict) or data.get("format_version") != MODEL_FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported model format_version {data.get('format_version')!r}")
    try:
        dims = [int(d) for d in data["layer_dims"]]
        weights = [np.array(w, dtype=float).reshape(a, b) for w, a, b in zip(data["weights"], dims[:-1], dims[1:])]
        biases = [np.array(b, dtype=float).reshape(n) for b, n in zip(data["biases"], dims[1:])]
        model = MlpModel(
            dims, weights, biases,
            _norm_from_json(data["input_norm"]), _norm_from_json(data["output_norm"]),
            dict(data.get("meta", {})),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise FormatError(f"{path}: invalid model file ({exc})") from exc
    if len(weights) != len(dims) - 1 or len(biases) != len(dims) - 1:
        raise FormatError(f"{path}: layer count does not match layer_dims")
    return model
