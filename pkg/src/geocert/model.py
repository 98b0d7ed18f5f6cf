"""Classifier contract and the built-in ReLU MLP.

The MLP keeps weights as ``(fan_in, fan_out)`` matrices so a batch ``X`` of
shape ``(n, d)`` maps to logits ``X @ W + b``. Input gradients come from a
hand-written backward pass, which is what the "full" derivative mode needs.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, runtime_checkable

import numpy as np

from .data import Dataset

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "geocert-mlp"
CHECKPOINT_VERSION = 1


@runtime_checkable
class Classifier(Protocol):
    n_classes: int
    dim: int

    def forward(self, X: np.ndarray) -> np.ndarray: ...


@runtime_checkable
class DifferentiableClassifier(Classifier, Protocol):
    def input_gradient(self, X: np.ndarray, seed: np.ndarray) -> np.ndarray: ...


class CapabilityError(TypeError):
    """The model cannot provide input gradients."""


@dataclass
class MlpParams:
    layer_dims: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "relu"

    def __post_init__(self):
        self.layer_dims = [int(v) for v in self.layer_dims]
        if len(self.layer_dims) < 2 or min(self.layer_dims) < 1:
            raise ValueError("layer_dims needs an input and an output width")
        if self.layer_dims[-1] < 2:
            raise ValueError("need at least two classes")
        if self.activation != "relu":
            raise ValueError("only the rectifier activation is supported")
        if len(self.weights) != len(self.layer_dims) - 1 or len(self.biases) != len(self.weights):
            raise ValueError("one weight matrix and bias per layer")
        self.weights = [np.asarray(w, dtype=float) for w in self.weights]
        self.biases = [np.asarray(b, dtype=float) for b in self.biases]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            shape = (self.layer_dims[i], self.layer_dims[i + 1])
            if w.shape != shape or b.shape != (shape[1],):
                raise ValueError(f"layer {i}: expected weight {shape}, got {w.shape}")

    @property
    def dim(self) -> int:
        return self.layer_dims[0]

    @property
    def n_classes(self) -> int:
        return self.layer_dims[-1]

    @classmethod
    def init(cls, layer_dims, rng: np.random.Generator) -> "MlpParams":
        """Glorot-uniform weights, zero biases."""
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(list(layer_dims), weights, biases)

    def _check(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.dim:
            raise ValueError(f"input has dimension {X.shape[-1]}, model expects {self.dim}")
        return X

    def _forward_cache(self, X):
        pre = []
        h = X
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            pre.append(z)
            h = z if i == last else np.maximum(z, 0.0)
        return h, pre

    def forward(self, X) -> np.ndarray:
        X = self._check(X)
        return self._forward_cache(X)[0]

    def input_gradient(self, X, seed) -> np.ndarray:
        """Gradient of ``seed . logits`` with respect to the input, row by row."""
        X = self._check(X)
        seed = np.asarray(seed, dtype=float)
        if seed.shape[-1] != self.n_classes:
            raise ValueError("seed vector length must equal the class count")
        _, pre = self._forward_cache(X)
        grad = seed
        for i in range(len(self.weights) - 1, -1, -1):
            if i < len(self.weights) - 1:
                grad = grad * (pre[i] > 0.0)
            grad = grad @ self.weights[i].T
        return grad

    def copy(self) -> "MlpParams":
        return MlpParams(list(self.layer_dims), [w.copy() for w in self.weights],
                         [b.copy() for b in self.biases], self.activation)


def mlp_forward(params: MlpParams, x) -> np.ndarray:
    return params.forward(x)


def mlp_input_gradient(params: MlpParams, x, seed_vector) -> np.ndarray:
    return params.input_gradient(x, seed_vector)


def input_gradient(model, X, seed) -> np.ndarray:
    """Dispatch to the model's input-gradient capability, if it has one."""
    fn = getattr(model, "input_gradient", None)
    if fn is None:
        raise CapabilityError(f"{type(model).__name__} does not expose input gradients")
    return fn(X, seed)


@dataclass
class TrainConfig:
    epochs: int = 60
    batch_size: int = 32
    learning_rate: float = 0.1
    sigma_train: float = 0.25
    seed: int = 0
    hidden: tuple[int, ...] = field(default=(32, 32))

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")
        if self.learning_rate <= 0 or self.sigma_train < 0:
            raise ValueError("learning_rate must be positive, sigma_train non-negative")


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _cross_entropy_step(params: MlpParams, X, y, lr):
    """One gradient-descent step on mean cross-entropy; returns the loss."""
    logits, pre = params._forward_cache(X)
    probs = _softmax(logits)
    n = X.shape[0]
    loss = -float(np.mean(np.log(probs[np.arange(n), y] + 1e-300)))
    grad = probs
    grad[np.arange(n), y] -= 1.0
    grad /= n
    acts = [X] + [np.maximum(z, 0.0) for z in pre[:-1]]
    for i in range(len(params.weights) - 1, -1, -1):
        gw = acts[i].T @ grad
        gb = grad.sum(axis=0)
        if i > 0:
            grad = (grad @ params.weights[i].T) * (pre[i - 1] > 0.0)
        params.weights[i] -= lr * gw
        params.biases[i] -= lr * gb
    return loss


def train_noise_augmented(data: Dataset, cfg: TrainConfig, history: list | None = None) -> MlpParams:
    """Mini-batch gradient descent on cross-entropy of f(x + n), n ~ N(0, sigma_train^2 I).

    Each epoch draws one noise vector per example. ``history``, if given,
    receives the mean training loss of every epoch.
    """
    if len(data) == 0:
        raise ValueError("cannot train on an empty dataset")
    rng = np.random.default_rng(cfg.seed)
    dims = [data.dim, *cfg.hidden, data.n_classes]
    params = MlpParams.init(dims, rng)
    X, y = data.inputs, data.labels
    n = len(data)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        noisy = X + rng.normal(0.0, cfg.sigma_train, size=X.shape)
        losses = []
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            losses.append(_cross_entropy_step(params, noisy[idx], y[idx], cfg.learning_rate) * idx.size)
        epoch_loss = sum(losses) / n
        if history is not None:
            history.append(epoch_loss)
        log.debug("epoch %d loss %.5f", epoch, epoch_loss)
    return params


def accuracy(model: Classifier, data: Dataset) -> float:
    pred = np.argmax(model.forward(data.inputs), axis=1)
    return float(np.mean(pred == data.labels))


def save_checkpoint(params: MlpParams, path) -> None:
    """Write a JSON checkpoint: layer_dims plus row-major (fan_in, fan_out) weights."""
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "activation": params.activation,
        "layer_dims": params.layer_dims,
        "layers": [
            {"weight": [float(v) for v in w.ravel(order="C")], "bias": [float(v) for v in b]}
            for w, b in zip(params.weights, params.biases)
        ],
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, separators=(",", ":")) + "\n")


def load_checkpoint(path) -> MlpParams:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not a {CHECKPOINT_FORMAT} checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {doc.get('version')!r}")
    dims = doc["layer_dims"]
    weights, biases = [], []
    for i, layer in enumerate(doc["layers"]):
        weights.append(np.array(layer["weight"], dtype=float).reshape(dims[i], dims[i + 1]))
        biases.append(np.array(layer["bias"], dtype=float))
    return MlpParams(dims, weights, biases, doc.get("activation", "relu"))
