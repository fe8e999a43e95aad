"""Activations, initialisation, traces and the momentum-SGD loop shared by the networks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..learners.base import check_binary, sigmoid

# Below this input difference a Rescale multiplier falls back to the gradient at the reference.
SECANT_EPS = 1e-10


def _relu(z):
    return np.maximum(z, 0.0)


def _relu_grad(z):
    return (z > 0).astype(np.float64)


def _elu(z):
    return np.where(z > 0, z, np.expm1(np.minimum(z, 0.0)))


def _elu_grad(z):
    return np.where(z > 0, 1.0, np.exp(np.minimum(z, 0.0)))


def _tanh_grad(z):
    t = np.tanh(z)
    return 1.0 - t * t


def _identity(z):
    return np.asarray(z, dtype=np.float64)


def _ones(z):
    return np.ones_like(z, dtype=np.float64)


def _sigmoid_grad(z):
    s = sigmoid(z)
    return s * (1.0 - s)


ACTIVATIONS = {
    "relu": (_relu, _relu_grad),
    "tanh": (np.tanh, _tanh_grad),
    "elu": (_elu, _elu_grad),
    "identity": (_identity, _ones),
    "sigmoid": (sigmoid, _sigmoid_grad),
}
ALIASES = {"linear": "identity"}


def resolve_activation(name):
    key = ALIASES.get(name, name)
    if key not in ACTIVATIONS:
        raise ValueError(f"unknown activation {name!r}; expected one of {sorted(ACTIVATIONS)}")
    return key, ACTIVATIONS[key]


def secant(name, z, z_ref):
    """Rescale multiplier (act(z) - act(z_ref)) / (z - z_ref), gradient at z_ref in the limit."""
    fn, grad = ACTIVATIONS[name]
    z = np.asarray(z, dtype=np.float64)
    z_ref = np.asarray(z_ref, dtype=np.float64)
    dz = z - z_ref
    small = np.abs(dz) < SECANT_EPS
    slope = (fn(z) - fn(z_ref)) / np.where(small, 1.0, dz)
    return np.where(small, grad(z_ref), slope)


def glorot(rng, shape, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def bce(logit, y):
    """Mean binary cross-entropy from logits."""
    return float(np.mean(np.logaddexp(0.0, logit) - y * logit))


@dataclass(frozen=True, eq=False)
class LayerTrace:
    name: str
    pre: np.ndarray
    post: np.ndarray


@dataclass(frozen=True, eq=False)
class ActivationTrace:
    """Per-layer activations of one forward pass in model (standardised) space.

    ``reference`` optionally holds the trace of the reference input used by
    difference-from-reference attribution.
    """

    input: np.ndarray
    layers: tuple
    output: float
    reference: "ActivationTrace | None" = None

    def layer(self, name) -> LayerTrace:
        for lt in self.layers:
            if lt.name == name:
                return lt
        raise KeyError(f"no layer named {name!r} in trace")

    @property
    def names(self) -> tuple:
        return tuple(lt.name for lt in self.layers)

    def with_reference(self, ref: "ActivationTrace") -> "ActivationTrace":
        if ref.names != self.names or any(a.post.shape != b.post.shape for a, b in zip(self.layers, ref.layers)):
            raise ValueError("reference trace does not match this trace's layer layout")
        return ActivationTrace(self.input, self.layers, self.output, ref)


@dataclass
class NetworkConfig:
    epochs: int = 30
    learning_rate: float = 0.01
    batch_size: int = 32
    momentum: float = 0.9
    dropout: float = 0.0
    seed: int = 0


def check_training_inputs(X, y, cfg: NetworkConfig):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("training rows must form a 2-D array")
    y = check_binary(y)
    if len(y) != len(X):
        raise ValueError("rows and labels differ in length")
    if not 0.0 <= cfg.dropout < 1.0:
        raise ValueError("dropout must lie in [0, 1)")
    if cfg.epochs < 1 or cfg.batch_size < 1:
        raise ValueError("epochs and batch_size must be >= 1")
    if not cfg.learning_rate > 0:
        raise ValueError("learning_rate must be positive")
    return X, y


def sgd(model, X, y, cfg: NetworkConfig, rng, mask_shape):
    """Minibatch momentum SGD on ``model.loss_and_grad``; records every batch loss.

    ``mask_shape(n)`` gives the dropout mask shape for a batch of n rows.
    """
    velocity = {k: np.zeros_like(v) for k, v in model.parameters().items()}
    keep = 1.0 - cfg.dropout
    n = len(X)
    history = []
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            mask = None
            if cfg.dropout > 0:
                mask = (rng.random(mask_shape(len(idx))) < keep) / keep
            loss, grads = model.loss_and_grad(X[idx], y[idx], mask)
            if not np.isfinite(loss):
                raise FloatingPointError("training loss became non-finite; lower the learning rate")
            history.append(loss)
            params = model.parameters()
            for k, g in grads.items():
                velocity[k] = cfg.momentum * velocity[k] - cfg.learning_rate * g
                params[k] += velocity[k]
    return history
