"""One-dimensional convolutional classifier over the ordered factor vector.

Layout: the factor vector is a length-f sequence with one channel.
conv (``filters`` kernels of width ``kernel_width``, valid padding) ->
activation -> max pool (non-overlapping windows of ``pool_width``;
0 pools the whole sequence) -> flatten -> dropout (training only) ->
dense -> sigmoid.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..learners.base import as_2d, register, sigmoid
from .common import (ACTIVATIONS, ActivationTrace, LayerTrace, NetworkConfig, bce, check_training_inputs,
                     glorot, resolve_activation, secant, sgd)


@register("cnn")
@dataclass(eq=False)
class CnnModel:
    conv_w: np.ndarray   # (filters, kernel_width)
    conv_b: np.ndarray   # (filters,)
    dense_w: np.ndarray  # (pooled_len * filters,), position-major
    dense_b: np.ndarray  # (1,)
    activation: str = "relu"
    pool_width: int = 2
    dropout: float = 0.0
    n_features: int = 0
    history: list = field(default_factory=list, repr=False)

    @property
    def filters(self) -> int:
        return self.conv_w.shape[0]

    @property
    def kernel_width(self) -> int:
        return self.conv_w.shape[1]

    def pool_shape(self):
        """(window width, pooled length) for the conv output length."""
        L = self.n_features - self.kernel_width + 1
        p = L if self.pool_width == 0 or self.pool_width > L else self.pool_width
        return p, L // p

    def parameters(self):
        return {"conv_w": self.conv_w, "conv_b": self.conv_b, "dense_w": self.dense_w, "dense_b": self.dense_b}

    # forward / backward

    def _forward(self, X, mask=None):
        fn, _ = ACTIVATIONS[self.activation]
        n = len(X)
        win = sliding_window_view(X, self.kernel_width, axis=1)  # (n, L, k)
        z = win @ self.conv_w.T + self.conv_b
        a = fn(z)
        p, P = self.pool_shape()
        blocks = a[:, :P * p, :].reshape(n, P, p, self.filters)
        h = blocks.max(axis=2).reshape(n, P * self.filters)
        hd = h if mask is None else h * mask
        logit = hd @ self.dense_w + self.dense_b[0]
        return logit, {"win": win, "z": z, "a": a, "blocks": blocks, "h": h, "hd": hd, "mask": mask}

    def _backward(self, cache, act_coef, route, dlogit):
        """Propagate ``dlogit`` given per-unit activation slopes and pool routing weights."""
        n = len(dlogit)
        p, P = self.pool_shape()
        F = self.filters
        dh = dlogit[:, None] * self.dense_w[None, :]
        if cache["mask"] is not None:
            dh = dh * cache["mask"]
        dblocks = route * dh.reshape(n, P, 1, F)
        da = np.zeros_like(cache["z"])
        da[:, :P * p, :] = dblocks.reshape(n, P * p, F)
        dz = da * act_coef
        L = dz.shape[1]
        dwin = dz @ self.conv_w  # (n, L, k)
        dX = np.zeros((n, self.n_features))
        for j in range(self.kernel_width):
            dX[:, j:j + L] += dwin[:, :, j]
        grads = {
            "conv_w": np.einsum("nlf,nlk->fk", dz, cache["win"]),
            "conv_b": dz.sum(axis=(0, 1)),
            "dense_w": cache["hd"].T @ dlogit,
            "dense_b": np.array([dlogit.sum()]),
        }
        return grads, dX

    def loss_and_grad(self, X, y, mask=None):
        """Mean cross-entropy and its gradient for every parameter."""
        X = as_2d(X, self.n_features)
        logit, cache = self._forward(X, mask)
        _, grad = ACTIVATIONS[self.activation]
        blocks = cache["blocks"]
        route = (np.arange(blocks.shape[2])[None, None, :, None]
                 == blocks.argmax(axis=2)[:, :, None, :]).astype(np.float64)
        dlogit = (sigmoid(logit) - y) / len(y)
        grads, _ = self._backward(cache, grad(cache["z"]), route, dlogit)
        return bce(logit, y), grads

    def decision_function(self, X):
        return self._forward(as_2d(X, self.n_features))[0]

    def predict_proba(self, X):
        return sigmoid(self.decision_function(X))

    def trace(self, x) -> ActivationTrace:
        X = as_2d(x, self.n_features)
        if len(X) != 1:
            raise ValueError("trace takes a single sample")
        logit, c = self._forward(X)
        p, P = self.pool_shape()
        layers = (
            LayerTrace("conv", c["z"][0], c["a"][0]),
            LayerTrace("pool", c["blocks"][0], c["h"][0].reshape(P, self.filters)),
            LayerTrace("dense", logit, sigmoid(logit)),
        )
        return ActivationTrace(X[0].copy(), layers, float(sigmoid(logit)[0]))

    def deeplift_multipliers(self, x, reference, output="probability"):
        """Rescale-rule multipliers of the output difference with respect to each input.

        Max pooling is written as m_k = m_{k-1} + relu(v_k - m_{k-1}) so every
        nonlinearity is elementwise and the Rescale rule applies to each one.
        """
        X = as_2d(x, self.n_features)
        R = as_2d(reference, self.n_features)
        lx, cx = self._forward(X)
        lr, cr = self._forward(R)
        act_coef = secant(self.activation, cx["z"], cr["z"])
        route = _pool_route(cx["blocks"], cr["blocks"])
        if output == "probability":
            dlogit = secant("sigmoid", lx, lr)
        elif output == "logit":
            dlogit = np.ones(1)
        else:
            raise ValueError("output must be 'probability' or 'logit'")
        _, dX = self._backward(cx, act_coef, route, dlogit)
        return dX[0]

    def get_params(self):
        return {"conv_w": self.conv_w, "conv_b": self.conv_b, "dense_w": self.dense_w, "dense_b": self.dense_b,
                "activation": self.activation, "pool_width": self.pool_width, "dropout": self.dropout,
                "n_features": self.n_features}

    @classmethod
    def from_params(cls, p):
        p = dict(p)
        for k in ("conv_w", "conv_b", "dense_w", "dense_b"):
            p[k] = np.asarray(p[k], dtype=np.float64)
        return cls(**p)


def _pool_route(blocks, blocks_ref):
    """Rescale weights of each pooled value on the window maximum, via the running-max chain."""
    p = blocks.shape[2]
    s = np.zeros_like(blocks)
    m, mr = blocks[:, :, 0, :], blocks_ref[:, :, 0, :]
    for k in range(1, p):
        d = blocks[:, :, k, :] - m
        dr = blocks_ref[:, :, k, :] - mr
        s[:, :, k, :] = secant("relu", d, dr)
        m = m + np.maximum(d, 0.0)
        mr = mr + np.maximum(dr, 0.0)
    route = np.empty_like(blocks)
    tail = np.ones_like(blocks[:, :, 0, :])
    for k in range(p - 1, 0, -1):
        route[:, :, k, :] = s[:, :, k, :] * tail
        tail = tail * (1.0 - s[:, :, k, :])
    route[:, :, 0, :] = tail
    return route


def train_cnn(X, y, *, filters=64, kernel_width=3, pool_width=2, dropout=0.2, activation="relu",
              epochs=30, learning_rate=0.01, batch_size=32, momentum=0.9, seed=0) -> CnnModel:
    """Fit the convolutional classifier by minibatch momentum SGD on cross-entropy."""
    cfg = NetworkConfig(epochs, learning_rate, batch_size, momentum, dropout, seed)
    X, y = check_training_inputs(X, y, cfg)
    f = X.shape[1]
    if kernel_width > f:
        raise ValueError(f"kernel width {kernel_width} exceeds the factor count {f}")
    if kernel_width < 1 or filters < 1 or pool_width < 0:
        raise ValueError("filters and kernel_width must be >= 1 and pool_width >= 0")
    act, _ = resolve_activation(activation)
    rng = np.random.default_rng(seed)
    conv_w = glorot(rng, (filters, kernel_width), kernel_width, kernel_width * filters)
    model = CnnModel(conv_w, np.zeros(filters), np.zeros(1), np.zeros(1), act, int(pool_width), float(dropout), f)
    _, P = model.pool_shape()
    model.dense_w = glorot(rng, (P * filters,), P * filters, 1)
    model.history = sgd(model, X, y, cfg, rng, lambda m: (m, P * filters))
    return model

