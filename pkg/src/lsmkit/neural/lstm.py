"""Single-layer LSTM classifier reading the factor vector as a one-channel sequence.

Per step t with scalar input x_t:
    i, f, o = sigmoid(x_t W + h U + b) for the three gates
    g = act(x_t W + h U + b) for the candidate
    c_t = f * c_{t-1} + i * g
    h_t = o * act(c_t)
The last hidden state passes through dropout (training only) and a dense
sigmoid head.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..learners.base import as_2d, register, sigmoid
from .common import (ACTIVATIONS, ActivationTrace, LayerTrace, NetworkConfig, bce, check_training_inputs,
                     glorot, resolve_activation, secant, sgd)


@register("lstm")
@dataclass(eq=False)
class LstmModel:
    W: np.ndarray        # (4H,) input weights, gate order i, f, o, g
    U: np.ndarray        # (H, 4H) recurrent weights
    b: np.ndarray        # (4H,)
    dense_w: np.ndarray  # (H,)
    dense_b: np.ndarray  # (1,)
    activation: str = "tanh"
    dropout: float = 0.0
    n_features: int = 0
    history: list = field(default_factory=list, repr=False)

    @property
    def units(self) -> int:
        return self.U.shape[0]

    def parameters(self):
        return {"W": self.W, "U": self.U, "b": self.b, "dense_w": self.dense_w, "dense_b": self.dense_b}

    def _forward(self, X, mask=None):
        act, _ = ACTIVATIONS[self.activation]
        n, H = len(X), self.units
        h = np.zeros((n, H))
        c = np.zeros((n, H))
        steps = []
        for t in range(self.n_features):
            z = X[:, t, None] * self.W + h @ self.U + self.b
            gates = sigmoid(z[:, :3 * H])
            g = act(z[:, 3 * H:])
            i, f, o = gates[:, :H], gates[:, H:2 * H], gates[:, 2 * H:]
            c_new = f * c + i * g
            phi = act(c_new)
            h_new = o * phi
            steps.append({"z": z, "i": i, "f": f, "o": o, "g": g, "c_prev": c, "c": c_new, "phi": phi,
                          "h_prev": h, "h": h_new})
            h, c = h_new, c_new
        hd = h if mask is None else h * mask
        logit = hd @ self.dense_w + self.dense_b[0]
        return logit, {"steps": steps, "hd": hd, "mask": mask, "X": X}

    def _bptt(self, cache, coefs, dlogit):
        """Backpropagate through time with supplied local coefficients.

        ``coefs[t]`` holds the gate slopes (dz: (n, 4H)), the cell activation
        slope (dphi) and the factors multiplying each product operand
        (f, c_prev, i, g, o, phi). For gradients these are the forward values
        and derivatives; for Rescale attribution they are secants and
        midpoint averages.
        """
        H = self.units
        steps = cache["steps"]
        X = cache["X"]
        n = len(dlogit)
        dh = dlogit[:, None] * self.dense_w[None, :]
        if cache["mask"] is not None:
            dh = dh * cache["mask"]
        dc = np.zeros((n, H))
        dW = np.zeros_like(self.W)
        dU = np.zeros_like(self.U)
        db = np.zeros_like(self.b)
        dX = np.zeros((n, self.n_features))
        for t in range(self.n_features - 1, -1, -1):
            k = coefs[t]
            d_o = dh * k["phi"]
            dc = dc + dh * k["o"] * k["dphi"]
            d_f = dc * k["c_prev"]
            d_i = dc * k["g"]
            d_g = dc * k["i"]
            dz = np.concatenate([d_i, d_f, d_o, d_g], axis=1) * k["dz"]
            dW += X[:, t] @ dz
            dU += steps[t]["h_prev"].T @ dz
            db += dz.sum(axis=0)
            dX[:, t] = dz @ self.W
            dh = dz @ self.U.T
            dc = dc * k["f"]
        grads = {"W": dW, "U": dU, "b": db, "dense_w": cache["hd"].T @ dlogit,
                 "dense_b": np.array([dlogit.sum()])}
        return grads, dX

    def _gradient_coefs(self, cache):
        _, act_grad = ACTIVATIONS[self.activation]
        H = self.units
        out = []
        for s in cache["steps"]:
            gates = np.concatenate([s["i"], s["f"], s["o"]], axis=1)
            dz = np.concatenate([gates * (1.0 - gates), act_grad(s["z"][:, 3 * H:])], axis=1)
            out.append({"dz": dz, "dphi": act_grad(s["c"]), "f": s["f"], "c_prev": s["c_prev"], "i": s["i"],
                        "g": s["g"], "o": s["o"], "phi": s["phi"]})
        return out

    def loss_and_grad(self, X, y, mask=None):
        """Mean cross-entropy and its gradient for every parameter."""
        X = as_2d(X, self.n_features)
        logit, cache = self._forward(X, mask)
        dlogit = (sigmoid(logit) - y) / len(y)
        grads, _ = self._bptt(cache, self._gradient_coefs(cache), dlogit)
        return bce(logit, y), grads

    def decision_function(self, X):
        return self._forward(as_2d(X, self.n_features))[0]

    def predict_proba(self, X):
        return sigmoid(self.decision_function(X))

    def trace(self, x) -> ActivationTrace:
        X = as_2d(x, self.n_features)
        if len(X) != 1:
            raise ValueError("trace takes a single sample")
        logit, cache = self._forward(X)
        layers = []
        for t, s in enumerate(cache["steps"]):
            post = np.concatenate([s["i"], s["f"], s["o"], s["g"]], axis=1)[0]
            layers.append(LayerTrace(f"step{t}.gates", s["z"][0], post))
            layers.append(LayerTrace(f"step{t}.cell", s["c"][0], s["h"][0]))
        layers.append(LayerTrace("dense", logit, sigmoid(logit)))
        return ActivationTrace(X[0].copy(), tuple(layers), float(sigmoid(logit)[0]))

    def deeplift_multipliers(self, x, reference, output="probability"):
        """Rescale-rule multipliers of the output difference with respect to each input.

        Gates and activations use the Rescale secant; each product a*b is split
        exactly as mean(a) * delta(b) + mean(b) * delta(a).
        """
        X = as_2d(x, self.n_features)
        R = as_2d(reference, self.n_features)
        lx, cx = self._forward(X)
        lr, cr = self._forward(R)
        H = self.units
        coefs = []
        for s, r in zip(cx["steps"], cr["steps"]):
            dz = np.concatenate([secant("sigmoid", s["z"][:, :3 * H], r["z"][:, :3 * H]),
                                 secant(self.activation, s["z"][:, 3 * H:], r["z"][:, 3 * H:])], axis=1)
            mid = {k: 0.5 * (s[k] + r[k]) for k in ("f", "c_prev", "i", "g", "o", "phi")}
            coefs.append({"dz": dz, "dphi": secant(self.activation, s["c"], r["c"]), **mid})
        if output == "probability":
            dlogit = secant("sigmoid", lx, lr)
        elif output == "logit":
            dlogit = np.ones(1)
        else:
            raise ValueError("output must be 'probability' or 'logit'")
        _, dX = self._bptt(cx, coefs, dlogit)
        return dX[0]

    def get_params(self):
        return {"W": self.W, "U": self.U, "b": self.b, "dense_w": self.dense_w, "dense_b": self.dense_b,
                "activation": self.activation, "dropout": self.dropout, "n_features": self.n_features}

    @classmethod
    def from_params(cls, p):
        p = dict(p)
        for k in ("W", "U", "b", "dense_w", "dense_b"):
            p[k] = np.asarray(p[k], dtype=np.float64)
        return cls(**p)


def train_lstm(X, y, *, units=100, dropout=0.2, activation="tanh", epochs=30, learning_rate=0.01,
               batch_size=32, momentum=0.9, forget_bias=1.0, seed=0) -> LstmModel:
    """Fit the recurrent classifier by minibatch momentum SGD on cross-entropy.

    The forget-gate bias starts at ``forget_bias`` so early factors survive
    the recurrence at initialisation; all other biases start at zero.
    """
    cfg = NetworkConfig(epochs, learning_rate, batch_size, momentum, dropout, seed)
    X, y = check_training_inputs(X, y, cfg)
    if units < 1:
        raise ValueError("units must be >= 1")
    act, _ = resolve_activation(activation)
    H = int(units)
    rng = np.random.default_rng(seed)
    b = np.zeros(4 * H)
    b[H:2 * H] = forget_bias
    model = LstmModel(glorot(rng, (4 * H,), 1, 4 * H), glorot(rng, (H, 4 * H), H, 4 * H), b,
                      glorot(rng, (H,), H, 1), np.zeros(1), act, float(dropout), X.shape[1])
    model.history = sgd(model, X, y, cfg, rng, lambda m: (m, H))
    return model
