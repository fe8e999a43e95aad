"""Uniform scoring interface and the model serialization envelope."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from ..data import Scaler

FORMAT_NAME = "lsmkit-model"
FORMAT_VERSION = 1

_REGISTRY: dict = {}


def register(kind):
    """Class decorator adding an estimator to the serialization registry."""
    def deco(cls):
        cls.kind = kind
        _REGISTRY[kind] = cls
        return cls
    return deco


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def check_binary(y):
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError("labels must be one-dimensional")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0 or 1")
    if y.min() == y.max():
        raise ValueError("training labels contain a single class")
    return y.astype(np.float64)


def as_2d(X, n_features):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != n_features:
        raise ValueError(f"expected {n_features} factors per sample, got shape {X.shape}")
    return X


def _encode(v):
    if isinstance(v, np.ndarray):
        return {"__array__": v.tolist(), "dtype": str(v.dtype), "shape": list(v.shape)}
    if isinstance(v, dict):
        return {k: _encode(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_encode(x) for x in v]
    if isinstance(v, np.generic):
        return v.item()
    return v


def _decode(v):
    if isinstance(v, dict):
        if "__array__" in v:
            return np.array(v["__array__"], dtype=v["dtype"]).reshape(v["shape"])
        return {k: _decode(x) for k, x in v.items()}
    if isinstance(v, list):
        return [_decode(x) for x in v]
    return v


@dataclass(frozen=True, eq=False)
class TrainedModel:
    """A fitted estimator with its factor order and optional input scaler.

    ``predict_proba`` takes rows in the original (unscaled) factor units when
    a scaler is attached.
    """

    estimator: object
    factors: tuple
    scaler: Scaler | None = None

    @property
    def kind(self) -> str:
        return self.estimator.kind

    def predict_proba(self, X) -> np.ndarray:
        X = as_2d(X, len(self.factors))
        if self.scaler is not None:
            X = self.scaler.transform(X)
        return self.estimator.predict_proba(X)

    def to_dict(self):
        return {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "kind": self.kind,
            "factors": list(self.factors),
            "scaler": None if self.scaler is None else self.scaler.to_dict(),
            "params": _encode(self.estimator.get_params()),
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != FORMAT_NAME:
            raise ValueError("not a serialized lsmkit model")
        if d.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {d.get('version')}")
        est_cls = _REGISTRY.get(d["kind"])
        if est_cls is None:
            raise ValueError(f"unknown model kind {d['kind']!r}")
        scaler = None if d["scaler"] is None else Scaler.from_dict(d["scaler"])
        return cls(est_cls.from_params(_decode(d["params"])), tuple(d["factors"]), scaler)


def predict(model, sample) -> np.ndarray | float:
    """Score one sample (returns a float) or a batch of rows (returns an array)."""
    arr = np.asarray(sample, dtype=np.float64)
    scores = model.predict_proba(arr)
    return float(scores[0]) if arr.ndim == 1 else scores


def save_model(model: TrainedModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_dict(), fh, sort_keys=True)
        fh.write("\n")


def load_model(path) -> TrainedModel:
    try:
        with open(path, encoding="utf-8") as fh:
            return TrainedModel.from_dict(json.load(fh))
    except OSError as exc:
        raise OSError(f"cannot read model file {os.fspath(path)}: {exc}") from exc
