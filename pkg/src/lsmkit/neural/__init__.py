"""Small convolutional and recurrent classifiers with traceable forward passes."""
from __future__ import annotations

import numpy as np

from ..learners.base import TrainedModel, as_2d
from .cnn import CnnModel, train_cnn
from .common import ActivationTrace, LayerTrace
from .lstm import LstmModel, train_lstm


def _unwrap(model, sample):
    """(network, sample in network space) for a bare network or a wrapped one."""
    if isinstance(model, TrainedModel):
        x = as_2d(sample, len(model.factors))
        if model.scaler is not None:
            x = model.scaler.transform(x)
        return model.estimator, x
    return model, np.asarray(sample, dtype=np.float64)


def forward_with_trace(model, sample):
    """Score one sample and record every layer's activations.

    Returns (score, ActivationTrace); the score equals ``predict`` on the same sample.
    """
    net, x = _unwrap(model, sample)
    if not hasattr(net, "trace"):
        raise TypeError(f"model kind {getattr(net, 'kind', type(net).__name__)!r} has no activation trace")
    tr = net.trace(x)
    return tr.output, tr


def replay(model, trace: ActivationTrace) -> ActivationTrace:
    """Re-run the network on the trace's recorded input."""
    net = model.estimator if isinstance(model, TrainedModel) else model
    return net.trace(trace.input)


__all__ = ["CnnModel", "LstmModel", "ActivationTrace", "LayerTrace", "train_cnn", "train_lstm",
           "forward_with_trace", "replay"]
