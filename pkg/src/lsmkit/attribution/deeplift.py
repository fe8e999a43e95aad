"""Difference-from-reference attribution for the traced networks (Rescale rule)."""
from __future__ import annotations

import numpy as np

from ..learners.base import TrainedModel
from .core import Attribution, as_rows, factor_names, model_name


def deeplift(model, x, reference=None, *, background=None, output="probability", factors=None,
             model_id=None, instance_id="") -> Attribution:
    """Contributions C_i = m_i * (x_i - r_i) in the network's input space.

    ``reference`` is in the same units as ``x``; when omitted it is the mean
    of ``background`` in the network's (standardised) space. Contributions
    sum to output(x) - output(reference).
    """
    net = model.estimator if isinstance(model, TrainedModel) else model
    if not hasattr(net, "deeplift_multipliers"):
        raise TypeError(f"model kind {getattr(net, 'kind', type(net).__name__)!r} does not support DeepLIFT")
    scaler = model.scaler if isinstance(model, TrainedModel) else None
    to_net = scaler.transform if scaler is not None else (lambda A: A)
    xs = to_net(np.asarray(x, dtype=np.float64)[None, :])[0]
    if reference is not None:
        rs = to_net(np.asarray(reference, dtype=np.float64)[None, :])[0]
    elif background is not None:
        rs = to_net(as_rows(background)).mean(axis=0)
    else:
        raise ValueError("a reference or a background set is required")
    if rs.shape != xs.shape:
        raise ValueError(f"reference has {rs.shape[0]} factors, instance has {xs.shape[0]}")
    mult = net.deeplift_multipliers(xs, rs, output)
    phi = mult * (xs - rs)
    f_out = net.predict_proba if output == "probability" else net.decision_function
    base = float(f_out(rs[None, :])[0])
    value = float(f_out(xs[None, :])[0])
    return Attribution(factor_names(model, len(xs), factors), phi, base, "DeepLIFT", model_name(model, model_id),
                       instance_id, None, value)
