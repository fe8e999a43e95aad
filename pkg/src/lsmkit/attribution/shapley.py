"""Interventional Shapley values: exact subset enumeration and permutation sampling.

The value of a coalition S is the model's mean output over the background
rows with the factors in S set to the explained instance's values.
"""
from __future__ import annotations

from math import factorial

import numpy as np

from .core import Attribution, as_rows, factor_names, model_name, scorer

MAX_EXACT_FACTORS = 20
_EVAL_ROWS = 200_000


def _check(x, bg):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != bg.shape[1]:
        raise ValueError(f"instance has shape {x.shape}; background rows have {bg.shape[1]} factors")
    return x


def coalition_values(model, background, x) -> np.ndarray:
    """v(S) for every coalition, indexed by bitmask (bit i set = factor i present)."""
    bg = as_rows(background)
    x = _check(x, bg)
    score = scorer(model)
    f, B = len(x), len(bg)
    masks = np.arange(2 ** f, dtype=np.int64)
    bits = ((masks[:, None] >> np.arange(f)) & 1).astype(bool)
    values = np.empty(len(masks))
    step = max(1, _EVAL_ROWS // B)
    for start in range(0, len(masks), step):
        present = bits[start:start + step]
        rows = np.where(present[:, None, :], x, bg[None, :, :]).reshape(-1, f)
        values[start:start + step] = score(rows).reshape(len(present), B).mean(axis=1)
    return values


def shapley_from_values(values, f) -> np.ndarray:
    masks = np.arange(2 ** f, dtype=np.int64)
    size = np.zeros(len(masks), dtype=np.int64)
    for i in range(f):
        size += (masks >> i) & 1
    weight = np.array([factorial(s) * factorial(f - s - 1) / factorial(f) for s in range(f)])
    phi = np.empty(f)
    for i in range(f):
        bit = 1 << i
        without = masks[(masks & bit) == 0]
        phi[i] = float(np.sum(weight[size[without]] * (values[without | bit] - values[without])))
    return phi


def shapley_exact(model, background, x, *, factors=None, model_id=None, instance_id="") -> Attribution:
    """Exact Shapley values by enumerating all 2^f coalitions (f <= 20)."""
    f = as_rows(background).shape[1]
    if f > MAX_EXACT_FACTORS:
        raise ValueError(f"exact enumeration is limited to {MAX_EXACT_FACTORS} factors (got {f}); "
                         "use shapley_sampled")
    values = coalition_values(model, background, x)
    phi = shapley_from_values(values, f)
    return Attribution(factor_names(model, f, factors), phi, float(values[0]), "Shapley-exact",
                       model_name(model, model_id), instance_id, None, float(values[-1]))


def shapley_sampled(model, background, x, n_permutations, seed, *, factors=None, model_id=None,
                    instance_id="") -> Attribution:
    """Monte Carlo Shapley values from random factor orderings.

    Each permutation pairs with one uniformly drawn background row; factors
    switch from the background row to the instance in permutation order and
    each switch credits the change in output to the switched factor.
    """
    if n_permutations < 1:
        raise ValueError("n_permutations must be >= 1")
    bg = as_rows(background)
    x = _check(x, bg)
    score = scorer(model)
    f = len(x)
    rng = np.random.default_rng(seed)
    perms = np.argsort(rng.random((n_permutations, f)), axis=1)
    picks = rng.integers(0, len(bg), n_permutations)
    total = np.zeros(f)
    step = max(1, _EVAL_ROWS // (f + 1))
    for start in range(0, n_permutations, step):
        P = perms[start:start + step]
        m = len(P)
        # switched[p, k, j]: factor j already taken from x after k switches
        rank = np.empty_like(P)
        np.put_along_axis(rank, P, np.arange(f)[None, :], axis=1)
        switched = rank[:, None, :] < np.arange(f + 1)[None, :, None]
        rows = np.where(switched, x, bg[picks[start:start + step]][:, None, :]).reshape(-1, f)
        out = score(rows).reshape(m, f + 1)
        gains = np.diff(out, axis=1)  # gain of the k-th switched factor
        np.add.at(total, P.ravel(), gains.ravel())
    phi = total / n_permutations
    baseline = float(np.mean(score(bg)))
    return Attribution(factor_names(model, f, factors), phi, baseline, "Shapley-sampled",
                       model_name(model, model_id), instance_id, int(seed), float(score(x[None, :])[0]))
