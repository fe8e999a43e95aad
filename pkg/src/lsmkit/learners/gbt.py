"""Regularised gradient-boosted trees on the logistic loss.

Each tree is grown greedily with an exact sorted scan over every factor.
Leaves take the second-order weight w = -G / (H + lambda); a split is kept
only when its gain exceeds ``gamma``. Every tree added must not increase the
penalised training objective
``sum(log-loss) + sum_k (gamma * T_k + 0.5 * lambda * sum(leaf_output^2))``;
boosting stops at the first tree that would.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .base import as_2d, check_binary, register, sigmoid


@dataclass(eq=False)
class Tree:
    feature: np.ndarray    # -1 marks a leaf
    threshold: np.ndarray  # go left when x < threshold
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray      # leaf weight w_j before shrinkage

    @property
    def n_leaves(self) -> int:
        return int((self.feature < 0).sum())

    @property
    def depth(self) -> int:
        depth = np.zeros(len(self.feature), dtype=np.int64)
        for node in range(len(self.feature)):
            if self.feature[node] >= 0:
                depth[self.left[node]] = depth[node] + 1
                depth[self.right[node]] = depth[node] + 1
        return int(depth.max())

    def leaf_values(self) -> np.ndarray:
        return self.value[self.feature < 0]

    def apply(self, X) -> np.ndarray:
        """Leaf node index reached by each row."""
        node = np.zeros(len(X), dtype=np.int64)
        while True:
            feat = self.feature[node]
            inner = feat >= 0
            if not inner.any():
                return node
            rows = np.flatnonzero(inner)
            go_left = X[rows, feat[rows]] < self.threshold[node[rows]]
            node[rows] = np.where(go_left, self.left[node[rows]], self.right[node[rows]])

    def predict(self, X) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_dict(self):
        return {k: getattr(self, k) for k in ("feature", "threshold", "left", "right", "value")}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["feature"], dtype=np.int64), np.asarray(d["threshold"], dtype=np.float64),
                   np.asarray(d["left"], dtype=np.int64), np.asarray(d["right"], dtype=np.int64),
                   np.asarray(d["value"], dtype=np.float64))


class _Builder:
    def __init__(self, X, g, h, max_depth, reg_lambda, gamma, min_child_weight):
        self.X, self.g, self.h = X, g, h
        self.max_depth = max_depth
        self.lam = reg_lambda
        self.gamma = gamma
        self.mcw = min_child_weight
        self.feature, self.threshold, self.left, self.right, self.value = [], [], [], [], []

    def _new_node(self):
        for lst, v in ((self.feature, -1), (self.threshold, 0.0), (self.left, -1), (self.right, -1), (self.value, 0.0)):
            lst.append(v)
        return len(self.feature) - 1

    def _best_split(self, idx, G, H):
        parent = G * G / (H + self.lam)
        best = (0.0, -1, 0.0)
        gi, hi = self.g[idx], self.h[idx]
        for feat in range(self.X.shape[1]):
            xs = self.X[idx, feat]
            order = np.argsort(xs, kind="stable")
            xs_s = xs[order]
            distinct = xs_s[:-1] < xs_s[1:]
            if not distinct.any():
                continue
            GL = np.cumsum(gi[order])[:-1]
            HL = np.cumsum(hi[order])[:-1]
            GR = G - GL
            HR = H - HL
            ok = distinct & (HL >= self.mcw) & (HR >= self.mcw)
            if not ok.any():
                continue
            gain = 0.5 * (GL * GL / (HL + self.lam) + GR * GR / (HR + self.lam) - parent) - self.gamma
            gain = np.where(ok, gain, -np.inf)
            k = int(np.argmax(gain))
            if gain[k] > best[0]:
                lo, hi_v = xs_s[k], xs_s[k + 1]
                thr = lo + (hi_v - lo) / 2.0
                if not lo < thr <= hi_v:
                    thr = hi_v
                best = (float(gain[k]), feat, float(thr))
        return best

    def build(self, idx, depth):
        node = self._new_node()
        G = float(self.g[idx].sum())
        H = float(self.h[idx].sum())
        if depth < self.max_depth and len(idx) >= 2:
            gain, feat, thr = self._best_split(idx, G, H)
            if feat >= 0:
                go_left = self.X[idx, feat] < thr
                self.feature[node] = feat
                self.threshold[node] = thr
                left = self.build(idx[go_left], depth + 1)
                right = self.build(idx[~go_left], depth + 1)
                self.left[node] = left
                self.right[node] = right
                return node
        self.value[node] = -G / (H + self.lam)
        return node

    def tree(self):
        return Tree(np.array(self.feature, dtype=np.int64), np.array(self.threshold, dtype=np.float64),
                    np.array(self.left, dtype=np.int64), np.array(self.right, dtype=np.int64),
                    np.array(self.value, dtype=np.float64))


@register("gbt")
@dataclass(eq=False)
class TreeEnsemble:
    trees: list = field(default_factory=list)
    learning_rate: float = 0.1
    reg_lambda: float = 1.0
    gamma: float = 0.0
    max_depth: int = 3
    base_score: float = 0.0  # log-odds
    n_features: int = 0
    objective_trace: list = field(default_factory=list)

    def decision_function(self, X):
        X = as_2d(X, self.n_features)
        out = np.full(len(X), self.base_score)
        for tree in self.trees:
            out += self.learning_rate * tree.predict(X)
        return out

    def predict_proba(self, X):
        return sigmoid(self.decision_function(X))

    def get_params(self):
        return {"trees": [t.to_dict() for t in self.trees], "learning_rate": self.learning_rate,
                "reg_lambda": self.reg_lambda, "gamma": self.gamma, "max_depth": self.max_depth,
                "base_score": self.base_score, "n_features": self.n_features,
                "objective_trace": list(self.objective_trace)}

    @classmethod
    def from_params(cls, p):
        p = dict(p)
        p["trees"] = [Tree.from_dict(t) for t in p["trees"]]
        return cls(**p)


def _loss(y, F):
    return float(np.sum(np.logaddexp(0.0, F) - y * F))


def train_gbt(X, y, *, n_estimators=100, learning_rate=0.1, max_depth=3, gamma=0.0,
              reg_lambda=1.0, min_child_weight=1.0) -> TreeEnsemble:
    """Boost regression trees on logistic-loss gradients and hessians."""
    X = np.asarray(X, dtype=np.float64)
    y = check_binary(y)
    if n_estimators < 1:
        raise ValueError("n_estimators must be >= 1")
    if max_depth < 0:
        raise ValueError("max_depth must be >= 0")
    rate = float(y.mean())
    base = float(np.log(rate / (1.0 - rate)))
    F = np.full(len(y), base)
    model = TreeEnsemble([], float(learning_rate), float(reg_lambda), float(gamma), int(max_depth), base,
                         X.shape[1])
    objective = _loss(y, F)
    model.objective_trace.append(objective)
    idx = np.arange(len(y))
    for _ in range(n_estimators):
        p = sigmoid(F)
        g = p - y
        h = p * (1.0 - p)
        builder = _Builder(X, g, h, max_depth, reg_lambda, gamma, min_child_weight)
        builder.build(idx, 0)
        tree = builder.tree()
        out = learning_rate * tree.value
        penalty = gamma * tree.n_leaves + 0.5 * reg_lambda * float((out[tree.feature < 0] ** 2).sum())
        F_new = F + learning_rate * tree.predict(X)
        new_objective = _loss(y, F_new) + (objective - _loss(y, F)) + penalty
        if new_objective > objective:
            break
        model.trees.append(tree)
        F = F_new
        objective = new_objective
        model.objective_trace.append(objective)
    return model
