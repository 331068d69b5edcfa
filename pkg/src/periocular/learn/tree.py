"""CART trees grown with a vectorized exhaustive split search.

One tree grower serves three criteria:

``gini``
    weighted Gini impurity decrease on labels in {-1, +1}; leaves vote.
``mse``
    weighted least squares on a real target; leaves hold the weighted mean.
``newton``
    second-order gradient-boosting gain on per-sample (gradient, hessian)
    pairs with L2 leaf penalty; leaves hold the Newton step.

Ties between equally good splits go to the lowest feature index, then the
lowest threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# gains within this relative distance of the best are treated as ties
TIE_RTOL = 1e-12
MIN_GAIN_RTOL = 1e-12


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    gain: np.ndarray
    n_samples: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] < 0

    def apply(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        node = np.zeros(X.shape[0], dtype=np.intp)
        rows = np.arange(X.shape[0])
        while True:
            feat = self.feature[node]
            active = feat >= 0
            if not active.any():
                return node
            go_left = X[rows[active], feat[active]] <= self.threshold[node[active]]
            node[active] = np.where(go_left, self.left[node[active]], self.right[node[active]])

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def split_features(self) -> np.ndarray:
        return self.feature[self.feature >= 0]

    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=int)
        for node in range(self.n_nodes):
            if self.feature[node] >= 0:
                depth[self.left[node]] = depth[self.right[node]] = depth[node] + 1
        return int(depth.max())

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "gain": self.gain.tolist(),
            "n_samples": self.n_samples.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Tree":
        return cls(
            np.asarray(doc["feature"], dtype=np.intp),
            np.asarray(doc["threshold"], dtype=np.float64),
            np.asarray(doc["left"], dtype=np.intp),
            np.asarray(doc["right"], dtype=np.intp),
            np.asarray(doc["value"], dtype=np.float64),
            np.asarray(doc["gain"], dtype=np.float64),
            np.asarray(doc["n_samples"], dtype=np.intp),
        )


# --- criteria --------------------------------------------------------------
# A criterion holds two per-sample statistic columns; split search only needs
# their prefix sums, passed as left sums (a, b) and node totals (ta, tb).

class Gini:
    name = "gini"

    def __init__(self, y, w):
        self.stats = (w * (y > 0), w * (y < 0))

    @staticmethod
    def _score(pos, neg):
        tot = pos + neg
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(tot > 0, (pos * pos + neg * neg) / tot, 0.0)

    def gain(self, a, b, ta, tb):
        return self._score(a, b) + self._score(ta - a, tb - b) - self._score(ta, tb)

    def extra_valid(self, a, b, ta, tb):
        return None

    def min_gain(self, ta, tb):
        return MIN_GAIN_RTOL * max(ta + tb, 1e-300)

    def leaf_value(self, ta, tb):
        return 1.0 if ta >= tb else -1.0

    def is_pure(self, ta, tb):
        return ta <= 0 or tb <= 0


class WeightedMSE:
    name = "mse"

    def __init__(self, z, w):
        self.stats = (w, w * z)

    @staticmethod
    def _score(w, s):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(w > 0, s * s / w, 0.0)

    def gain(self, a, b, ta, tb):
        return self._score(a, b) + self._score(ta - a, tb - b) - self._score(ta, tb)

    def extra_valid(self, a, b, ta, tb):
        return None

    def min_gain(self, ta, tb):
        return MIN_GAIN_RTOL * max(tb * tb / max(ta, 1e-300), 1e-300)

    def leaf_value(self, ta, tb):
        return float(tb / ta) if ta > 0 else 0.0

    def is_pure(self, ta, tb):
        return False


class Newton:
    name = "newton"

    def __init__(self, g, h, reg_lambda=1.0, min_child_weight=1.0, min_split_loss=0.0):
        self.stats = (g, h)
        self.reg_lambda = reg_lambda
        self.min_child_weight = min_child_weight
        self.min_split_loss = min_split_loss

    def _score(self, g, h):
        return g * g / (h + self.reg_lambda)

    def gain(self, a, b, ta, tb):
        return 0.5 * (
            self._score(a, b) + self._score(ta - a, tb - b) - self._score(ta, tb)
        ) - self.min_split_loss

    def extra_valid(self, a, b, ta, tb):
        return (b >= self.min_child_weight) & (tb - b >= self.min_child_weight)

    def min_gain(self, ta, tb):
        return MIN_GAIN_RTOL * max(self._score(ta, tb), 1e-300)

    def leaf_value(self, ta, tb):
        return float(-ta / (tb + self.reg_lambda))

    def is_pure(self, ta, tb):
        return False


# --- split search ----------------------------------------------------------

@dataclass
class Split:
    feature: int
    threshold: float
    gain: float
    n_left: int


def best_sorted_split(xs, sa, sb, criterion, min_leaf, features):
    """Best split given per-feature sorted values ``xs`` and statistics ``sa``, ``sb``.

    All three arrays have shape ``(n_features, m)`` with row ``r`` describing
    column ``features[r]`` of the node's samples in ascending value order.
    Returns None when no admissible split has positive gain.
    """
    f, m = xs.shape
    if m < max(2, 2 * min_leaf):
        return None
    pa = np.cumsum(sa, axis=1)
    pb = np.cumsum(sb, axis=1)
    ta, tb = float(pa[0, -1]), float(pb[0, -1])
    a, b = pa[:, :-1], pb[:, :-1]
    valid = xs[:, :-1] < xs[:, 1:]
    if min_leaf > 1:
        n_left = np.arange(1, m)
        valid &= (n_left >= min_leaf) & (m - n_left >= min_leaf)
    extra = criterion.extra_valid(a, b, ta, tb)
    if extra is not None:
        valid &= extra
    if not valid.any():
        return None
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = criterion.gain(a, b, ta, tb)
    gain = np.where(valid, gain, -np.inf)
    best = gain.max()
    if not np.isfinite(best) or best <= criterion.min_gain(ta, tb):
        return None
    cand = gain >= best - TIE_RTOL * abs(best)
    row = int(np.argmax(cand.any(axis=1)))
    pos = int(np.argmax(cand[row]))
    threshold = 0.5 * (xs[row, pos] + xs[row, pos + 1])
    return Split(int(features[row]), float(threshold), float(gain[row, pos]), pos + 1)


def find_best_split(X, idx, criterion, min_leaf, features):
    """Exhaustive best split of rows ``idx`` over ascending column list ``features``."""
    block = X[np.ix_(idx, features)].T
    local = np.argsort(block, axis=1, kind="stable")
    rows = idx[local]
    xs = np.take_along_axis(block, local, axis=1)
    sa, sb = criterion.stats
    return best_sorted_split(xs, sa[rows], sb[rows], criterion, min_leaf, features)


def presort(X: np.ndarray) -> np.ndarray:
    """Feature-major stable argsort ``(d, n)``, reusable across trees on the same rows."""
    return np.argsort(np.ascontiguousarray(X.T), axis=1, kind="stable")


def grow_tree(
    X,
    criterion,
    max_depth=None,
    min_leaf=1,
    rng=None,
    max_features=None,
    order=None,
):
    """Grow a tree depth-first; nodes are numbered in creation order.

    With ``max_features`` each node draws that many candidate columns from
    ``rng``. Otherwise every column is scanned, using the presorted ``order``
    (computed here when not supplied) narrowed down the tree so a node costs
    time proportional to its own size.
    """
    n, d = X.shape
    sa, sb = criterion.stats
    subsample = max_features is not None and max_features < d
    all_features = np.arange(d)
    XT = None
    if not subsample:
        if order is None:
            order = presort(X)
        XT = np.ascontiguousarray(X.T)
    feature, threshold, left, right, value, gain, counts = [], [], [], [], [], [], []

    def new_node(idx):
        ta, tb = float(sa[idx].sum()), float(sb[idx].sum())
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(criterion.leaf_value(ta, tb))
        gain.append(0.0)
        counts.append(idx.size)
        return len(feature) - 1, (ta, tb)

    root_idx = np.arange(n)
    root, root_tot = new_node(root_idx)
    stack = [(root, root_idx, 0, root_tot, order)]
    while stack:
        node, idx, depth, tot, node_order = stack.pop()
        if max_depth is not None and depth >= max_depth:
            continue
        if criterion.is_pure(*tot):
            continue
        if subsample:
            feats = np.sort(rng.choice(d, size=max_features, replace=False))
            split = find_best_split(X, idx, criterion, min_leaf, feats)
        else:
            xs = np.take_along_axis(XT, node_order, axis=1)
            split = best_sorted_split(xs, sa[node_order], sb[node_order], criterion, min_leaf, all_features)
        if split is None:
            continue
        go_left = X[:, split.feature] <= split.threshold
        lidx = idx[go_left[idx]]
        ridx = idx[~go_left[idx]]
        lorder = rorder = None
        if not subsample:
            side = go_left[node_order]
            lorder = node_order[side].reshape(d, lidx.size)
            rorder = node_order[~side].reshape(d, ridx.size)
        feature[node] = split.feature
        threshold[node] = split.threshold
        gain[node] = split.gain
        lnode, ltot = new_node(lidx)
        rnode, rtot = new_node(ridx)
        left[node], right[node] = lnode, rnode
        # right pushed first so the left subtree is expanded first
        stack.append((rnode, ridx, depth + 1, rtot, rorder))
        stack.append((lnode, lidx, depth + 1, ltot, lorder))
    return Tree(
        np.asarray(feature, dtype=np.intp),
        np.asarray(threshold, dtype=np.float64),
        np.asarray(left, dtype=np.intp),
        np.asarray(right, dtype=np.intp),
        np.asarray(value, dtype=np.float64),
        np.asarray(gain, dtype=np.float64),
        np.asarray(counts, dtype=np.intp),
    )
