"""C4.5-style binary decision tree on numeric features.

Each internal node tests ``x[feature] <= threshold``, with thresholds at the
midpoints between consecutive distinct values.  The split maximising the
gain ratio (information gain divided by split information) wins; ties go to
the lower feature index, then the lower threshold.  A node becomes a leaf
when it is pure, at ``max_depth``, or no split leaves ``min_leaf`` rows on
both sides.  No pruning is done.

An impure node is split even when the best gain is zero (XOR-like data),
which guarantees a perfect fit of any consistent training set when depth is
unbounded and ``min_leaf`` is 1.
"""

from __future__ import annotations

import numpy as np

from stylemill.errors import DataError
from stylemill.learners.base import TrainedModel, TreeConfig, as_labels
from stylemill.rng import Rng


def _entropy(pos: np.ndarray, n: np.ndarray) -> np.ndarray:
    pos = np.asarray(pos, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(n > 0, pos / n, 0.0)
        q = 1.0 - p
        h = -(np.where(p > 0, p * np.log2(p), 0.0) + np.where(q > 0, q * np.log2(q), 0.0))
    return h


def gain_ratio_candidates(x: np.ndarray, y: np.ndarray, min_leaf: int = 1):
    """All admissible thresholds on one feature with their gain and gain ratio.

    Returns ``(thresholds, gains, ratios)``; empty arrays when the feature
    is constant or no threshold respects ``min_leaf``.
    """
    order = np.argsort(x, kind="stable")
    xs = x[order]
    ys = y[order]
    n = len(xs)
    distinct = np.flatnonzero(xs[:-1] < xs[1:])
    n_left = distinct + 1
    ok = (n_left >= min_leaf) & (n - n_left >= min_leaf)
    distinct, n_left = distinct[ok], n_left[ok]
    if len(distinct) == 0:
        empty = np.zeros(0)
        return empty, empty, empty
    cum_pos = np.cumsum(ys > 0)
    pos_left = cum_pos[distinct]
    pos_total = cum_pos[-1]
    n_right = n - n_left
    parent = _entropy(np.array([pos_total]), np.array([n]))[0]
    children = (n_left * _entropy(pos_left, n_left) + n_right * _entropy(pos_total - pos_left, n_right)) / n
    gains = parent - children
    frac = n_left / n
    split_info = -(frac * np.log2(frac) + (1 - frac) * np.log2(1 - frac))
    ratios = gains / split_info
    thresholds = (xs[distinct] + xs[distinct + 1]) / 2.0
    return thresholds, gains, ratios


def _best_split(X, y, features, min_leaf):
    best = None
    for f in features:
        thr, _, ratios = gain_ratio_candidates(X[:, f], y, min_leaf)
        if len(thr) == 0:
            continue
        k = int(np.argmax(ratios))
        if best is None or ratios[k] > best[0]:
            best = (ratios[k], f, thr[k])
    return best


def build_tree(X, y, config: TreeConfig, rng: Rng | None = None) -> dict[str, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    y = as_labels(y)
    d = X.shape[1]
    m = d if config.max_features is None else min(config.max_features, d)
    feat, thr, left, right, value, count = [], [], [], [], [], []

    def new_node(idx: np.ndarray) -> int:
        ys = y[idx]
        p = float(np.mean(ys > 0)) if len(ys) else 0.5
        feat.append(-1)
        thr.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(2.0 * p - 1.0)
        count.append(len(idx))
        return len(feat) - 1

    root = new_node(np.arange(len(y)))
    stack = [(root, np.arange(len(y)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        ys = y[idx]
        if np.all(ys == ys[0]) or (config.max_depth is not None and depth >= config.max_depth):
            continue
        if m < d and rng is not None:
            features = sorted(rng.sample(range(d), m))
            best = _best_split(X[idx], ys, features, config.min_leaf)
            if best is None:
                # every sampled feature is constant here; fall back to the rest
                best = _best_split(X[idx], ys, [f for f in range(d) if f not in features], config.min_leaf)
        else:
            best = _best_split(X[idx], ys, range(d), config.min_leaf)
        if best is None:
            continue
        _, f, t = best
        go_left = X[idx, f] <= t
        li, ri = idx[go_left], idx[~go_left]
        feat[node], thr[node] = int(f), float(t)
        left[node] = new_node(li)
        right[node] = new_node(ri)
        # right pushed first so the left subtree is expanded first
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))

    return {
        "feature": np.array(feat, dtype=np.int64),
        "threshold": np.array(thr, dtype=np.float64),
        "left": np.array(left, dtype=np.int64),
        "right": np.array(right, dtype=np.int64),
        "value": np.array(value, dtype=np.float64),
        "count": np.array(count, dtype=np.int64),
    }


def tree_apply(nodes: dict[str, np.ndarray], X: np.ndarray) -> np.ndarray:
    """Leaf score (2p - 1) reached by each row."""
    feature, threshold = nodes["feature"], nodes["threshold"]
    left, right, value = nodes["left"], nodes["right"], nodes["value"]
    node = np.zeros(len(X), dtype=np.int64)
    rows = np.arange(len(X))
    active = feature[node] >= 0
    while active.any():
        r, nd = rows[active], node[active]
        f = feature[nd]
        node[active] = np.where(X[r, f] <= threshold[nd], left[nd], right[nd])
        active = feature[node] >= 0
    return value[node].astype(np.float64)


def fit_tree_c45(X, y, config: TreeConfig | None = None, feature_names=None, class_order=("first", "second")) -> TrainedModel:
    config = config or TreeConfig()
    X = np.asarray(X, dtype=np.float64)
    if len(X) == 0:
        raise DataError("cannot fit a tree on zero rows")
    nodes = build_tree(X, y, config)
    return TrainedModel("tree", {"nodes": nodes}, X.shape[1], list(feature_names or []), None, tuple(class_order))


def tree_decision(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    return tree_apply(model.params["nodes"], X)
