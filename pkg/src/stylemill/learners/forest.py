"""Random forest of gain-ratio trees with majority voting."""

from __future__ import annotations

import math

import numpy as np

from stylemill.errors import DataError
from stylemill.learners.base import ForestConfig, TrainedModel, TreeConfig, as_labels
from stylemill.learners.tree import build_tree, tree_apply
from stylemill.rng import Rng, derive_seed


def fit_random_forest(
    X, y, config: ForestConfig | None = None, seed: int = 0, feature_names=None, class_order=("first", "second")
) -> TrainedModel:
    """Fit ``n_trees`` trees, tree ``t`` drawing from ``Rng(derive_seed(seed, t))``.

    ``max_features`` defaults to ``ceil(sqrt(d))`` features per split.
    """
    config = config or ForestConfig()
    X = np.asarray(X, dtype=np.float64)
    y = as_labels(y)
    n, d = X.shape
    if n == 0:
        raise DataError("cannot fit a forest on zero rows")
    m = config.max_features or math.ceil(math.sqrt(d))
    tree_cfg = TreeConfig(min_leaf=config.min_leaf, max_depth=config.max_depth, max_features=min(m, d))
    trees = []
    for t in range(config.n_trees):
        rng = Rng(derive_seed(seed, t))
        rows = np.array(rng.choices(n, n)) if config.bootstrap else np.arange(n)
        trees.append({"nodes": build_tree(X[rows], y[rows], tree_cfg, rng)})
    params = {"trees": trees, "max_features": tree_cfg.max_features, "seed": seed}
    return TrainedModel("forest", params, d, list(feature_names or []), None, tuple(class_order))


def forest_decision(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    """Vote margin in [-1, 1]: (votes for first pole - votes for second) / n_trees."""
    votes = np.zeros(len(X))
    trees = model.params["trees"]
    for tree in trees:
        votes += np.where(tree_apply(tree["nodes"], X) >= 0, 1.0, -1.0)
    return votes / len(trees)
