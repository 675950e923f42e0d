"""Gaussian naive Bayes with maximum-likelihood variances."""

from __future__ import annotations

import math

import numpy as np

from stylemill.learners.base import NBConfig, TrainedModel, as_labels, require_two_classes

_LOG_2PI = math.log(2.0 * math.pi)


def fit_naive_bayes(X, y, config: NBConfig | None = None, feature_names=None, class_order=("first", "second")) -> TrainedModel:
    config = config or NBConfig()
    X = np.asarray(X, dtype=np.float64)
    y = as_labels(y)
    require_two_classes(y, "naive Bayes")
    means, variances, log_prior = [], [], []
    for cls in (1, -1):
        Xc = X[y == cls]
        means.append(Xc.mean(axis=0))
        variances.append(np.maximum(Xc.var(axis=0), config.var_floor))
        log_prior.append(math.log(len(Xc) / len(X)))
    params = {"mean": np.array(means), "var": np.array(variances), "log_prior": np.array(log_prior)}
    return TrainedModel("nb", params, X.shape[1], list(feature_names or []), None, tuple(class_order))


def class_log_joint(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    """(n, 2) array of log prior + log likelihood for the first and second pole."""
    p = model.params
    out = np.empty((len(X), 2))
    for c in range(2):
        mean, var = p["mean"][c], p["var"][c]
        ll = -0.5 * (_LOG_2PI + np.log(var) + (X - mean) ** 2 / var).sum(axis=1)
        out[:, c] = ll + p["log_prior"][c]
    return out


def nb_decision(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    joint = class_log_joint(model, X)
    return joint[:, 0] - joint[:, 1]
