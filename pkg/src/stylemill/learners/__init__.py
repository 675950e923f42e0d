"""The five classifiers and a kind-agnostic fit/predict surface."""

from __future__ import annotations

import numpy as np

from stylemill.errors import ConfigError
from stylemill.learners.base import (
    CONFIG_TYPES,
    KINDS,
    ForestConfig,
    MLPConfig,
    NBConfig,
    Standardizer,
    SVMConfig,
    TrainedModel,
    TreeConfig,
    config_to_dict,
    make_config,
    standardize_fit,
)
from stylemill.learners.forest import fit_random_forest, forest_decision
from stylemill.learners.mlp import fit_mlp, mlp_decision
from stylemill.learners.naive_bayes import fit_naive_bayes, nb_decision
from stylemill.learners.svm import fit_svm, svm_decision
from stylemill.learners.tree import fit_tree_c45, tree_decision

__all__ = [
    "KINDS",
    "ForestConfig",
    "MLPConfig",
    "NBConfig",
    "SVMConfig",
    "Standardizer",
    "TrainedModel",
    "TreeConfig",
    "config_to_dict",
    "decision_scores",
    "fit_model",
    "make_config",
    "predict",
    "standardize_fit",
]


def fit_model(kind: str, X, y, config=None, seed: int = 0, feature_names=None, class_order=("first", "second")) -> TrainedModel:
    """Fit a model of ``kind``; ``seed`` only matters for forest and mlp."""
    if kind not in CONFIG_TYPES:
        raise ConfigError(f"unknown model kind {kind!r}; expected one of {KINDS}")
    config = config if config is not None else CONFIG_TYPES[kind]()
    if not isinstance(config, CONFIG_TYPES[kind]):
        raise ConfigError(f"{kind} needs a {CONFIG_TYPES[kind].__name__}, got {type(config).__name__}")
    common = {"feature_names": feature_names, "class_order": class_order}
    if kind == "svm":
        return fit_svm(X, y, config, **common)
    if kind == "nb":
        return fit_naive_bayes(X, y, config, **common)
    if kind == "tree":
        return fit_tree_c45(X, y, config, **common)
    if kind == "forest":
        return fit_random_forest(X, y, config, seed=seed, **common)
    return fit_mlp(X, y, config, seed=seed, **common)


def decision_scores(model: TrainedModel, X) -> np.ndarray:
    X = model.check_width(X)
    if len(X) == 0:
        return np.zeros(0)
    if model.standardizer is not None:
        X = model.standardizer.transform(X)
    if model.kind == "svm":
        return svm_decision(model, X)
    if model.kind == "nb":
        return nb_decision(model, X)
    if model.kind == "tree":
        return tree_decision(model, X)
    if model.kind == "forest":
        return forest_decision(model, X)
    if model.kind == "mlp":
        return mlp_decision(model, X)
    if model.kind == "tritrain":
        votes = sum(np.where(decision_scores(m, X) >= 0, 1.0, -1.0) for m in model.params["members"])
        return votes / len(model.params["members"])
    raise ConfigError(f"unknown model kind {model.kind!r}")


def predict(model: TrainedModel, X) -> tuple[np.ndarray, np.ndarray]:
    """Labels (+1 first pole / -1 second pole) and decision scores; score 0 -> +1."""
    scores = decision_scores(model, X)
    return np.where(scores >= 0, 1, -1).astype(np.int64), scores
