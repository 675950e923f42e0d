"""Shared model container, configs, scaling and prediction dispatch.

Every learner is a binary classifier over labels ``+1`` (first pole) and
``-1`` (second pole).  Each produces a real decision score; the predicted
label is ``+1`` when the score is ``>= 0``, so exact ties go to the first
pole everywhere.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from typing import Any

import numpy as np

from stylemill.errors import ConfigError, DataError

MODEL_SCHEMA = "stylemill.model/1"
VARIANCE_FLOOR = 1e-9

KINDS = ("svm", "nb", "tree", "forest", "mlp")


@dataclass(frozen=True)
class SVMConfig:
    C: float = 1.0
    kernel: str = "linear"
    gamma: float = 1.0
    tol: float = 1e-3
    max_iter: int = 100_000

    def __post_init__(self) -> None:
        if not self.C > 0:
            raise ConfigError(f"SVM penalty C must be > 0, got {self.C}")
        if self.kernel not in ("linear", "rbf"):
            raise ConfigError(f"SVM kernel must be 'linear' or 'rbf', got {self.kernel!r}")
        if self.kernel == "rbf" and not self.gamma > 0:
            raise ConfigError("rbf gamma must be > 0")
        if not self.tol > 0 or self.max_iter < 1:
            raise ConfigError("SVM tol must be > 0 and max_iter >= 1")


@dataclass(frozen=True)
class NBConfig:
    var_floor: float = VARIANCE_FLOOR

    def __post_init__(self) -> None:
        if not self.var_floor > 0:
            raise ConfigError("naive Bayes variance floor must be > 0")


@dataclass(frozen=True)
class TreeConfig:
    min_leaf: int = 1
    max_depth: int | None = None
    max_features: int | None = None

    def __post_init__(self) -> None:
        if self.min_leaf < 1:
            raise ConfigError("tree min_leaf must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ConfigError("tree max_depth must be >= 0")
        if self.max_features is not None and self.max_features < 1:
            raise ConfigError("tree max_features must be >= 1")


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 25
    bootstrap: bool = True
    max_features: int | None = None
    min_leaf: int = 1
    max_depth: int | None = None

    def __post_init__(self) -> None:
        if self.n_trees < 1:
            raise ConfigError("forest needs at least one tree")
        if self.max_features is not None and self.max_features < 1:
            raise ConfigError("forest max_features must be >= 1")


@dataclass(frozen=True)
class MLPConfig:
    hidden: int = 16
    learning_rate: float = 0.5
    epochs: int = 500

    def __post_init__(self) -> None:
        if self.hidden < 1 or self.epochs < 0 or not self.learning_rate > 0:
            raise ConfigError("MLP needs hidden >= 1, epochs >= 0, learning_rate > 0")


CONFIG_TYPES: dict[str, type] = {
    "svm": SVMConfig,
    "nb": NBConfig,
    "tree": TreeConfig,
    "forest": ForestConfig,
    "mlp": MLPConfig,
}


def make_config(kind: str, options: dict[str, Any] | None = None):
    if kind not in CONFIG_TYPES:
        raise ConfigError(f"unknown model kind {kind!r}; expected one of {KINDS}")
    cls = CONFIG_TYPES[kind]
    options = dict(options or {})
    options.pop("kind", None)
    allowed = {f.name for f in fields(cls)}
    unknown = set(options) - allowed
    if unknown:
        raise ConfigError(f"unknown {kind} option(s) {sorted(unknown)}")
    return cls(**options)


def config_to_dict(kind: str, config) -> dict:
    return {"kind": kind, **asdict(config)}


@dataclass
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.std


def standardize_fit(X, floor: float = VARIANCE_FLOOR) -> Standardizer:
    """Per-feature mean and population stddev.

    Columns whose stddev falls below ``floor`` get a unit divisor after
    centring, so they transform to all zeros.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DataError("cannot standardize an empty matrix")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std < floor, 1.0, std)
    return Standardizer(mean, std)


@dataclass
class TrainedModel:
    kind: str
    params: dict[str, Any]
    n_features: int
    feature_names: list[str] = field(default_factory=list)
    standardizer: Standardizer | None = None
    class_order: tuple[str, str] = ("first", "second")
    converged: bool = True

    def check_width(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1 and X.size == 0:
            X = X.reshape(0, self.n_features)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            width = X.shape[1] if X.ndim == 2 else X.shape
            raise DataError(f"expected rows of width {self.n_features}, got {width}")
        return X

    def to_dict(self) -> dict:
        return {
            "schema": MODEL_SCHEMA,
            "kind": self.kind,
            "n_features": self.n_features,
            "feature_names": list(self.feature_names),
            "class_order": list(self.class_order),
            "converged": self.converged,
            "standardization": None
            if self.standardizer is None
            else {"mean": self.standardizer.mean.tolist(), "std": self.standardizer.std.tolist()},
            "params": _jsonable(self.params),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainedModel":
        if data.get("schema") != MODEL_SCHEMA:
            raise DataError(f"unsupported model schema {data.get('schema')!r}")
        std = data.get("standardization")
        return cls(
            kind=data["kind"],
            params=_from_jsonable(data["kind"], data["params"]),
            n_features=int(data["n_features"]),
            feature_names=list(data.get("feature_names", [])),
            standardizer=None
            if std is None
            else Standardizer(np.array(std["mean"], dtype=np.float64), np.array(std["std"], dtype=np.float64)),
            class_order=tuple(data.get("class_order", ("first", "second"))),
            converged=bool(data.get("converged", True)),
        )


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, TrainedModel):
        return obj.to_dict()
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


_ARRAY_PARAMS = {
    "svm": ("coef", "support", "w"),
    "nb": ("mean", "var", "log_prior"),
    "mlp": ("W1", "b1", "W2"),
}


def _from_jsonable(kind: str, params: dict) -> dict:
    out = dict(params)
    for key in _ARRAY_PARAMS.get(kind, ()):
        if out.get(key) is not None:
            out[key] = np.array(out[key], dtype=np.float64)
    if kind == "forest":
        out["trees"] = [_from_jsonable("tree", t) for t in out["trees"]]
    if kind == "tree":
        out["nodes"] = {k: np.array(v) for k, v in out["nodes"].items()}
    if kind == "tritrain":
        out["members"] = [TrainedModel.from_dict(m) for m in out["members"]]
    return out


def as_labels(y) -> np.ndarray:
    y = np.asarray(y).astype(np.int64).ravel()
    if not np.all((y == 1) | (y == -1)):
        raise DataError("training labels must be +1 (first pole) or -1 (second pole)")
    return y


def require_two_classes(y: np.ndarray, what: str) -> None:
    if not (np.any(y == 1) and np.any(y == -1)):
        raise DataError(f"{what} needs both classes present, got only {'+1' if np.any(y == 1) else '-1'}")
