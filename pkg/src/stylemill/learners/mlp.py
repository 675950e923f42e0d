"""One-hidden-layer perceptron (tanh hidden units, sigmoid output).

Trained by full-batch gradient descent on the mean log-loss.  Parameters are
initialised uniformly in [-0.5, 0.5] from the package RNG in the order W1
(row-major, hidden x features), b1, W2, b2.
"""

from __future__ import annotations

import numpy as np

from stylemill.errors import NumericError
from stylemill.learners.base import (
    MLPConfig,
    TrainedModel,
    as_labels,
    require_two_classes,
    standardize_fit,
)
from stylemill.rng import Rng


def init_params(n_features: int, hidden: int, seed: int) -> np.ndarray:
    size = hidden * n_features + hidden + hidden + 1
    return Rng(seed).uniforms(size, -0.5, 0.5)


def unpack(theta: np.ndarray, n_features: int, hidden: int):
    k = hidden * n_features
    W1 = theta[:k].reshape(hidden, n_features)
    b1 = theta[k : k + hidden]
    W2 = theta[k + hidden : k + 2 * hidden]
    b2 = theta[k + 2 * hidden]
    return W1, b1, W2, b2


def forward(theta: np.ndarray, X: np.ndarray, hidden: int):
    W1, b1, W2, b2 = unpack(theta, X.shape[1], hidden)
    A = np.tanh(X @ W1.T + b1)
    return A, A @ W2 + b2


def loss_and_grad(theta: np.ndarray, X: np.ndarray, target: np.ndarray, hidden: int):
    """Mean log-loss and its gradient; ``target`` holds 0/1 values."""
    n, d = X.shape
    W1, _, W2, _ = unpack(theta, d, hidden)
    A, z = forward(theta, X, hidden)
    loss = float(np.mean(np.logaddexp(0.0, z) - target * z))
    p = 0.5 * (1.0 + np.tanh(0.5 * z))
    dz = (p - target) / n
    dW2 = A.T @ dz
    db2 = dz.sum()
    dZ1 = np.outer(dz, W2) * (1.0 - A * A)
    dW1 = dZ1.T @ X
    db1 = dZ1.sum(axis=0)
    grad = np.concatenate([dW1.ravel(), db1, dW2, [db2]])
    return loss, grad


def fit_mlp(X, y, config: MLPConfig | None = None, seed: int = 0, feature_names=None, class_order=("first", "second")) -> TrainedModel:
    config = config or MLPConfig()
    y = as_labels(y)
    require_two_classes(y, "MLP")
    scaler = standardize_fit(X)
    Xs = scaler.transform(X)
    target = (y > 0).astype(np.float64)
    theta = init_params(Xs.shape[1], config.hidden, seed)
    loss = float("nan")
    for epoch in range(config.epochs):
        with np.errstate(over="ignore", invalid="ignore"):
            loss, grad = loss_and_grad(theta, Xs, target, config.hidden)
        if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
            raise NumericError(
                f"MLP diverged at epoch {epoch} (loss={loss}); try a smaller learning rate"
            )
        theta = theta - config.learning_rate * grad
    W1, b1, W2, b2 = unpack(theta, Xs.shape[1], config.hidden)
    params = {"W1": W1.copy(), "b1": b1.copy(), "W2": W2.copy(), "b2": float(b2), "hidden": config.hidden, "final_loss": loss if config.epochs else None}
    return TrainedModel("mlp", params, Xs.shape[1], list(feature_names or []), scaler, tuple(class_order))


def mlp_decision(model: TrainedModel, Xs: np.ndarray) -> np.ndarray:
    p = model.params
    A = np.tanh(Xs @ np.asarray(p["W1"]).T + np.asarray(p["b1"]))
    return A @ np.asarray(p["W2"]) + p["b2"]
