"""Soft-margin SVM trained by sequential minimal optimization.

The dual problem

    min_a  1/2 a^T Q a - sum(a)   s.t.  0 <= a_i <= C,  y^T a = 0,
    Q_ij = y_i y_j K(x_i, x_j)

is solved two coordinates at a time.  The working pair is the maximal
violating pair with second-order selection of the second index (Fan, Chen &
Lin 2005).  The loop stops when the violation gap ``m(a) - M(a)`` drops
below ``tol``, which bounds every KKT residual ``|y_i f(x_i) - 1|`` (or its
one-sided version at the bounds) by ``tol``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from stylemill.learners.base import (
    SVMConfig,
    TrainedModel,
    as_labels,
    require_two_classes,
    standardize_fit,
)

_TAU = 1e-12


def kernel_matrix(A: np.ndarray, B: np.ndarray, kernel: str, gamma: float) -> np.ndarray:
    if kernel == "linear":
        return A @ B.T
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * (A @ B.T)
    return np.exp(-gamma * np.maximum(sq, 0.0))


@dataclass
class DualSolution:
    alpha: np.ndarray
    b: float
    iterations: int
    converged: bool
    gap: float


def smo_solve(K: np.ndarray, y: np.ndarray, C: float, tol: float = 1e-3, max_iter: int = 100_000) -> DualSolution:
    """Solve the SVM dual for a precomputed kernel matrix ``K``."""
    y = np.asarray(y, dtype=np.float64)
    n = len(y)
    alpha = np.zeros(n)
    G = -np.ones(n)
    Kdiag = np.diag(K).copy()
    gap = np.inf
    it = 0
    converged = False
    while it < max_iter:
        yG = -y * G
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y < 0) & (alpha < C)) | ((y > 0) & (alpha > 0))
        if not up.any() or not low.any():
            converged = True
            gap = 0.0
            break
        up_idx = np.flatnonzero(up)
        i = up_idx[np.argmax(yG[up_idx])]
        gmax = yG[i]
        low_idx = np.flatnonzero(low)
        gmin = yG[low_idx].min()
        gap = gmax - gmin
        if gap < tol:
            converged = True
            break
        cand = low_idx[yG[low_idx] < gmax]
        bgap = gmax - yG[cand]
        quad = Kdiag[i] + Kdiag[cand] - 2.0 * K[i, cand]
        quad = np.where(quad > 0, quad, _TAU)
        j = cand[np.argmin(-(bgap * bgap) / quad)]

        ai_old, aj_old = alpha[i], alpha[j]
        Qii, Qjj = K[i, i], K[j, j]
        Qij = y[i] * y[j] * K[i, j]
        if y[i] != y[j]:
            q = Qii + Qjj + 2.0 * Qij
            if q <= 0:
                q = _TAU
            delta = (-G[i] - G[j]) / q
            diff = ai_old - aj_old
            ai, aj = ai_old + delta, aj_old + delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            elif ai < 0:
                ai, aj = 0.0, -diff
            if diff > 0:
                if ai > C:
                    ai, aj = C, C - diff
            elif aj > C:
                aj, ai = C, C + diff
        else:
            q = Qii + Qjj - 2.0 * Qij
            if q <= 0:
                q = _TAU
            delta = (G[i] - G[j]) / q
            total = ai_old + aj_old
            ai, aj = ai_old - delta, aj_old + delta
            if total > C:
                if ai > C:
                    ai, aj = C, total - C
            elif aj < 0:
                aj, ai = 0.0, total
            if total > C:
                if aj > C:
                    aj, ai = C, total - C
            elif ai < 0:
                ai, aj = 0.0, total
        alpha[i], alpha[j] = ai, aj
        G += y * (K[:, i] * (y[i] * (ai - ai_old)) + K[:, j] * (y[j] * (aj - aj_old)))
        it += 1

    return DualSolution(alpha, _intercept(alpha, y, G, C), it, converged, float(gap))


def _intercept(alpha: np.ndarray, y: np.ndarray, G: np.ndarray, C: float) -> float:
    yG = y * G
    free = (alpha > 0) & (alpha < C)
    if free.any():
        rho = yG[free].mean()
    else:
        at_upper = alpha >= C
        ub_mask = (at_upper & (y < 0)) | (~at_upper & (y > 0))
        lb_mask = ~ub_mask
        ub = yG[ub_mask].min() if ub_mask.any() else np.inf
        lb = yG[lb_mask].max() if lb_mask.any() else -np.inf
        rho = (ub + lb) / 2.0
    return float(-rho)


def kkt_residuals(alpha: np.ndarray, y: np.ndarray, K: np.ndarray, b: float, C: float) -> np.ndarray:
    """Per-point KKT violation of a dual solution (0 where satisfied)."""
    y = np.asarray(y, dtype=np.float64)
    margin = y * (K @ (alpha * y) + b)
    res = np.where(alpha <= 0, np.maximum(0.0, 1.0 - margin), np.abs(margin - 1.0))
    return np.where(alpha >= C, np.maximum(0.0, margin - 1.0), res)


def fit_svm(X, y, config: SVMConfig | None = None, feature_names=None, class_order=("first", "second")) -> TrainedModel:
    config = config or SVMConfig()
    y = as_labels(y)
    require_two_classes(y, "SVM")
    scaler = standardize_fit(X)
    Xs = scaler.transform(X)
    K = kernel_matrix(Xs, Xs, config.kernel, config.gamma)
    sol = smo_solve(K, y, config.C, config.tol, config.max_iter)
    if not sol.converged:
        warnings.warn(
            f"SMO stopped after {sol.iterations} iterations with violation gap {sol.gap:.3g}",
            RuntimeWarning,
            stacklevel=2,
        )
    sv = sol.alpha > 0
    coef = sol.alpha[sv] * y[sv]
    params = {
        "kernel": config.kernel,
        "gamma": config.gamma,
        "b": sol.b,
        "coef": coef,
        "support": Xs[sv],
        "iterations": sol.iterations,
        "w": coef @ Xs[sv] if config.kernel == "linear" else None,
    }
    return TrainedModel(
        "svm",
        params,
        Xs.shape[1],
        list(feature_names or []),
        scaler,
        tuple(class_order),
        sol.converged,
    )


def svm_decision(model: TrainedModel, Xs: np.ndarray) -> np.ndarray:
    p = model.params
    if p["kernel"] == "linear" and p.get("w") is not None:
        return Xs @ p["w"] + p["b"]
    support = np.asarray(p["support"], dtype=np.float64).reshape(-1, Xs.shape[1])
    if len(support) == 0:
        return np.full(len(Xs), p["b"])
    return kernel_matrix(Xs, support, p["kernel"], p["gamma"]) @ p["coef"] + p["b"]
