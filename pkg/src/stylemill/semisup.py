"""One-pass self-training and the tri-training comparator.

Self-training here is deliberately the single-pass variant: one SVM is fit
on the labeled rows, it labels every unlabeled row, and the final model is
fit on the union.  There is no confidence threshold and no iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from stylemill.errors import DataError
from stylemill.features import Dimension, DimensionLabel, LearningDataset
from stylemill.learners import SVMConfig, TrainedModel, fit_model, make_config, predict
from stylemill.rng import Rng, derive_seed

ORIGINAL = "original"
SELF_TAUGHT = "self-taught"


@dataclass
class SelfTrainRun:
    labeling_model: TrainedModel
    final_model: TrainedModel
    d_prime: LearningDataset
    provenance: list[str]
    n_labeled: int
    n_unlabeled: int
    dimension: Dimension
    final_kind: str

    @property
    def n_total(self) -> int:
        return self.d_prime.n_rows

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension.value,
            "final_kind": self.final_kind,
            "counts": {"L": self.n_labeled, "U": self.n_unlabeled, "D_prime": self.n_total},
            "provenance": [
                {"user_id": u, "source": s} for u, s in zip(self.d_prime.user_ids, self.provenance)
            ],
            "labeling_model": self.labeling_model.to_dict(),
            "final_model": self.final_model.to_dict(),
            "d_prime": self.d_prime.to_dict(),
        }


def _check_inputs(L: LearningDataset, U: LearningDataset, dimension: Dimension) -> np.ndarray:
    if L.feature_names != U.feature_names:
        raise DataError("L and U have different feature schemas")
    if U.labels[dimension]:
        raise DataError(f"U must not carry {dimension.value} labels (withheld truth stays outside)")
    y = L.y(dimension)
    if np.any(y == 0):
        raise DataError(f"every row of L needs a {dimension.value} label")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise DataError(f"L needs both {dimension.value} poles to train the labeling model")
    return y


def _labels_for(dimension: Dimension, users, signs) -> dict[str, DimensionLabel]:
    return {u: DimensionLabel(dimension, dimension.pole_name(int(s))) for u, s in zip(users, signs)}


def self_train(
    L: LearningDataset,
    U: LearningDataset,
    dimension: Dimension,
    final_kind: str,
    final_config=None,
    labeling_config: SVMConfig | None = None,
    seed: int = 0,
) -> SelfTrainRun:
    """Label U with an SVM trained on L, then fit ``final_kind`` on L + U'.

    Rows of D' are L's rows followed by U's, so with U empty the final model
    is exactly the supervised fit on L with the same config and seed.
    """
    y_L = _check_inputs(L, U, dimension)
    labeling_config = labeling_config or SVMConfig()
    class_order = dimension.poles
    labeler = fit_model("svm", L.X, y_L, labeling_config, feature_names=L.feature_names, class_order=class_order)
    if U.n_rows:
        u_pred, _ = predict(labeler, U.X)
    else:
        u_pred = np.zeros(0, dtype=np.int64)
    U_prime = U.with_labels(dimension, _labels_for(dimension, U.user_ids, u_pred))
    d_prime = LearningDataset.concat([L, U_prime])
    final_config = final_config if final_config is not None else make_config(final_kind)
    final = fit_model(
        final_kind, d_prime.X, d_prime.y(dimension), final_config, seed=seed,
        feature_names=L.feature_names, class_order=class_order,
    )
    provenance = [ORIGINAL] * L.n_rows + [SELF_TAUGHT] * U.n_rows
    return SelfTrainRun(labeler, final, d_prime, provenance, L.n_rows, U.n_rows, dimension, final_kind)


def supervised(L: LearningDataset, dimension: Dimension, kind: str, config=None, seed: int = 0) -> TrainedModel:
    """The L-only baseline that self-training is compared against."""
    y = L.y(dimension)
    if np.any(y == 0):
        raise DataError(f"every row of L needs a {dimension.value} label")
    config = config if config is not None else make_config(kind)
    return fit_model(kind, L.X, y, config, seed=seed, feature_names=L.feature_names, class_order=dimension.poles)


@dataclass
class TriTrainTrace:
    rounds: int = 0
    updates: list[list[int]] = field(default_factory=list)


def tri_train(
    L: LearningDataset,
    U: LearningDataset,
    dimension: Dimension,
    base: tuple | list | None = None,
    seed: int = 0,
    bootstrap: bool = True,
    max_rounds: int = 50,
) -> TrainedModel:
    """Tri-training (Zhou & Li, 2005) over three base learners.

    ``base`` is three ``(kind, config)`` pairs (default: three linear SVMs).
    Each learner starts from a bootstrap sample of L.  In every round,
    learner ``i`` is offered the U rows on which the other two agree; it is
    retrained on L plus those rows only when the agreeing pair's error on L,
    ``e_i``, has dropped below the previous round's ``e'_i`` and the
    ``e_i * |L_i| < e'_i * |L'_i|`` bound holds, subsampling ``L_i`` when
    needed to satisfy it.  Rounds stop when no learner changes (or after
    ``max_rounds``).  The returned model predicts by majority vote.
    """
    y_L = _check_inputs(L, U, dimension)
    if base is None:
        base = [("svm", SVMConfig())] * 3
    base = list(base)
    if len(base) != 3:
        raise DataError(f"tri-training needs exactly three base learners, got {len(base)}")
    base = [(k, c if c is not None else make_config(k)) for k, c in base]
    n = L.n_rows
    names, poles = L.feature_names, dimension.poles
    rng = Rng(derive_seed(seed, 0x7217))

    def learn(i: int, X, y, round_no: int) -> TrainedModel:
        kind, cfg = base[i]
        return fit_model(kind, X, y, cfg, seed=derive_seed(seed, i, round_no), feature_names=names, class_order=poles)

    models = []
    for i in range(3):
        rows = np.arange(n)
        if bootstrap:
            for _ in range(100):
                rows = np.array(rng.choices(n, n))
                if len(set(y_L[rows])) == 2:
                    break
            else:
                rows = np.arange(n)
        models.append(learn(i, L.X[rows], y_L[rows], 0))

    err_prev = [0.5, 0.5, 0.5]
    size_prev = [0, 0, 0]
    trace = TriTrainTrace()
    XU = U.X
    for round_no in range(1, max_rounds + 1):
        preds_L = [predict(m, L.X)[0] for m in models]
        preds_U = [predict(m, XU)[0] for m in models] if U.n_rows else [np.zeros(0, dtype=np.int64)] * 3
        updates = []
        new_sets = {}
        errs = [0.0, 0.0, 0.0]
        for i in range(3):
            j, k = [t for t in range(3) if t != i]
            agree_L = preds_L[j] == preds_L[k]
            if not agree_L.any():
                continue
            e = float(np.mean(preds_L[j][agree_L] != y_L[agree_L]))
            errs[i] = e
            if e >= err_prev[i]:
                continue
            idx = np.flatnonzero(preds_U[j] == preds_U[k])
            if size_prev[i] == 0:
                size_prev[i] = math.floor(e / (err_prev[i] - e) + 1)
            if size_prev[i] < len(idx):
                if e * len(idx) < err_prev[i] * size_prev[i]:
                    new_sets[i] = idx
                elif size_prev[i] > e / (err_prev[i] - e):
                    keep = min(len(idx), math.ceil(err_prev[i] * size_prev[i] / e - 1))
                    new_sets[i] = np.array(sorted(rng.sample(list(idx), keep)), dtype=np.int64)
        for i, idx in new_sets.items():
            j = (i + 1) % 3
            X_i = np.vstack([L.X, XU[idx]])
            y_i = np.concatenate([y_L, preds_U[j][idx]])
            models[i] = learn(i, X_i, y_i, round_no)
            err_prev[i] = errs[i]
            size_prev[i] = len(idx)
            updates.append(i)
        trace.rounds = round_no
        trace.updates.append(updates)
        if not updates:
            break

    params = {"members": models, "rounds": trace.rounds, "updates": trace.updates}
    return TrainedModel("tritrain", params, L.X.shape[1], list(names), None, poles)
