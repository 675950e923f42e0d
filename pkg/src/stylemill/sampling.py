"""Class rebalancing, labeled/unlabeled splits and cross-validation folds.

All randomness comes from :class:`stylemill.rng.Rng`, so every function here
is a pure function of its inputs and seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from stylemill.errors import ConfigError, DataError
from stylemill.features import Dimension, DimensionLabel, LearningDataset
from stylemill.rng import Rng


def round_half_up(x: float) -> int:
    # the 1e-9 guards against r * n landing a hair under .5 from binary rounding
    return int(math.floor(x + 0.5 + 1e-9))


def largest_remainder(total: int, weights: list[float]) -> list[int]:
    """Apportion ``total`` integer units proportionally to ``weights``.

    Ties in the remainders go to the earlier entry.
    """
    wsum = float(sum(weights))
    if total == 0 or wsum == 0:
        return [0] * len(weights)
    quotas = [total * w / wsum for w in weights]
    base = [int(math.floor(q)) for q in quotas]
    short = total - sum(base)
    order = sorted(range(len(weights)), key=lambda i: (-(quotas[i] - base[i]), i))
    for i in order[:short]:
        base[i] += 1
    return base


def under_sample(dataset: LearningDataset, dimension: Dimension, seed: int) -> LearningDataset:
    """Randomly delete majority-pole rows until both poles have the minority size.

    Only rows labeled for ``dimension`` are considered; surviving rows keep
    their original relative order.
    """
    labeled = dataset.labeled(dimension)
    y = labeled.y(dimension)
    pos = [i for i, v in enumerate(y) if v > 0]
    neg = [i for i, v in enumerate(y) if v < 0]
    if not pos or not neg:
        raise DataError(f"cannot balance a single class ({dimension.value}: {len(pos)}/{len(neg)})")
    if len(pos) == len(neg):
        return labeled
    minority, majority = (pos, neg) if len(pos) < len(neg) else (neg, pos)
    kept = Rng(seed).sample(majority, len(minority))
    return labeled.subset(sorted(minority + kept))


@dataclass(frozen=True)
class SplitSpec:
    labeled_ratio: float
    seed: int
    stratified: bool = True

    def __post_init__(self) -> None:
        if not 0 < self.labeled_ratio <= 1:
            raise ConfigError(f"labeled ratio must lie in (0, 1], got {self.labeled_ratio}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")


@dataclass
class Split:
    """Result of a labeled/unlabeled split.

    ``hidden`` holds the withheld poles of rows moved into ``U``; it is for
    evaluation only and never handed to the semi-supervised learners.
    """

    L: LearningDataset
    U: LearningDataset
    hidden: dict[str, DimensionLabel] = field(default_factory=dict)
    dimension: Dimension = Dimension.PROCESSING

    def restore(self) -> dict[str, DimensionLabel]:
        """Re-attach withheld labels: the original labeled set for the dimension."""
        return {**self.L.labels[self.dimension], **self.hidden}


def split_labeled_unlabeled(
    dataset: LearningDataset, dimension: Dimension, spec: SplitSpec
) -> Split:
    """Keep ``round(r * n_labeled)`` labeled rows in L; the rest join U unlabeled.

    U also contains every row that had no label for ``dimension`` to begin
    with.  Rows of L and U keep their dataset order.
    """
    labeled_idx = dataset.labeled_indices(dimension)
    if not labeled_idx:
        raise DataError(f"no labeled rows for {dimension.value}")
    n_lab = round_half_up(spec.labeled_ratio * len(labeled_idx))
    if n_lab == 0:
        raise DataError(
            f"labeled ratio {spec.labeled_ratio} of {len(labeled_idx)} labeled rows leaves L empty"
        )
    rng = Rng(spec.seed)
    y = dataset.y(dimension)
    if spec.stratified:
        groups = [[i for i in labeled_idx if y[i] > 0], [i for i in labeled_idx if y[i] < 0]]
        quotas = largest_remainder(n_lab, [len(g) for g in groups])
        chosen = []
        for g, q in zip(groups, quotas):
            chosen.extend(rng.sample(g, q))
    else:
        chosen = rng.sample(labeled_idx, n_lab)
    in_L = set(chosen)
    L_idx = sorted(in_L)
    U_idx = [i for i in range(dataset.n_rows) if i not in in_L]
    full_labels = dataset.labels[dimension]
    U = dataset.subset(U_idx)
    hidden = {u: full_labels[u] for u in U.user_ids if u in full_labels}
    U = U.without_labels(dimension)
    return Split(dataset.subset(L_idx), U, hidden, dimension)


@dataclass
class FoldPlan:
    k: int
    assignments: list[int]

    def test_indices(self, fold: int) -> list[int]:
        return [i for i, f in enumerate(self.assignments) if f == fold]

    def train_indices(self, fold: int) -> list[int]:
        return [i for i, f in enumerate(self.assignments) if f != fold]

    def sizes(self) -> list[int]:
        return [self.assignments.count(f) for f in range(self.k)]

    def to_dict(self) -> dict:
        return {"k": self.k, "assignments": list(self.assignments)}


def make_folds(n_rows: int, k: int, labels: list[int] | np.ndarray | None = None, seed: int = 0) -> FoldPlan:
    """Assign rows to ``k`` folds of near-equal size.

    With ``labels`` the rows are shuffled within each class, the classes are
    laid end to end, and positions are dealt round-robin, which keeps every
    fold's class counts within one of its proportional share.
    """
    if k < 2:
        raise ConfigError(f"need k >= 2 folds, got {k}")
    if k > n_rows:
        raise DataError(f"cannot make {k} folds from {n_rows} rows")
    rng = Rng(seed)
    if labels is None:
        order = rng.permutation(n_rows)
    else:
        labels = list(labels)
        if len(labels) != n_rows:
            raise DataError(f"{len(labels)} labels for {n_rows} rows")
        order = []
        for cls in sorted(set(labels), reverse=True):
            members = [i for i, v in enumerate(labels) if v == cls]
            rng.shuffle(members)
            order.extend(members)
    assignments = [0] * n_rows
    for pos, row in enumerate(order):
        assignments[row] = pos % k
    return FoldPlan(k, assignments)
