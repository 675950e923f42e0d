"""Confusion-matrix metrics, AUC, cross-validation, sweeps and method comparison.

The positive class is always the first pole of a dimension (label ``+1``).
Ratios that are 0/0 are reported as absent, with a reason, rather than
coerced to 0 or 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from stylemill.errors import ConfigError, DataError, NumericError
from stylemill.features import Dimension, LearningDataset
from stylemill.learners import SVMConfig, config_to_dict, fit_model, make_config, predict
from stylemill.rng import Rng, derive_seed
from stylemill.sampling import (
    SplitSpec,
    largest_remainder,
    make_folds,
    round_half_up,
    split_labeled_unlabeled,
    under_sample,
)
from stylemill.semisup import self_train, supervised, tri_train
from stylemill.stats import TTestResult, paired_t_test

METRICS = ("accuracy", "precision", "recall", "specificity", "auc")


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.tn + other.tn)

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn}


def confusion(predicted: Sequence[int], truth: Sequence[int]) -> ConfusionMatrix:
    p = np.asarray(predicted)
    t = np.asarray(truth)
    if len(p) != len(t):
        raise DataError(f"prediction/truth length mismatch ({len(p)} vs {len(t)})")
    if len(p) == 0:
        raise DataError("cannot build a confusion matrix from empty lists")
    pos_p, pos_t = p > 0, t > 0
    return ConfusionMatrix(
        tp=int(np.sum(pos_p & pos_t)),
        fp=int(np.sum(pos_p & ~pos_t)),
        fn=int(np.sum(~pos_p & pos_t)),
        tn=int(np.sum(~pos_p & ~pos_t)),
    )


@dataclass
class MetricReport:
    """Metric values (None when undefined, with the reason in ``absent``).

    Reports built by :func:`cross_validate` also carry the per-fold reports
    and the sample standard deviation of each metric across folds; their
    top-level values are the fold means.
    """

    accuracy: float | None = None
    precision: float | None = None
    recall: float | None = None
    specificity: float | None = None
    auc: float | None = None
    absent: dict[str, str] = field(default_factory=dict)
    folds: list["MetricReport"] = field(default_factory=list)
    std: dict[str, float | None] = field(default_factory=dict)
    confusion: ConfusionMatrix | None = None

    def get(self, name: str) -> float | None:
        return getattr(self, name)

    def values(self) -> dict[str, float | None]:
        return {m: self.get(m) for m in METRICS}

    def to_dict(self) -> dict:
        out: dict = {"values": self.values()}
        if self.absent:
            out["absent"] = dict(self.absent)
        if self.confusion is not None:
            out["confusion"] = self.confusion.to_dict()
        if self.folds:
            out["std"] = dict(self.std)
            out["folds"] = [f.to_dict() for f in self.folds]
        return out


def _ratio(num: int, den: int, name: str, reason: str, absent: dict) -> float | None:
    if den == 0:
        absent[name] = reason
        return None
    return num / den


def metrics(cm: ConfusionMatrix) -> MetricReport:
    if cm.total < 1:
        raise DataError("metrics need a non-empty confusion matrix")
    absent: dict[str, str] = {}
    report = MetricReport(
        accuracy=(cm.tp + cm.tn) / cm.total,
        precision=_ratio(cm.tp, cm.tp + cm.fp, "precision", "no positive predictions", absent),
        recall=_ratio(cm.tp, cm.tp + cm.fn, "recall", "no positive instances", absent),
        specificity=_ratio(cm.tn, cm.tn + cm.fp, "specificity", "no negative instances", absent),
        absent=absent,
        confusion=cm,
    )
    absent["auc"] = "scores not supplied"
    return report


def auc_roc(scores: Sequence[float], truth: Sequence[int]) -> float:
    """Mann-Whitney AUC: P(score_pos > score_neg) + 0.5 P(tie).

    Computed from mid-ranks of the pooled scores.
    """
    s = np.asarray(scores, dtype=np.float64)
    t = np.asarray(truth)
    if len(s) != len(t):
        raise DataError("scores and truth differ in length")
    n_pos = int(np.sum(t > 0))
    n_neg = len(t) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("AUC needs both classes in the truth labels")
    order = np.argsort(s, kind="stable")
    sorted_s = s[order]
    ranks = np.empty(len(s))
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and sorted_s[j + 1] == sorted_s[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    rank_sum = math.fsum(ranks[t > 0])
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def score_report(pred, scores, truth) -> MetricReport:
    """Metrics plus AUC (absent when the truth is single-class)."""
    rep = metrics(confusion(pred, truth))
    rep.absent.pop("auc", None)
    try:
        rep.auc = auc_roc(scores, truth)
    except DataError:
        rep.absent["auc"] = "single-class truth"
    return rep


def _aggregate(folds: list[MetricReport]) -> MetricReport:
    out = MetricReport(folds=folds)
    for name in METRICS:
        vals = [f.get(name) for f in folds if f.get(name) is not None]
        if not vals:
            out.absent[name] = "undefined in every fold"
            out.std[name] = None
            continue
        mean = math.fsum(vals) / len(vals)
        setattr(out, name, mean)
        if len(vals) >= 2:
            out.std[name] = math.sqrt(math.fsum((v - mean) ** 2 for v in vals) / (len(vals) - 1))
        else:
            out.std[name] = None
    total = folds[0].confusion
    for f in folds[1:]:
        total = total + f.confusion
    out.confusion = total
    return out


def cross_validate(
    dataset: LearningDataset,
    dimension: Dimension,
    kind: str,
    config=None,
    k: int = 10,
    seed: int = 0,
    stratified: bool = True,
) -> MetricReport:
    """k-fold CV over the rows labeled for ``dimension``.

    Fold ``f`` trains with seed ``derive_seed(seed, f)``.
    """
    data = dataset.labeled(dimension)
    y = data.y(dimension)
    plan = make_folds(data.n_rows, k, y if stratified else None, seed)
    config = config if config is not None else make_config(kind)
    folds = []
    for f in range(plan.k):
        tr, te = plan.train_indices(f), plan.test_indices(f)
        if len(set(y[tr].tolist())) < 2:
            raise DataError(
                f"fold {f} has a single-class training set; use stratified folds or fewer folds"
            )
        model = fit_model(kind, data.X[tr], y[tr], config, seed=derive_seed(seed, f))
        pred, scores = predict(model, data.X[te])
        folds.append(score_report(pred, scores, y[te]))
    return _aggregate(folds)


def self_taught_accuracy(n_labeled: int, n_correct_predictions: int, total: int) -> float:
    """(labeled count + correct predictions on the unlabeled rows) / total."""
    if total < 1:
        raise DataError("total must be >= 1")
    if n_labeled < 0 or n_correct_predictions < 0:
        raise DataError("counts must be non-negative")
    if n_labeled + n_correct_predictions > total:
        raise DataError(
            f"labeled ({n_labeled}) + correct ({n_correct_predictions}) exceeds total ({total})"
        )
    return (n_labeled + n_correct_predictions) / total


# --------------------------------------------------------------------------
# held-out protocol shared by sweeps and comparisons


def holdout_split(
    dataset: LearningDataset, dimension: Dimension, test_fraction: float, seed: int
) -> tuple[LearningDataset, LearningDataset | None]:
    """Set aside a pole-stratified test set from the labeled rows.

    Returns ``(pool, test)``; the pool keeps every other row, labeled or
    not.  ``test_fraction == 0`` returns ``(dataset, None)``.
    """
    if not 0 <= test_fraction < 1:
        raise ConfigError(f"test fraction must lie in [0, 1), got {test_fraction}")
    if test_fraction == 0:
        return dataset, None
    y = dataset.y(dimension)
    groups = [np.flatnonzero(y > 0).tolist(), np.flatnonzero(y < 0).tolist()]
    n_test = round_half_up(test_fraction * (len(groups[0]) + len(groups[1])))
    quotas = largest_remainder(n_test, [len(g) for g in groups])
    rng = Rng(seed)
    test_idx = sorted(i for g, q in zip(groups, quotas) for i in rng.sample(g, q))
    if not test_idx:
        raise DataError("test fraction leaves an empty test set")
    chosen = set(test_idx)
    pool_idx = [i for i in range(dataset.n_rows) if i not in chosen]
    return dataset.subset(pool_idx), dataset.subset(test_idx)


@dataclass
class Protocol:
    """Shared knobs for sweeps and comparisons."""

    labeling_config: SVMConfig = field(default_factory=SVMConfig)
    final_configs: dict[str, object] = field(default_factory=dict)
    test_fraction: float = 0.2
    stratified: bool = True
    undersample: bool = False

    def final_config(self, kind: str):
        return self.final_configs.get(kind) or make_config(kind)

    def to_dict(self) -> dict:
        return {
            "labeling": config_to_dict("svm", self.labeling_config),
            "final": {k: config_to_dict(k, c) for k, c in sorted(self.final_configs.items())},
            "test_fraction": self.test_fraction,
            "stratified": self.stratified,
            "undersample": self.undersample,
        }


@dataclass
class PreparedSplit:
    L: LearningDataset
    U: LearningDataset
    hidden: dict
    test: LearningDataset | None


def prepare_split(dataset, dimension, ratio, seed, protocol: Protocol) -> PreparedSplit:
    pool, test = holdout_split(dataset, dimension, protocol.test_fraction, derive_seed(seed, 1))
    split = split_labeled_unlabeled(pool, dimension, SplitSpec(ratio, derive_seed(seed, 2), protocol.stratified))
    L = split.L
    if protocol.undersample:
        L = under_sample(L, dimension, derive_seed(seed, 3))
    return PreparedSplit(L, split.U, split.hidden, test)


def evaluate_model(model, data: LearningDataset, dimension: Dimension) -> MetricReport:
    pred, scores = predict(model, data.X)
    return score_report(pred, scores, data.y(dimension))


def hidden_evaluation(run, hidden: dict, dimension: Dimension) -> dict:
    """Accuracy_ST over L' + hidden rows, and plain accuracy on the hidden rows."""
    d_lab = run.d_prime.labels[dimension]
    correct = sum(1 for u, lab in hidden.items() if d_lab[u].pole == lab.pole)
    out = {
        "n_hidden": len(hidden),
        "accuracy_st": self_taught_accuracy(run.n_labeled, correct, run.n_labeled + len(hidden)),
        "hidden_accuracy": correct / len(hidden) if hidden else None,
    }
    return out


def ratio_sweep(
    dataset: LearningDataset,
    dimension: Dimension,
    ratios: Sequence[float],
    kinds: Sequence[str],
    seeds: Sequence[int],
    protocol: Protocol | None = None,
) -> dict:
    """Self-train at each labeled ratio and score the final model.

    Each (ratio, seed) cell holds out a stratified test set, splits the
    remaining pool into L and U, self-trains per kind, and records test
    metrics for the final model and for the L-only baseline, plus the
    self-taught accuracy over L and the withheld rows.
    """
    protocol = protocol or Protocol()
    rows = []
    for ratio in ratios:
        for seed in seeds:
            prep = prepare_split(dataset, dimension, ratio, seed, protocol)
            for kind in kinds:
                cfg = protocol.final_config(kind)
                run = self_train(prep.L, prep.U, dimension, kind, cfg, protocol.labeling_config, seed)
                base = supervised(prep.L, dimension, kind, cfg, seed)
                row = {
                    "dimension": dimension.value,
                    "ratio": ratio,
                    "kind": kind,
                    "seed": seed,
                    "n_L": run.n_labeled,
                    "n_U": run.n_unlabeled,
                }
                row.update(hidden_evaluation(run, prep.hidden, dimension))
                if prep.test is not None:
                    row["n_test"] = prep.test.n_rows
                    row["ssl"] = evaluate_model(run.final_model, prep.test, dimension).values()
                    row["sl"] = evaluate_model(base, prep.test, dimension).values()
                rows.append(row)
    return {
        "report": "ratio_sweep",
        "dimension": dimension.value,
        "ratios": list(ratios),
        "kinds": list(kinds),
        "seeds": list(seeds),
        "protocol": protocol.to_dict(),
        "rows": rows,
    }


def sweep_means(report: dict, metric: str = "accuracy", arm: str = "ssl") -> dict[tuple[float, str], float]:
    """Mean of ``row[arm][metric]`` per (ratio, kind), skipping absent values."""
    acc: dict[tuple[float, str], list[float]] = {}
    for row in report["rows"]:
        v = row.get(arm, {}).get(metric)
        if v is not None:
            acc.setdefault((row["ratio"], row["kind"]), []).append(v)
    return {key: math.fsum(v) / len(v) for key, v in acc.items()}


TTEST_METRICS = ("accuracy", "precision", "recall")


def _ttest_cell(a: list, b: list) -> dict:
    pairs = [(x, y) for x, y in zip(a, b) if x is not None and y is not None]
    try:
        res: TTestResult = paired_t_test([p[0] for p in pairs], [p[1] for p in pairs])
    except (NumericError, DataError) as exc:
        return {"error": str(exc), "n_pairs": len(pairs)}
    return res.to_dict()


@dataclass
class CompareSpec:
    ratio: float
    seeds: Sequence[int]
    kind: str = "svm"
    tri_base: list | None = None
    protocol: Protocol = field(default_factory=Protocol)


def compare_methods(dataset: LearningDataset, dimension: Dimension, spec: CompareSpec) -> dict:
    """Supervised (L only) vs self-training vs tri-training on identical splits.

    Methods are paired per seed: each seed gives one held-out test set on
    which all three are scored.  The t-tests use ``first - second`` as the
    difference, so "SL vs SSL" is negative when self-training is better.
    """
    protocol = spec.protocol
    if protocol.test_fraction <= 0:
        raise ConfigError("method comparison needs a held-out test set (test_fraction > 0)")
    cfg = protocol.final_config(spec.kind)
    per_seed = []
    for seed in spec.seeds:
        prep = prepare_split(dataset, dimension, spec.ratio, seed, protocol)
        sl = supervised(prep.L, dimension, spec.kind, cfg, seed)
        run = self_train(prep.L, prep.U, dimension, spec.kind, cfg, protocol.labeling_config, seed)
        tt = tri_train(prep.L, prep.U, dimension, spec.tri_base, seed=seed)
        per_seed.append(
            {
                "seed": seed,
                "SL": evaluate_model(sl, prep.test, dimension).values(),
                "SSL": evaluate_model(run.final_model, prep.test, dimension).values(),
                "TT": evaluate_model(tt, prep.test, dimension).values(),
            }
        )
    methods = ("SL", "SSL", "TT")
    means = {}
    for m in methods:
        means[m] = {}
        for metric in METRICS:
            vals = [r[m][metric] for r in per_seed if r[m][metric] is not None]
            means[m][metric] = math.fsum(vals) / len(vals) if vals else None
    tests = {}
    for a, b in (("SL", "SSL"), ("TT", "SSL"), ("SL", "TT")):
        tests[f"{a} vs {b}"] = {
            metric: _ttest_cell([r[a][metric] for r in per_seed], [r[b][metric] for r in per_seed])
            for metric in TTEST_METRICS
        }
    return {
        "report": "compare",
        "dimension": dimension.value,
        "ratio": spec.ratio,
        "kind": spec.kind,
        "seeds": list(spec.seeds),
        "pairing": "per seed (one held-out test set per seed)",
        "protocol": protocol.to_dict(),
        "per_seed": per_seed,
        "means": means,
        "ttests": tests,
    }
