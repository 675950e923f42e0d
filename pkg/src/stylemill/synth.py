"""Seeded synthetic learner datasets with known ground truth.

Each student gets a pole for one dimension, drawn with probability
``class_balance`` for the first pole, and one Poisson count per feature at
that pole's rate.  ``separation`` scales the gap between the two rate
vectors in log space around their geometric mean::

    m = sqrt(rate_first * rate_second)
    rate_pole(separation) = m * (rate_pole / m) ** separation

so 0 makes the poles indistinguishable, 1 uses the rates as given and
larger values push them further apart.  The ground truth for every row is
returned separately from the dataset, which only shows labels on a
``labeled_fraction`` of rows.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from stylemill.errors import ConfigError
from stylemill.features import Dimension, DimensionLabel, LearningDataset
from stylemill.rng import LaneRng, Rng, derive_seed, poisson_array
from stylemill.sampling import round_half_up

DEFAULT_FEATURES = (
    "course_reviews",
    "visual_materials",
    "reading_materials",
    "interactive_content",
    "quiz_submitted",
    "quiz_activity",
    "exercise_submit",
    "external_links",
    "forum_activity",
    "grade_reviews",
)
DEFAULT_RATES_FIRST = (6.0, 9.0, 4.0, 7.0, 5.0, 12.0, 3.0, 2.0, 8.0, 4.0)
DEFAULT_RATES_SECOND = (5.0, 6.0, 6.0, 5.0, 5.0, 10.0, 4.0, 2.5, 5.0, 4.0)
BAYES_DRAWS = 100_000
_BAYES_KEY = 0xBA7E5


@dataclass(frozen=True)
class SynthSpec:
    n_students: int = 1000
    feature_names: tuple[str, ...] = DEFAULT_FEATURES
    rates_first: tuple[float, ...] = DEFAULT_RATES_FIRST
    rates_second: tuple[float, ...] = DEFAULT_RATES_SECOND
    separation: float = 1.0
    class_balance: float = 0.5
    labeled_fraction: float = 1.0
    seed: int = 0
    dimension: Dimension = Dimension.PROCESSING
    id_prefix: str = "s"

    def __post_init__(self) -> None:
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "rates_first", tuple(float(r) for r in self.rates_first))
        object.__setattr__(self, "rates_second", tuple(float(r) for r in self.rates_second))
        if isinstance(self.dimension, str):
            object.__setattr__(self, "dimension", Dimension.parse(self.dimension))
        if self.n_students < 1:
            raise ConfigError(f"n_students must be >= 1, got {self.n_students}")
        d = len(self.feature_names)
        if d == 0:
            raise ConfigError("at least one feature is required")
        if len(set(self.feature_names)) != d:
            raise ConfigError("feature names must be unique")
        if len(self.rates_first) != d or len(self.rates_second) != d:
            raise ConfigError(
                f"rate vectors need one entry per feature ({d}), got "
                f"{len(self.rates_first)} and {len(self.rates_second)}"
            )
        for r in self.rates_first + self.rates_second:
            if not (r > 0 and math.isfinite(r)):
                raise ConfigError(f"rates must be finite and > 0, got {r}")
        if not (self.separation >= 0 and math.isfinite(self.separation)):
            raise ConfigError(f"separation must be finite and >= 0, got {self.separation}")
        if not 0 < self.class_balance < 1:
            raise ConfigError(f"class_balance must lie in (0, 1), got {self.class_balance}")
        if not 0 < self.labeled_fraction <= 1:
            raise ConfigError(f"labeled_fraction must lie in (0, 1], got {self.labeled_fraction}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    def effective_rates(self) -> tuple[np.ndarray, np.ndarray]:
        a = np.asarray(self.rates_first)
        b = np.asarray(self.rates_second)
        m = np.sqrt(a * b)
        return m * (a / m) ** self.separation, m * (b / m) ** self.separation

    def replace(self, **changes) -> "SynthSpec":
        data = {**self.__dict__, **changes}
        return SynthSpec(**data)

    def to_dict(self) -> dict:
        data = asdict(self)
        data["feature_names"] = list(self.feature_names)
        data["rates_first"] = list(self.rates_first)
        data["rates_second"] = list(self.rates_second)
        data["dimension"] = self.dimension.value
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "SynthSpec":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown synth spec fields: {sorted(unknown)}")
        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid synth spec: {exc}") from exc

    @classmethod
    def from_json(cls, path: str | Path) -> "SynthSpec":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ConfigError(f"synth spec not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"synth spec {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(data)


@dataclass
class SynthTruth:
    """Ground-truth labels for every generated row, kept apart from the dataset."""

    dimension: Dimension
    labels: dict[str, DimensionLabel] = field(default_factory=dict)

    def counts(self) -> dict[str, int]:
        first, second = self.dimension.poles
        n_first = sum(1 for l in self.labels.values() if l.pole == first)
        return {first: n_first, second: len(self.labels) - n_first}

    def signs(self, user_ids) -> np.ndarray:
        return np.array([self.labels[u].sign for u in user_ids], dtype=np.int64)

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension.value,
            "labels": {u: l.pole for u, l in self.labels.items()},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SynthTruth":
        dim = Dimension.parse(data["dimension"])
        return cls(dim, {u: DimensionLabel(dim, p) for u, p in data["labels"].items()})


def generate(spec: SynthSpec) -> tuple[LearningDataset, SynthTruth]:
    """Draw a dataset from ``spec``.

    Draw order: one uniform per student for the pole, then per feature the
    first-pole rows' counts followed by the second-pole rows', then the
    labeled rows as a partial shuffle.
    """
    rng = Rng(spec.seed)
    n = spec.n_students
    first = rng.uniforms(n) < spec.class_balance
    rate_a, rate_b = spec.effective_rates()
    X = np.zeros((n, len(spec.feature_names)), dtype=np.int64)
    rows_a = np.flatnonzero(first)
    rows_b = np.flatnonzero(~first)
    for f in range(len(spec.feature_names)):
        X[rows_a, f] = poisson_array(rng, float(rate_a[f]), len(rows_a))
        X[rows_b, f] = poisson_array(rng, float(rate_b[f]), len(rows_b))

    width = len(str(n - 1))
    users = [f"{spec.id_prefix}{i:0{width}d}" for i in range(n)]
    dim = spec.dimension
    truth = SynthTruth(dim, {u: DimensionLabel(dim, dim.pole_name(1 if f else -1)) for u, f in zip(users, first)})
    n_visible = min(n, max(1, round_half_up(spec.labeled_fraction * n)))
    visible = sorted(rng.sample(range(n), n_visible)) if n_visible < n else range(n)
    labels = {dim: {users[i]: truth.labels[users[i]] for i in visible}}
    dataset = LearningDataset(list(spec.feature_names), users, X.astype(np.float64), labels)
    return dataset, truth


def bayes_rate(spec: SynthSpec, draws: int = BAYES_DRAWS, seed: int | None = None) -> tuple[float, float]:
    """Monte Carlo Bayes-optimal accuracy under ``spec``; returns ``(estimate, standard_error)``.

    The optimal rule picks the first pole when the Poisson log-likelihood
    ratio plus the log prior ratio is >= 0.  ``seed`` defaults to one
    derived from ``spec.seed``.
    """
    if draws < 1:
        raise ConfigError("draws must be >= 1")
    lanes = LaneRng(seed if seed is not None else derive_seed(spec.seed, _BAYES_KEY))
    first = lanes.uniforms(draws) < spec.class_balance
    rate_a, rate_b = spec.effective_rates()
    weight = np.log(rate_a) - np.log(rate_b)
    llr = np.full(draws, math.log(spec.class_balance / (1 - spec.class_balance)) - float(np.sum(rate_a - rate_b)))
    n_a = int(first.sum())
    for f in range(len(rate_a)):
        counts = np.empty(draws, dtype=np.int64)
        counts[first] = poisson_array(lanes, float(rate_a[f]), n_a)
        counts[~first] = poisson_array(lanes, float(rate_b[f]), draws - n_a)
        llr += weight[f] * counts
    correct = (llr >= 0) == first
    p = float(correct.mean())
    return p, math.sqrt(p * (1 - p) / draws)


def write_truth(truth: SynthTruth, path: str | Path) -> None:
    Path(path).write_text(json.dumps(truth.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
