"""Behavioural feature counts, ILS scoring, and the learning dataset.

Events are mapped to feature names by an ordered list of substring rules
(first match wins) and counted per student.  Questionnaire answers are
scored per Felder-Silverman dimension and reduced to the pole used as the
classification target.
"""

from __future__ import annotations

import csv
import enum
import io
import json
from collections import OrderedDict
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Sequence, TextIO

import numpy as np

from stylemill.errors import ConfigError, DataError
from stylemill.ingest import EventRecord

DATASET_SCHEMA = "stylemill.dataset/1"
ILS_ITEMS = 44
ITEMS_PER_DIMENSION = 11


class Dimension(enum.Enum):
    PROCESSING = "Processing"
    INPUT = "Input"
    UNDERSTANDING = "Understanding"
    PERCEPTION = "Perception"

    @property
    def poles(self) -> tuple[str, str]:
        return _POLES[self]

    @property
    def abbrev(self) -> str:
        return _ABBREV[self]

    def pole_name(self, sign: int) -> str:
        return self.poles[0] if sign > 0 else self.poles[1]

    def pole_sign(self, name: str) -> int:
        key = name.strip().lower()
        if key == self.poles[0].lower():
            return 1
        if key == self.poles[1].lower():
            return -1
        raise DataError(f"{name!r} is not a pole of {self.value} {self.poles}")

    @classmethod
    def parse(cls, text: str) -> "Dimension":
        key = text.strip().lower()
        for dim in cls:
            names = {dim.value.lower(), dim.name.lower(), dim.abbrev.lower()}
            names.update(p.lower() for p in dim.poles)
            if key in names:
                return dim
        raise ConfigError(f"unknown dimension {text!r}; expected one of {[d.value for d in cls]}")


_POLES = {
    Dimension.PROCESSING: ("Active", "Reflective"),
    Dimension.INPUT: ("Visual", "Verbal"),
    Dimension.UNDERSTANDING: ("Sequential", "Global"),
    Dimension.PERCEPTION: ("Sensing", "Intuitive"),
}
_ABBREV = {
    Dimension.PROCESSING: "PS",
    Dimension.INPUT: "IP",
    Dimension.UNDERSTANDING: "US",
    Dimension.PERCEPTION: "PR",
}

DIMENSIONS: tuple[Dimension, ...] = tuple(Dimension)


# --------------------------------------------------------------------------
# feature mapping


MATCH_FIELDS = ("event_name", "component", "event_context")


@dataclass(frozen=True)
class Rule:
    field: str
    contains: str
    feature: str

    def matches(self, record: EventRecord) -> bool:
        return self.contains.lower() in getattr(record, self.field).lower()


@dataclass
class FeatureMapping:
    rules: list[Rule]
    feature_names: list[str]

    def __post_init__(self) -> None:
        if not self.feature_names:
            raise ConfigError("feature mapping needs at least one feature name")
        if len(set(self.feature_names)) != len(self.feature_names):
            raise ConfigError("feature names must be distinct")
        known = set(self.feature_names)
        for i, rule in enumerate(self.rules):
            if rule.field not in MATCH_FIELDS:
                raise ConfigError(f"rule {i}: field must be one of {MATCH_FIELDS}, got {rule.field!r}")
            if rule.feature not in known:
                raise ConfigError(f"rule {i}: feature {rule.feature!r} is not in feature_names")
            if not rule.contains:
                raise ConfigError(f"rule {i}: empty 'contains' would match everything")

    def classify(self, record: EventRecord) -> int | None:
        """Index of the feature the first matching rule targets, or None."""
        for rule in self.rules:
            if rule.matches(record):
                return self._index[rule.feature]
        return None

    @property
    def _index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.feature_names)}

    def to_dict(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "rules": [
                {"field": r.field, "contains": r.contains, "feature": r.feature} for r in self.rules
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FeatureMapping":
        try:
            rules = [Rule(r["field"], r["contains"], r["feature"]) for r in data["rules"]]
            names = data.get("feature_names")
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed mapping file: {exc}") from None
        if names is None:
            names = list(OrderedDict.fromkeys(r.feature for r in rules))
        return cls(rules, list(names))

    @classmethod
    def from_json(cls, text: str) -> "FeatureMapping":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"mapping file is not valid JSON: {exc}") from None


def default_mapping() -> FeatureMapping:
    """Mapping shipped with the package, covering common Moodle learning objects.

    It is an approximation chosen for Moodle 3.x component names, not a
    reconstruction of any particular course's feature schema.
    """
    text = resources.files("stylemill.data").joinpath("default_mapping.json").read_text("utf-8")
    return FeatureMapping.from_json(text)


@dataclass
class StudentProfile:
    user_id: str
    counts: np.ndarray
    unmapped_events: int = 0

    @property
    def total_events(self) -> int:
        return int(self.counts.sum()) + self.unmapped_events


def build_profiles(records: Iterable[EventRecord], mapping: FeatureMapping) -> list[StudentProfile]:
    """One profile per distinct user, in order of first appearance."""
    d = len(mapping.feature_names)
    profiles: dict[str, StudentProfile] = {}
    index = mapping._index
    for rec in records:
        prof = profiles.get(rec.user_id)
        if prof is None:
            prof = profiles[rec.user_id] = StudentProfile(rec.user_id, np.zeros(d, dtype=np.int64))
        for rule in mapping.rules:
            if rule.matches(rec):
                prof.counts[index[rule.feature]] += 1
                break
        else:
            prof.unmapped_events += 1
    return list(profiles.values())


# --------------------------------------------------------------------------
# ILS questionnaire


@dataclass(frozen=True)
class ILSResponse:
    """44 answers, 11 per dimension in ``DIMENSIONS`` order when ``layout='grouped'``.

    With ``layout='interleaved'`` item ``i`` (0-based) belongs to dimension
    ``i % 4``, which is the order of the printed questionnaire.
    """

    user_id: str
    answers: str
    layout: str = "grouped"

    def __post_init__(self) -> None:
        if len(self.answers) != ILS_ITEMS:
            raise DataError(
                f"user {self.user_id!r}: expected {ILS_ITEMS} answers, got {len(self.answers)}"
            )
        for pos, sym in enumerate(self.answers, start=1):
            if sym not in "ab":
                raise DataError(f"user {self.user_id!r}: answer {pos} is {sym!r}, expected 'a' or 'b'")
        if self.layout not in ("grouped", "interleaved"):
            raise ConfigError(f"unknown ILS layout {self.layout!r}")

    def items_for(self, dim: Dimension) -> str:
        k = DIMENSIONS.index(dim)
        if self.layout == "grouped":
            return self.answers[k * ITEMS_PER_DIMENSION : (k + 1) * ITEMS_PER_DIMENSION]
        return self.answers[k::4]


def score_ils(response: ILSResponse) -> dict[Dimension, int]:
    """Per dimension, (#a - #b) over its eleven items."""
    scores = {}
    for dim in DIMENSIONS:
        items = response.items_for(dim)
        scores[dim] = items.count("a") - items.count("b")
    return scores


STRENGTHS = ("Balanced", "Moderate", "Strong")


@dataclass(frozen=True)
class DimensionLabel:
    dimension: Dimension
    pole: str
    score: int | None = None
    strength: str | None = None

    @property
    def sign(self) -> int:
        return self.dimension.pole_sign(self.pole)

    def to_dict(self) -> dict:
        out: dict = {"pole": self.pole}
        if self.score is not None:
            out["score"] = self.score
            out["strength"] = self.strength
        return out

    @classmethod
    def from_dict(cls, dim: Dimension, data: dict | str) -> "DimensionLabel":
        if isinstance(data, str):
            data = {"pole": data}
        if data.get("score") is not None:
            return label_from_score(dim, int(data["score"]))
        sign = dim.pole_sign(data["pole"])
        return cls(dim, dim.pole_name(sign))


def label_from_score(dimension: Dimension, score: int) -> DimensionLabel:
    if isinstance(score, bool) or int(score) != score:
        raise DataError(f"ILS score must be an integer, got {score!r}")
    score = int(score)
    if score % 2 == 0 or abs(score) > ITEMS_PER_DIMENSION:
        raise DataError(f"ILS score must be odd and within [-11, 11], got {score}")
    mag = abs(score)
    strength = "Balanced" if mag <= 3 else "Moderate" if mag <= 7 else "Strong"
    return DimensionLabel(dimension, dimension.pole_name(1 if score > 0 else -1), score, strength)


def read_ils_file(source: TextIO | str, layout: str = "grouped") -> list[ILSResponse]:
    """Rows of ``user_id`` followed by 44 a/b answers.

    Answers may be given as 44 separate columns or as one 44-character
    column.  A header row is recognised (and skipped) when its second field
    is not a single answer symbol.
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    out = []
    for line_no, row in enumerate(csv.reader(source), start=1):
        if not row or not any(c.strip() for c in row):
            continue
        cells = [c.strip().lower() for c in row]
        if line_no == 1 and len(cells) > 1 and cells[1] not in ("a", "b") and len(cells[1]) != ILS_ITEMS:
            continue
        answers = "".join(cells[1:])
        out.append(ILSResponse(row[0].strip(), answers, layout))
    return out


def labels_from_ils(responses: Iterable[ILSResponse]) -> dict[str, list[DimensionLabel]]:
    out = {}
    for resp in responses:
        scores = score_ils(resp)
        out[resp.user_id] = [label_from_score(dim, scores[dim]) for dim in DIMENSIONS]
    return out


# --------------------------------------------------------------------------
# dataset


@dataclass
class LearningDataset:
    """Feature matrix plus, per dimension, a partial map user_id -> label.

    Rows without a label for a dimension are that dimension's unlabeled pool.
    """

    feature_names: list[str]
    user_ids: list[str]
    X: np.ndarray
    labels: dict[Dimension, dict[str, DimensionLabel]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.X = np.asarray(self.X)
        if self.X.ndim != 2:
            self.X = self.X.reshape(len(self.user_ids), len(self.feature_names))
        for dim in DIMENSIONS:
            self.labels.setdefault(dim, {})
        self.validate()

    def validate(self) -> None:
        n, d = self.X.shape
        if n != len(self.user_ids):
            raise DataError(f"{len(self.user_ids)} user ids for {n} feature rows")
        if d != len(self.feature_names):
            raise DataError(f"{len(self.feature_names)} feature names for width {d}")
        if len(set(self.user_ids)) != n:
            raise DataError("row user ids must be unique")
        known = set(self.user_ids)
        for dim, lab in self.labels.items():
            extra = set(lab) - known
            if extra:
                raise DataError(f"{dim.value} labels reference unknown users {sorted(extra)[:5]}")

    @property
    def n_rows(self) -> int:
        return len(self.user_ids)

    def y(self, dim: Dimension) -> np.ndarray:
        """+1 first pole, -1 second pole, 0 unlabeled."""
        lab = self.labels[dim]
        return np.array([lab[u].sign if u in lab else 0 for u in self.user_ids], dtype=np.int64)

    def labeled_indices(self, dim: Dimension) -> list[int]:
        lab = self.labels[dim]
        return [i for i, u in enumerate(self.user_ids) if u in lab]

    def subset(self, indices: Sequence[int]) -> "LearningDataset":
        indices = list(indices)
        users = [self.user_ids[i] for i in indices]
        keep = set(users)
        labels = {dim: {u: l for u, l in lab.items() if u in keep} for dim, lab in self.labels.items()}
        X = self.X[indices] if indices else np.zeros((0, len(self.feature_names)), dtype=self.X.dtype)
        return LearningDataset(list(self.feature_names), users, X, labels)

    def labeled(self, dim: Dimension) -> "LearningDataset":
        return self.subset(self.labeled_indices(dim))

    def without_labels(self, dim: Dimension) -> "LearningDataset":
        labels = dict(self.labels)
        labels[dim] = {}
        return LearningDataset(list(self.feature_names), list(self.user_ids), self.X.copy(), labels)

    def with_labels(self, dim: Dimension, labels: dict[str, DimensionLabel]) -> "LearningDataset":
        merged = dict(self.labels)
        merged[dim] = {**self.labels[dim], **labels}
        return LearningDataset(list(self.feature_names), list(self.user_ids), self.X.copy(), merged)

    def class_counts(self, dim: Dimension) -> dict[str, int]:
        counts = {p: 0 for p in dim.poles}
        for lab in self.labels[dim].values():
            counts[lab.pole] += 1
        return counts

    @staticmethod
    def concat(parts: Sequence["LearningDataset"]) -> "LearningDataset":
        names = parts[0].feature_names
        for p in parts[1:]:
            if p.feature_names != names:
                raise DataError("cannot concatenate datasets with different feature schemas")
        users = [u for p in parts for u in p.user_ids]
        X = np.vstack([p.X for p in parts]) if parts else np.zeros((0, len(names)))
        labels = {dim: {} for dim in DIMENSIONS}
        for p in parts:
            for dim, lab in p.labels.items():
                labels[dim].update(lab)
        return LearningDataset(list(names), users, X, labels)

    def to_dict(self) -> dict:
        return {
            "schema": DATASET_SCHEMA,
            "feature_names": list(self.feature_names),
            "rows": [
                {"user_id": u, "counts": [int(v) for v in row]}
                for u, row in zip(self.user_ids, self.X.tolist())
            ],
            "labels": {
                dim.value: {u: lab.to_dict() for u, lab in self.labels[dim].items()}
                for dim in DIMENSIONS
                if self.labels[dim]
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LearningDataset":
        if data.get("schema") != DATASET_SCHEMA:
            raise DataError(f"unsupported dataset schema {data.get('schema')!r}")
        names = list(data["feature_names"])
        users = [r["user_id"] for r in data["rows"]]
        X = np.array([r["counts"] for r in data["rows"]], dtype=np.int64).reshape(len(users), len(names))
        labels = {}
        for key, lab in data.get("labels", {}).items():
            dim = Dimension.parse(key)
            labels[dim] = {u: DimensionLabel.from_dict(dim, v) for u, v in lab.items()}
        return cls(names, users, X, labels)


@dataclass
class AssemblyRejects:
    unknown_users: list[str] = field(default_factory=list)


def assemble_dataset(
    profiles: Sequence[StudentProfile],
    labels: dict[str, Iterable[DimensionLabel]],
    feature_names: Sequence[str],
) -> tuple[LearningDataset, AssemblyRejects]:
    users = [p.user_id for p in profiles]
    known = set(users)
    X = (
        np.vstack([p.counts for p in profiles])
        if profiles
        else np.zeros((0, len(feature_names)), dtype=np.int64)
    )
    rejects = AssemblyRejects()
    by_dim: dict[Dimension, dict[str, DimensionLabel]] = {dim: {} for dim in DIMENSIONS}
    for user, labs in labels.items():
        if user not in known:
            rejects.unknown_users.append(user)
            continue
        for lab in labs:
            by_dim[lab.dimension][user] = lab
    return LearningDataset(list(feature_names), users, X, by_dim), rejects
