"""End-to-end runs: ingest, features, split, self-training and evaluation per dimension.

A run is driven by a :class:`PipelineConfig` (one JSON file) and leaves
every intermediate artifact on disk next to a manifest that records the
resolved config, input digests, versions, stage timings and output digests.
Feeding that manifest to :func:`rerun` repeats the run and checks that every
output is byte-identical.
"""

from __future__ import annotations

import platform
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

import stylemill
from stylemill.charts import emit_chart
from stylemill.errors import ConfigError, DataError, StylemillError
from stylemill.evaluation import MetricReport, cross_validate, hidden_evaluation
from stylemill.features import (
    DIMENSIONS,
    Dimension,
    FeatureMapping,
    LearningDataset,
    assemble_dataset,
    build_profiles,
    default_mapping,
    labels_from_ils,
    read_ils_file,
)
from stylemill.ingest import ParseOptions, load_alias_map, parse_event_log, remove_incomplete_users, write_events
from stylemill.learners import KINDS, config_to_dict, make_config
from stylemill.reports import read_json, sha256_file, write_csv, write_json
from stylemill.rng import derive_seed
from stylemill.sampling import SplitSpec, split_labeled_unlabeled, under_sample
from stylemill.semisup import self_train

MANIFEST_SCHEMA = "stylemill.manifest/1"
EMIT_FORMATS = ("json", "csv", "svg")
DEFAULT_MAPPING = "default"


def _dimensions(value) -> list[Dimension]:
    if value in (None, "all"):
        return list(DIMENSIONS)
    if isinstance(value, str):
        value = [value]
    dims = [Dimension.parse(v) for v in value]
    if len(set(dims)) != len(dims):
        raise ConfigError("dimensions listed twice")
    return dims


@dataclass
class PipelineConfig:
    seed: int
    events: Path
    ils: Path
    out_dir: Path
    mapping: Path | str = DEFAULT_MAPPING
    aliases: Path | None = None
    dimensions: list[Dimension] = field(default_factory=lambda: list(DIMENSIONS))
    min_events: int = 1
    strict: bool = False
    ils_layout: str = "grouped"
    labeled_ratio: float = 0.5
    stratified: bool = True
    undersample: bool = False
    labeling: dict = field(default_factory=dict)
    final: str = "svm"
    final_config: dict = field(default_factory=dict)
    k: int = 10
    emit: list[str] = field(default_factory=lambda: list(EMIT_FORMATS))

    def __post_init__(self) -> None:
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be an explicit 64-bit unsigned integer, got {self.seed!r}")
        if self.final not in KINDS:
            raise ConfigError(f"unknown final model {self.final!r}; choose from {', '.join(KINDS)}")
        if self.min_events < 0:
            raise ConfigError("min_events must be >= 0")
        if self.k < 2:
            raise ConfigError(f"k must be >= 2, got {self.k}")
        bad = set(self.emit) - set(EMIT_FORMATS)
        if bad:
            raise ConfigError(f"unknown emit formats {sorted(bad)}")
        if not self.dimensions:
            raise ConfigError("no dimensions selected")
        SplitSpec(self.labeled_ratio, self.seed, self.stratified)
        make_config("svm", self.labeling)
        make_config(self.final, self.final_config)

    @classmethod
    def from_dict(cls, data: dict, base_dir: str | Path = ".") -> "PipelineConfig":
        """Build from the JSON layout; relative paths resolve against ``base_dir``."""
        if not isinstance(data, dict):
            raise ConfigError("pipeline config must be a JSON object")
        if "seed" not in data:
            raise ConfigError("pipeline config needs an explicit 'seed'")
        base = Path(base_dir)
        paths = data.get("paths", {})
        for key in ("events", "ils", "out_dir"):
            if key not in paths:
                raise ConfigError(f"pipeline config is missing paths.{key}")

        def resolve(p):
            return None if p is None else (base / p).resolve()

        mapping = paths.get("mapping", DEFAULT_MAPPING)
        ingest = data.get("ingest", {})
        split = data.get("split", {})
        models = data.get("models", {})
        ev = data.get("eval", {})
        try:
            return cls(
                seed=data["seed"],
                events=resolve(paths["events"]),
                ils=resolve(paths["ils"]),
                out_dir=resolve(paths["out_dir"]),
                mapping=mapping if mapping == DEFAULT_MAPPING else resolve(mapping),
                aliases=resolve(ingest.get("aliases")),
                dimensions=_dimensions(data.get("dimensions", "all")),
                min_events=int(ingest.get("min_events", 1)),
                strict=bool(ingest.get("strict", False)),
                ils_layout=data.get("ils_layout", "grouped"),
                labeled_ratio=float(split.get("labeled_ratio", 0.5)),
                stratified=bool(split.get("stratified", True)),
                undersample=bool(split.get("undersample", False)),
                labeling=dict(models.get("labeling", {})),
                final=models.get("final", "svm"),
                final_config=dict(models.get("final_config", {})),
                k=int(ev.get("k", 10)),
                emit=list(data.get("emit", EMIT_FORMATS)),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid pipeline config: {exc}") from None

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        path = Path(path)
        return cls.from_dict(read_json(path, "pipeline config"), path.parent)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "paths": {
                "events": str(self.events),
                "ils": str(self.ils),
                "out_dir": str(self.out_dir),
                "mapping": str(self.mapping),
            },
            "dimensions": [d.value for d in self.dimensions],
            "ingest": {
                "min_events": self.min_events,
                "strict": self.strict,
                "aliases": None if self.aliases is None else str(self.aliases),
            },
            "ils_layout": self.ils_layout,
            "split": {
                "labeled_ratio": self.labeled_ratio,
                "stratified": self.stratified,
                "undersample": self.undersample,
            },
            "models": {
                "labeling": config_to_dict("svm", make_config("svm", self.labeling)),
                "final": self.final,
                "final_config": config_to_dict(self.final, make_config(self.final, self.final_config)),
            },
            "eval": {"k": self.k},
            "emit": list(self.emit),
        }

    def input_paths(self) -> dict[str, Path]:
        out = {"events": self.events, "ils": self.ils}
        if self.mapping != DEFAULT_MAPPING:
            out["mapping"] = Path(self.mapping)
        if self.aliases is not None:
            out["aliases"] = self.aliases
        return out

    def check_inputs(self) -> None:
        for name, path in self.input_paths().items():
            if not Path(path).is_file():
                raise ConfigError(f"{name} file not found: {path}")

    def load_mapping(self) -> FeatureMapping:
        if self.mapping == DEFAULT_MAPPING:
            return default_mapping()
        return FeatureMapping.from_json(Path(self.mapping).read_text(encoding="utf-8"))


def cv_summary(rep: MetricReport) -> dict:
    return {
        "mean": rep.values(),
        "std": dict(rep.std),
        "folds": [f.values() for f in rep.folds],
        "pooled_confusion": rep.confusion.to_dict() if rep.confusion else None,
        "absent": dict(rep.absent),
    }


def run_dimension(dataset: LearningDataset, dim: Dimension, config: PipelineConfig) -> tuple[dict, dict]:
    """Split, self-train and evaluate one dimension; returns ``(report, run_record)``."""
    index = DIMENSIONS.index(dim)
    split = split_labeled_unlabeled(
        dataset, dim, SplitSpec(config.labeled_ratio, derive_seed(config.seed, index, 1), config.stratified)
    )
    L = split.L
    if config.undersample:
        L = under_sample(L, dim, derive_seed(config.seed, index, 2))
    labeling_cfg = make_config("svm", config.labeling)
    final_cfg = make_config(config.final, config.final_config)
    run = self_train(L, split.U, dim, config.final, final_cfg, labeling_cfg, derive_seed(config.seed, index, 3))
    cv_seed = derive_seed(config.seed, index, 4)
    labeling_cv = cross_validate(L, dim, "svm", labeling_cfg, config.k, cv_seed)
    final_cv = cross_validate(run.d_prime, dim, config.final, final_cfg, config.k, cv_seed)
    hidden = hidden_evaluation(run, split.hidden, dim)
    report = {
        "report": "dimension",
        "dimension": dim.value,
        "final_kind": config.final,
        "counts": {
            "L": run.n_labeled,
            "U": run.n_unlabeled,
            "hidden": len(split.hidden),
            "D_prime": run.n_total,
            "L_classes": L.class_counts(dim),
            "D_prime_classes": run.d_prime.class_counts(dim),
        },
        "labeling_cv": cv_summary(labeling_cv),
        "final_cv": cv_summary(final_cv),
        "accuracy_st": hidden["accuracy_st"],
        "hidden_accuracy": hidden["hidden_accuracy"],
    }
    return report, run.to_dict()


@dataclass
class RunResult:
    manifest: dict
    manifest_path: Path
    summary: dict


class _Recorder:
    def __init__(self, out_dir: Path) -> None:
        self.out_dir = out_dir
        self.outputs: dict[str, str] = {}
        self.timings: dict[str, float] = {}

    def add(self, path: Path) -> None:
        self.outputs[path.relative_to(self.out_dir).as_posix()] = sha256_file(path)

    def timed(self, stage: str, fn, *args):
        t0 = time.perf_counter()
        try:
            return fn(*args)
        finally:
            self.timings[stage] = round(time.perf_counter() - t0, 6)


def _versions() -> dict:
    return {"stylemill": stylemill.__version__, "python": platform.python_version(), "numpy": np.__version__}


def _ingest(config: PipelineConfig):
    options = ParseOptions(strict=config.strict)
    if config.aliases is not None:
        options = options.with_aliases(load_alias_map(Path(config.aliases).read_text(encoding="utf-8")))
    with open(config.events, encoding="utf-8-sig", newline="") as fh:
        records, report = parse_event_log(fh, options)
    records, drop = remove_incomplete_users(records, config.min_events)
    report.users_removed_incomplete = drop.users_removed_incomplete
    return records, report


def _features(config: PipelineConfig, records):
    mapping = config.load_mapping()
    profiles = build_profiles(records, mapping)
    with open(config.ils, encoding="utf-8-sig", newline="") as fh:
        responses = read_ils_file(fh, config.ils_layout)
    dataset, rejects = assemble_dataset(profiles, labels_from_ils(responses), mapping.feature_names)
    return dataset, rejects


def run_pipeline(config: PipelineConfig) -> RunResult:
    """Execute every stage and write outputs plus ``manifest.json`` into ``config.out_dir``.

    A failing stage still writes a manifest with ``status: failed`` listing
    the outputs produced so far, then re-raises.
    """
    config.check_inputs()
    config.load_mapping()
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rec = _Recorder(out)
    manifest = {
        "schema": MANIFEST_SCHEMA,
        "config": config.to_dict(),
        "inputs": {name: {"path": str(p), "sha256": sha256_file(p)} for name, p in config.input_paths().items()},
        "versions": _versions(),
        "timings": rec.timings,
        "outputs": rec.outputs,
        "status": "running",
    }
    stage = "ingest"
    try:
        records, cleaning = rec.timed("ingest", _ingest, config)
        path = out / "events.csv"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            write_events(records, fh)
        rec.add(path)
        rec.add(write_json(cleaning.to_dict(), out / "cleaning.json"))

        stage = "features"
        dataset, rejects = rec.timed("features", _features, config, records)
        rec.add(write_json(dataset.to_dict(), out / "dataset.json"))

        dims = []
        for dim in config.dimensions:
            stage = f"dimension:{dim.value}"
            report, run_record = rec.timed(stage, run_dimension, dataset, dim, config)
            rec.add(write_json(run_record, out / f"run_{dim.value}.json"))
            if "json" in config.emit:
                rec.add(write_json(report, out / f"report_{dim.value}.json"))
            dims.append(report)

        stage = "report"
        summary = {
            "report": "pipeline",
            "seed": config.seed,
            "n_students": dataset.n_rows,
            "features": list(dataset.feature_names),
            "ils_without_events": list(rejects.unknown_users),
            "dimensions": dims,
        }
        summary["mean_over_dimensions"] = _mean_over_dims(dims)
        rec.add(write_json(summary, out / "summary.json"))
        if "csv" in config.emit:
            rec.add(write_csv(summary, out / "summary.csv"))
        if "svg" in config.emit:
            path = out / "summary.svg"
            emit_chart(summary, "bars", path)
            rec.add(path)
    except StylemillError as exc:
        manifest["status"] = "failed"
        manifest["error"] = {"stage": stage, "message": str(exc), "exit_code": exc.exit_code}
        write_json(manifest, out / "manifest.json")
        raise
    manifest["status"] = "ok"
    path = write_json(manifest, out / "manifest.json")
    return RunResult(manifest, path, summary)


def _mean_over_dims(dims: list[dict]) -> dict:
    """Per-metric mean and median across dimensions (values absent in a dimension are skipped)."""
    out = {}
    for key in ("labeling_cv", "final_cv"):
        out[key] = {}
        for metric in dims[0][key]["mean"] if dims else ():
            vals = sorted(d[key]["mean"][metric] for d in dims if d[key]["mean"][metric] is not None)
            out[key][metric] = (
                {"mean": float(np.mean(vals)), "median": float(np.median(vals))} if vals else None
            )
    st = sorted(d["accuracy_st"] for d in dims)
    out["accuracy_st"] = {"mean": float(np.mean(st)), "median": float(np.median(st))} if st else None
    return out


def load_manifest(path: str | Path) -> dict:
    manifest = read_json(path, "manifest")
    if manifest.get("schema") != MANIFEST_SCHEMA:
        raise DataError(f"unsupported manifest schema {manifest.get('schema')!r}")
    return manifest


def rerun(manifest_path: str | Path, out_dir: str | Path | None = None) -> tuple[RunResult, list[str]]:
    """Repeat a recorded run and list outputs whose bytes differ from the record.

    Inputs must still match their recorded digests.
    """
    old = load_manifest(manifest_path)
    for name, entry in old["inputs"].items():
        if not Path(entry["path"]).is_file():
            raise ConfigError(f"recorded {name} input is missing: {entry['path']}")
        if sha256_file(entry["path"]) != entry["sha256"]:
            raise DataError(f"recorded {name} input has changed since the run: {entry['path']}")
    snapshot = dict(old["config"])
    if out_dir is not None:
        snapshot["paths"] = {**snapshot["paths"], "out_dir": str(Path(out_dir).resolve())}
    config = PipelineConfig.from_dict(snapshot)
    result = run_pipeline(config)
    recorded = old.get("outputs", {})
    produced = result.manifest["outputs"]
    differing = sorted(
        name for name in set(recorded) | set(produced) if recorded.get(name) != produced.get(name)
    )
    return result, differing


def sample_config_path() -> Path:
    """Path of the bundled sample config (its relative paths point at the bundled fixture)."""
    return Path(str(resources.files("stylemill.data").joinpath("sample", "config.json")))
