"""``stylemill`` command line.

Every subcommand reads and writes plain files, so each stage can be run,
inspected and resumed on its own.  Exit status: 0 success, 1 usage or
configuration error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from stylemill import __version__
from stylemill.charts import emit_chart
from stylemill.errors import ConfigError, DataError, StylemillError
from stylemill.evaluation import (
    CompareSpec,
    Protocol,
    compare_methods,
    cross_validate,
    evaluate_model,
    hidden_evaluation,
    ratio_sweep,
)
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
from stylemill.ingest import (
    ParseOptions,
    load_alias_map,
    parse_event_log,
    read_canonical_events,
    remove_incomplete_users,
    write_events,
)
from stylemill.learners import KINDS, TrainedModel, config_to_dict, fit_model, make_config
from stylemill.pipeline import PipelineConfig, rerun, run_pipeline
from stylemill.reports import dumps, read_json, to_csv, write_json
from stylemill.sampling import SplitSpec, make_folds, split_labeled_unlabeled, under_sample
from stylemill.semisup import self_train, tri_train
from stylemill.stats import paired_t_test
from stylemill.synth import SynthSpec, generate, write_truth

log = logging.getLogger("stylemill")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


# --------------------------------------------------------------------------
# argument helpers


def _int_list(text: str) -> list[int]:
    """``"0,1,5"`` or ``"0-19"`` (inclusive) or a mix of both."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError("expected at least one integer")
    return out


def _float_list(text: str) -> list[float]:
    vals = [float(p) for p in text.split(",") if p.strip()]
    if not vals:
        raise argparse.ArgumentTypeError("expected at least one number")
    return vals


def _kinds(text: str) -> list[str]:
    kinds = [k.strip() for k in text.split(",") if k.strip()]
    bad = [k for k in kinds if k not in KINDS]
    if bad or not kinds:
        raise argparse.ArgumentTypeError(f"model kinds must come from {', '.join(KINDS)}")
    return kinds


def _dims(value: str) -> list[Dimension]:
    if value.lower() == "all":
        return list(DIMENSIONS)
    return [Dimension.parse(v) for v in value.split(",")]


def _one_dim(value: str) -> Dimension:
    return Dimension.parse(value)


def _load_dataset(path) -> LearningDataset:
    return LearningDataset.from_dict(read_json(path, "dataset"))


def _load_model_config(kind: str, path) -> object:
    if path is None:
        return make_config(kind)
    data = read_json(path, "model config")
    if not isinstance(data, dict):
        raise ConfigError("model config must be a JSON object")
    if data.get("kind", kind) != kind:
        raise ConfigError(f"config file is for {data['kind']!r}, not {kind!r}")
    try:
        return make_config(kind, data)
    except TypeError as exc:
        raise ConfigError(f"invalid {kind} config: {exc}") from None


def _out_path(args, default_name: str) -> Path | None:
    if getattr(args, "out", None):
        return Path(args.out)
    if getattr(args, "out_dir", None):
        return Path(args.out_dir) / default_name
    return None


def _emit(obj, args, default_name: str) -> None:
    """Write ``obj`` as JSON to --out / --out-dir, or print it."""
    path = _out_path(args, default_name)
    if path is None:
        sys.stdout.write(dumps(obj))
    else:
        write_json(obj, path)
        print(f"wrote {path}")


def _common(p: argparse.ArgumentParser, seed: bool = False, dimension: str | None = None, out: bool = True) -> None:
    if seed:
        p.add_argument("--seed", type=int, required=True, help="explicit random seed (required)")
    if dimension == "one":
        p.add_argument("--dimension", type=_one_dim, required=True, help="Processing, Input, Understanding or Perception")
    elif dimension == "many":
        p.add_argument("--dimension", type=_dims, default=list(DIMENSIONS), help="one dimension, a comma list, or 'all'")
    if out:
        p.add_argument("--out", help="output file")
        p.add_argument("--out-dir", help="directory for the output when --out is not given")


# --------------------------------------------------------------------------
# subcommands


def cmd_ingest(args) -> int:
    options = ParseOptions(strict=args.strict)
    if args.aliases:
        options = options.with_aliases(load_alias_map(Path(args.aliases).read_text(encoding="utf-8")))
    with open(args.input, encoding="utf-8-sig", newline="") as fh:
        records, report = parse_event_log(fh, options)
    records, drop = remove_incomplete_users(records, args.min_events)
    report.users_removed_incomplete = drop.users_removed_incomplete
    out = _out_path(args, "events.csv")
    if out is None:
        raise ConfigError("ingest needs --out or --out-dir")
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        write_events(records, fh)
    if args.report:
        write_json(report.to_dict(), args.report)
    print(json.dumps(report.to_dict(), sort_keys=True))
    return 0


def cmd_features(args) -> int:
    if args.mapping:
        mapping = FeatureMapping.from_json(Path(args.mapping).read_text(encoding="utf-8"))
    else:
        mapping = default_mapping()
    with open(args.events, encoding="utf-8", newline="") as fh:
        records = read_canonical_events(fh)
    profiles = build_profiles(records, mapping)
    with open(args.ils, encoding="utf-8-sig", newline="") as fh:
        responses = read_ils_file(fh, args.ils_layout)
    dataset, rejects = assemble_dataset(profiles, labels_from_ils(responses), mapping.feature_names)
    if rejects.unknown_users:
        log.warning("%d ILS rows have no events: %s", len(rejects.unknown_users), rejects.unknown_users[:5])
    _emit(dataset.to_dict(), args, "dataset.json")
    return 0


def cmd_split(args) -> int:
    dataset = _load_dataset(args.dataset)
    dim = args.dimension
    split = split_labeled_unlabeled(dataset, dim, SplitSpec(args.ratio, args.seed, not args.no_stratify))
    L = under_sample(split.L, dim, args.seed) if args.undersample else split.L
    record = {
        "dimension": dim.value,
        "spec": {"labeled_ratio": args.ratio, "seed": args.seed, "stratified": not args.no_stratify, "undersample": args.undersample},
        "counts": {"L": L.n_rows, "U": split.U.n_rows, "hidden": len(split.hidden), "L_classes": L.class_counts(dim)},
        "L": L.to_dict(),
        "U": split.U.to_dict(),
        "hidden": {u: lab.to_dict() for u, lab in split.hidden.items()},
    }
    if args.folds:
        record["folds"] = make_folds(L.n_rows, args.folds, L.y(dim), args.seed).to_dict()
    _emit(record, args, f"split_{dim.value}.json")
    return 0


def cmd_train(args) -> int:
    dataset = _load_dataset(args.dataset).labeled(args.dimension)
    config = _load_model_config(args.model, args.config)
    model = fit_model(
        args.model, dataset.X, dataset.y(args.dimension), config, seed=args.seed,
        feature_names=dataset.feature_names, class_order=args.dimension.poles,
    )
    record = model.to_dict()
    record["trained_on"] = {"dimension": args.dimension.value, "rows": dataset.n_rows, "config": config_to_dict(args.model, config), "seed": args.seed}
    _emit(record, args, f"model_{args.model}_{args.dimension.value}.json")
    return 0


def _split_for(args, dataset):
    dim = args.dimension
    split = split_labeled_unlabeled(dataset, dim, SplitSpec(args.ratio, args.seed, not args.no_stratify))
    L = under_sample(split.L, dim, args.seed) if args.undersample else split.L
    return split, L


def cmd_selftrain(args) -> int:
    dataset = _load_dataset(args.dataset)
    split, L = _split_for(args, dataset)
    labeling = _load_model_config("svm", args.labeling_config)
    final = _load_model_config(args.final, args.config)
    run = self_train(L, split.U, args.dimension, args.final, final, labeling, seed=args.seed)
    record = run.to_dict()
    record["hidden_evaluation"] = hidden_evaluation(run, split.hidden, args.dimension)
    record["spec"] = {"labeled_ratio": args.ratio, "seed": args.seed, "undersample": args.undersample}
    _emit(record, args, f"selftrain_{args.dimension.value}.json")
    return 0


def cmd_tritrain(args) -> int:
    dataset = _load_dataset(args.dataset)
    split, L = _split_for(args, dataset)
    base = [(k, None) for k in args.base] if args.base else None
    if base is not None and len(base) != 3:
        raise ConfigError("--base needs exactly three model kinds")
    model = tri_train(L, split.U, args.dimension, base, seed=args.seed)
    record = model.to_dict()
    record["counts"] = {"L": L.n_rows, "U": split.U.n_rows}
    _emit(record, args, f"tritrain_{args.dimension.value}.json")
    return 0


def cmd_eval(args) -> int:
    dataset = _load_dataset(args.dataset)
    results = []
    for dim in args.dimension:
        if args.model_file:
            model = TrainedModel.from_dict(read_json(args.model_file, "model"))
            rep = evaluate_model(model, dataset.labeled(dim), dim)
            results.append({"dimension": dim.value, "model_file": str(args.model_file), "metrics": rep.to_dict()})
        else:
            config = _load_model_config(args.model, args.config)
            rep = cross_validate(dataset, dim, args.model, config, args.k, args.seed, not args.no_stratify)
            results.append(
                {
                    "report": "cross_validation",
                    "dimension": dim.value,
                    "kind": args.model,
                    "k": args.k,
                    "seed": args.seed,
                    "mean": rep.values(),
                    "std": rep.std,
                    "absent": rep.absent,
                    "folds": [f.values() for f in rep.folds],
                    "pooled_confusion": rep.confusion.to_dict(),
                }
            )
    _emit(results[0] if len(results) == 1 else {"report": "eval_set", "results": results}, args, "eval.json")
    return 0


def _protocol(args) -> Protocol:
    final = {}
    if getattr(args, "config", None):
        kind = args.kinds[0] if hasattr(args, "kinds") else args.kind
        final[kind] = _load_model_config(kind, args.config)
    return Protocol(
        labeling_config=_load_model_config("svm", args.labeling_config),
        final_configs=final,
        test_fraction=args.test_fraction,
        stratified=not args.no_stratify,
        undersample=args.undersample,
    )


def cmd_sweep(args) -> int:
    dataset = _load_dataset(args.dataset)
    protocol = _protocol(args)
    reports = [ratio_sweep(dataset, dim, args.ratios, args.kinds, args.seeds, protocol) for dim in args.dimension]
    if len(reports) == 1:
        _emit(reports[0], args, "sweep.json")
    else:
        merged = dict(reports[0])
        merged["dimension"] = "all"
        merged["rows"] = [r for rep in reports for r in rep["rows"]]
        _emit(merged, args, "sweep.json")
    return 0


def cmd_compare(args) -> int:
    dataset = _load_dataset(args.dataset)
    protocol = _protocol(args)
    base = [(k, None) for k in args.tri_base] if args.tri_base else None
    spec = CompareSpec(args.ratio, args.seeds, args.kind, base, protocol)
    results = [compare_methods(dataset, dim, spec) for dim in args.dimension]
    out = results[0] if len(results) == 1 else {"report": "compare_set", "results": results}
    _emit(out, args, "compare.json")
    return 0


def _read_pairs(path) -> tuple[list[float], list[float]]:
    a, b = [], []
    with open(path, encoding="utf-8", newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row:
                continue
            try:
                x, y = float(row[0]), float(row[1])
            except (ValueError, IndexError):
                if i == 0:
                    continue
                raise DataError(f"{path}: row {i + 1} is not two numbers") from None
            a.append(x)
            b.append(y)
    return a, b


def cmd_ttest(args) -> int:
    if args.pairs:
        a, b = _read_pairs(args.pairs)
    elif args.a and args.b:
        a, b = args.a, args.b
    else:
        raise ConfigError("ttest needs --a and --b, or --pairs")
    _emit(paired_t_test(a, b).to_dict(), args, "ttest.json")
    return 0


def cmd_synth(args) -> int:
    spec = SynthSpec.from_json(args.spec)
    if args.seed is not None:
        spec = spec.replace(seed=args.seed)
    dataset, truth = generate(spec)
    out = _out_path(args, "synth_dataset.json")
    if out is None:
        raise ConfigError("synth needs --out or --out-dir")
    write_json(dataset.to_dict(), out)
    truth_path = Path(args.truth) if args.truth else out.with_name(out.stem + "_truth.json")
    write_truth(truth, truth_path)
    print(f"wrote {out} and {truth_path} ({truth.counts()})")
    return 0


def cmd_report(args) -> int:
    report = read_json(args.run, "report")
    if args.format == "json":
        text = dumps(report)
    elif args.format == "csv":
        text = to_csv(report)
    else:
        text = emit_chart(report, args.chart, metric=args.metric)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_rerun(args) -> int:
    result, differing = rerun(args.manifest, args.out_dir)
    if differing:
        for name in differing:
            print(f"differs: {name}", file=sys.stderr)
        raise DataError(f"{len(differing)} output(s) differ from the recorded run")
    print(f"reproduced {len(result.manifest['outputs'])} outputs in {result.manifest_path.parent}")
    return 0


def cmd_run(args) -> int:
    path = Path(args.config)
    data = read_json(path, "pipeline config")
    if args.seed is not None:
        data["seed"] = args.seed
    if args.dimension is not None:
        data["dimensions"] = [d.value for d in args.dimension]
    config = PipelineConfig.from_dict(data, path.parent)
    if args.out_dir:
        config.out_dir = Path(args.out_dir).resolve()
    result = run_pipeline(config)
    for d in result.summary["dimensions"]:
        print(
            f"{d['dimension']:<13} labeling CV acc {d['labeling_cv']['mean']['accuracy']:.4f}  "
            f"final CV acc {d['final_cv']['mean']['accuracy']:.4f}  Accuracy_ST {d['accuracy_st']:.4f}"
        )
    print(f"manifest: {result.manifest_path}")
    return 0


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stylemill", description="Learning-style prediction from LMS event logs.")
    parser.add_argument("--version", action="version", version=f"stylemill {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="clean a raw LMS log export into canonical events")
    p.add_argument("--input", required=True)
    p.add_argument("--aliases", help="JSON map of canonical field -> extra header names")
    p.add_argument("--min-events", type=int, default=1)
    p.add_argument("--strict", action="store_true", help="fail on the first malformed row")
    p.add_argument("--report", help="write the cleaning report JSON here")
    _common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("features", help="count events per feature and attach ILS labels")
    p.add_argument("--events", required=True, help="canonical events file from 'ingest'")
    p.add_argument("--mapping", help="feature mapping JSON (default: bundled mapping)")
    p.add_argument("--ils", required=True)
    p.add_argument("--ils-layout", choices=("grouped", "interleaved"), default="grouped")
    _common(p)
    p.set_defaults(func=cmd_features)

    def split_args(p):
        p.add_argument("--dataset", required=True)
        p.add_argument("--ratio", type=float, required=True, help="labeled ratio r in (0, 1]")
        p.add_argument("--no-stratify", action="store_true")
        p.add_argument("--undersample", action="store_true", help="balance L after splitting")

    p = sub.add_parser("split", help="split a dataset into labeled and unlabeled pools")
    split_args(p)
    p.add_argument("--folds", type=int, help="also record a stratified k-fold plan over L")
    _common(p, seed=True, dimension="one")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="fit one supervised model on the labeled rows")
    p.add_argument("--dataset", required=True)
    p.add_argument("--model", choices=KINDS, required=True)
    p.add_argument("--config", help="model config JSON")
    _common(p, seed=True, dimension="one")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("selftrain", help="one-pass self-training on a labeled/unlabeled split")
    split_args(p)
    p.add_argument("--final", choices=KINDS, required=True, help="model fit on L + self-labeled U")
    p.add_argument("--config", help="final model config JSON")
    p.add_argument("--labeling-config", help="SVM config JSON for the labeling model")
    _common(p, seed=True, dimension="one")
    p.set_defaults(func=cmd_selftrain)

    p = sub.add_parser("tritrain", help="tri-training comparator on a labeled/unlabeled split")
    split_args(p)
    p.add_argument("--base", type=_kinds, help="three comma-separated base kinds (default svm,svm,svm)")
    _common(p, seed=True, dimension="one")
    p.set_defaults(func=cmd_tritrain)

    p = sub.add_parser("eval", help="k-fold cross-validation, or score a saved model")
    p.add_argument("--dataset", required=True)
    p.add_argument("--model", choices=KINDS, default="svm")
    p.add_argument("--model-file", help="score this saved model instead of cross-validating")
    p.add_argument("--config", help="model config JSON")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--no-stratify", action="store_true")
    _common(p, seed=True, dimension="many")
    p.set_defaults(func=cmd_eval)

    def protocol_args(p):
        p.add_argument("--dataset", required=True)
        p.add_argument("--seeds", type=_int_list, required=True, help="e.g. 0-19 or 1,2,3")
        p.add_argument("--config", help="final model config JSON")
        p.add_argument("--labeling-config", help="SVM config JSON for the labeling model")
        p.add_argument("--test-fraction", type=float, default=0.2)
        p.add_argument("--no-stratify", action="store_true")
        p.add_argument("--undersample", action="store_true")

    p = sub.add_parser("sweep", help="self-training across labeled ratios")
    protocol_args(p)
    p.add_argument("--ratios", type=_float_list, default=[0.1, 0.2, 0.5, 0.75, 1.0])
    p.add_argument("--kinds", type=_kinds, default=["svm"])
    _common(p, dimension="many")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="supervised vs self-training vs tri-training with paired t-tests")
    protocol_args(p)
    p.add_argument("--ratio", type=float, required=True)
    p.add_argument("--kind", choices=KINDS, default="svm")
    p.add_argument("--tri-base", type=_kinds)
    _common(p, dimension="many")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("ttest", help="two-sided paired t-test on a - b")
    p.add_argument("--a", type=_float_list)
    p.add_argument("--b", type=_float_list)
    p.add_argument("--pairs", help="CSV with two numeric columns (an optional header is skipped)")
    _common(p)
    p.set_defaults(func=cmd_ttest)

    p = sub.add_parser("synth", help="generate a synthetic dataset with known truth")
    p.add_argument("--spec", required=True, help="synth spec JSON")
    p.add_argument("--truth", help="where to write the ground truth (default: next to --out)")
    p.add_argument("--seed", type=int, help="override the spec's seed")
    _common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="re-emit a report as JSON, CSV or an SVG chart")
    p.add_argument("--run", required=True, help="report JSON (sweep, compare, pipeline summary, ...)")
    p.add_argument("--format", choices=("json", "csv", "svg"), default="json")
    p.add_argument("--chart", choices=("bars", "lines"), help="chart type for svg (default by report)")
    p.add_argument("--metric", default="accuracy")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("rerun", help="repeat a run from its manifest and check outputs are identical")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", help="write the repeated run here (default: the recorded directory)")
    p.set_defaults(func=cmd_rerun)

    p = sub.add_parser("run", help="full pipeline from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--dimension", type=_dims, help="override the dimensions")
    p.add_argument("--out-dir", help="override the output directory")
    p.set_defaults(func=cmd_run)
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except StylemillError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename}", file=sys.stderr)
        return ConfigError.exit_code
    except (KeyError, TypeError, ValueError) as exc:
        print(f"error: invalid input: {exc}", file=sys.stderr)
        return DataError.exit_code


if __name__ == "__main__":
    sys.exit(main())
