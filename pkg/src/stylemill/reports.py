"""Deterministic JSON and flat CSV output for reports."""

from __future__ import annotations

import csv
import enum
import hashlib
import io
import json
import math
from pathlib import Path

import numpy as np

from stylemill.errors import ConfigError, DataError


def jsonable(obj):
    """Plain-JSON view of reports holding numpy values, enums and dataclasses with ``to_dict``."""
    if isinstance(obj, dict):
        return {str(k.value if isinstance(k, enum.Enum) else k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if hasattr(obj, "to_dict"):
        return jsonable(obj.to_dict())
    return obj


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(obj, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(obj))
    return path


def read_json(path: str | Path, what: str = "file"):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"{what} not found: {path}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"{what} {path} is not valid JSON: {exc}") from None


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _flatten(prefix: str, obj, out: dict) -> None:
    if isinstance(obj, dict):
        for k in sorted(obj):
            _flatten(f"{prefix}.{k}" if prefix else str(k), obj[k], out)
    elif isinstance(obj, list) and all(not isinstance(v, (dict, list)) for v in obj):
        out[prefix] = ";".join("" if v is None else str(v) for v in obj)
    else:
        out[prefix] = obj


def report_rows(report: dict) -> list[dict]:
    """One flat dict per natural row of a report (sweep cell, seed, dimension)."""
    rtype = report.get("report")
    if rtype == "ratio_sweep":
        rows = report["rows"]
    elif rtype == "compare":
        rows = [{"dimension": report["dimension"], **r} for r in report["per_seed"]]
    elif rtype == "compare_set":
        rows = [{"dimension": it["dimension"], **r} for it in report["results"] for r in it["per_seed"]]
    elif rtype == "pipeline":
        rows = [
            {k: v for k, v in d.items() if k not in ("labeling_cv", "final_cv")}
            | {"labeling_cv": d["labeling_cv"]["mean"], "final_cv": d["final_cv"]["mean"]}
            for d in report["dimensions"]
        ]
    elif rtype == "dimension":
        rows = [report]
    elif rtype == "cross_validation":
        rows = [{"fold": i, **f} for i, f in enumerate(report["folds"])]
    else:
        rows = [report]
    flat = []
    for r in rows:
        f: dict = {}
        _flatten("", jsonable(r), f)
        flat.append({k: v for k, v in f.items() if not isinstance(v, (dict, list))})
    return flat


def to_csv(report: dict) -> str:
    rows = report_rows(report)
    if not rows:
        raise DataError("report has no rows")
    header: list[str] = []
    for r in rows:
        for k in r:
            if k not in header:
                header.append(k)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=header, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: "" if r.get(k) is None else r.get(k) for k in header})
    return buf.getvalue()


def write_csv(report: dict, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(to_csv(report))
    return path
