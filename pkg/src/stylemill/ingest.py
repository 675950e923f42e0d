"""Parse Moodle log exports into canonical event records.

A Moodle "logs" export carries columns such as ``Time``, ``User full name``,
``Affected user``, ``Event context``, ``Component``, ``Event name``,
``Description``, ``Origin`` and ``IP address``.  Only five survive cleaning:
the timestamp, the (already anonymised) user, and the three content fields.
"""

from __future__ import annotations

import csv
import io
import logging
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable, Mapping, TextIO

from stylemill.errors import ConfigError, DataError

log = logging.getLogger(__name__)

RETAINED_FIELDS = ("timestamp", "user_id", "event_name", "component", "event_context")

DEFAULT_ALIASES: dict[str, tuple[str, ...]] = {
    "timestamp": ("time", "timestamp", "date"),
    "user_id": ("user full name", "user_id", "user", "userid", "user id"),
    "event_name": ("event name", "event_name", "eventname"),
    "component": ("component",),
    "event_context": ("event context", "event_context", "context"),
}

DEFAULT_TIME_FORMATS = (
    "%d/%m/%y, %H:%M",
    "%d/%m/%Y, %H:%M",
    "%d/%m/%y %H:%M",
    "%d/%m/%Y %H:%M",
    "%Y-%m-%d %H:%M",
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%dT%H:%M:%S",
)

CANONICAL_TIME_FORMAT = "%Y-%m-%d %H:%M"


@dataclass(frozen=True, slots=True)
class EventRecord:
    timestamp: datetime
    user_id: str
    event_name: str
    component: str
    event_context: str

    def as_row(self) -> list[str]:
        return [
            self.timestamp.strftime(CANONICAL_TIME_FORMAT),
            self.user_id,
            self.event_name,
            self.component,
            self.event_context,
        ]


@dataclass
class CleaningReport:
    rows_read: int = 0
    rows_kept: int = 0
    rows_dropped_malformed: int = 0
    fields_dropped: list[str] = field(default_factory=list)
    users_removed_incomplete: int = 0

    def to_dict(self) -> dict:
        return {
            "rows_read": self.rows_read,
            "rows_kept": self.rows_kept,
            "rows_dropped_malformed": self.rows_dropped_malformed,
            "fields_dropped": list(self.fields_dropped),
            "users_removed_incomplete": self.users_removed_incomplete,
        }


@dataclass
class ParseOptions:
    """How to find the retained columns and what to do with bad rows.

    ``aliases`` maps each canonical field to header spellings it may appear
    under (compared case-insensitively, surrounding whitespace ignored).
    """

    aliases: Mapping[str, Iterable[str]] = field(default_factory=lambda: dict(DEFAULT_ALIASES))
    time_formats: tuple[str, ...] = DEFAULT_TIME_FORMATS
    strict: bool = False
    delimiter: str = ","

    def with_aliases(self, extra: Mapping[str, Iterable[str] | str]) -> "ParseOptions":
        merged = {k: tuple(v) for k, v in self.aliases.items()}
        for key, names in extra.items():
            if key not in RETAINED_FIELDS:
                raise ConfigError(f"unknown canonical field in alias map: {key!r}")
            names = (names,) if isinstance(names, str) else tuple(names)
            merged[key] = tuple(names) + merged.get(key, ())
        return ParseOptions(merged, self.time_formats, self.strict, self.delimiter)


def _norm(name: str) -> str:
    return " ".join(name.strip().lower().replace("﻿", "").split())


def _resolve_header(header: list[str], options: ParseOptions) -> dict[str, int]:
    positions = {_norm(h): i for i, h in reversed(list(enumerate(header)))}
    resolved: dict[str, int] = {}
    missing = []
    for canon in RETAINED_FIELDS:
        for alias in options.aliases.get(canon, ()):
            if _norm(alias) in positions:
                resolved[canon] = positions[_norm(alias)]
                break
        else:
            missing.append(canon)
    if missing:
        raise ConfigError(
            f"header is missing required column(s) {missing}; got {header!r}"
        )
    return resolved


def parse_timestamp(text: str, formats: Iterable[str] = DEFAULT_TIME_FORMATS) -> datetime:
    text = text.strip()
    for fmt in formats:
        try:
            return datetime.strptime(text, fmt).replace(second=0, microsecond=0)
        except ValueError:
            continue
    raise ValueError(f"unparseable timestamp {text!r}")


def parse_event_log(
    source: TextIO | str, options: ParseOptions | None = None
) -> tuple[list[EventRecord], CleaningReport]:
    """Read a delimited log export and keep only the five retained fields.

    Malformed rows (wrong width, empty user, bad timestamp) are skipped and
    counted unless ``options.strict`` is set, in which case a
    :class:`DataError` naming the 1-based data row number is raised.
    """
    options = options or ParseOptions()
    if isinstance(source, str):
        source = io.StringIO(source)
    reader = csv.reader(source, delimiter=options.delimiter)
    try:
        header = next(reader)
    except StopIteration:
        raise ConfigError("event log is empty: no header row") from None
    cols = _resolve_header(header, options)
    kept_idx = set(cols.values())
    report = CleaningReport(fields_dropped=[h for i, h in enumerate(header) if i not in kept_idx])

    records: list[EventRecord] = []
    for row_no, row in enumerate(reader, start=1):
        if not row:
            # csv yields [] for blank lines; those are not data rows
            continue
        report.rows_read += 1
        try:
            if len(row) != len(header):
                raise ValueError(f"expected {len(header)} fields, found {len(row)}")
            user = row[cols["user_id"]].strip()
            if not user:
                raise ValueError("empty user id")
            ts = parse_timestamp(row[cols["timestamp"]], options.time_formats)
        except ValueError as exc:
            if options.strict:
                raise DataError(f"malformed row {row_no}: {exc}") from None
            log.debug("skipping row %d: %s", row_no, exc)
            report.rows_dropped_malformed += 1
            continue
        records.append(
            EventRecord(
                timestamp=ts,
                user_id=user,
                event_name=row[cols["event_name"]].strip(),
                component=row[cols["component"]].strip(),
                event_context=row[cols["event_context"]].strip(),
            )
        )
    report.rows_kept = len(records)
    return records, report


def remove_incomplete_users(
    records: list[EventRecord], min_events: int = 1
) -> tuple[list[EventRecord], CleaningReport]:
    if min_events < 0:
        raise ConfigError("min_events must be >= 0")
    per_user = Counter(r.user_id for r in records)
    dropped = {u for u, n in per_user.items() if n < min_events}
    kept = [r for r in records if r.user_id not in dropped]
    report = CleaningReport(
        rows_read=len(records),
        rows_kept=len(kept),
        users_removed_incomplete=len(dropped),
    )
    return kept, report


def write_events(records: Iterable[EventRecord], out: TextIO) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(RETAINED_FIELDS)
    for rec in records:
        writer.writerow(rec.as_row())


def read_canonical_events(source: TextIO | str) -> list[EventRecord]:
    """Read a file previously written by :func:`write_events`."""
    opts = ParseOptions(
        aliases={f: (f,) for f in RETAINED_FIELDS},
        time_formats=(CANONICAL_TIME_FORMAT,),
        strict=True,
    )
    records, _ = parse_event_log(source, opts)
    return records


def load_alias_map(text: str) -> dict[str, list[str]]:
    import json

    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"alias map is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("alias map must be a JSON object")
    return {k: [v] if isinstance(v, str) else list(v) for k, v in data.items()}
