"""Regenerate the bundled 50-student sample fixture.

Writes a Moodle-style log export, an ILS answer file and a pipeline config
into ``src/stylemill/data/sample``.  Activity rates depend on each student's
poles so the pipeline has something to learn; the output is fully
determined by ``SEED``.

    python scripts/make_sample.py
"""

from __future__ import annotations

import csv
import json
import math
from datetime import datetime, timedelta
from pathlib import Path

from stylemill.rng import Rng

SEED = 20240917
N_STUDENTS = 50
OUT = Path(__file__).resolve().parent.parent / "src" / "stylemill" / "data" / "sample"
HEADER = [
    "Time", "User full name", "Affected user", "Event context", "Component",
    "Event name", "Description", "Origin", "IP address",
]

# (event name, component, context, base rate, weights on the P/I/U/R pole signs)
ACTIVITIES = [
    ("Course viewed", "System", "Course: Programming 1", 14.0, (0.0, 0.0, 0.5, 0.0)),
    ("Course module viewed", "File", "File: Lecture notes week 3", 6.0, (-0.6, -0.7, 0.3, 0.0)),
    ("Course module viewed", "Page", "Page: Reading list", 3.0, (-0.5, -0.6, 0.2, 0.0)),
    ("Video played", "Vidtrack", "Video: Loops explained", 5.0, (0.0, 0.9, 0.0, 0.2)),
    ("Course module viewed", "YouTube", "YouTube: Recursion demo", 3.0, (0.1, 0.8, 0.0, 0.0)),
    ("Course module viewed", "H5P", "Interactive content: Sorting quiz", 3.0, (0.7, 0.3, 0.0, 0.3)),
    ("Quiz attempt started", "Quiz", "Quiz: Week 2 check", 4.0, (0.6, 0.0, 0.2, 0.4)),
    ("Quiz attempt submitted", "Quiz", "Quiz: Week 2 check", 3.0, (0.5, 0.0, 0.3, 0.5)),
    ("Submission created", "Assignment", "Assignment: Lab 1", 2.0, (0.3, 0.0, 0.2, 0.7)),
    ("Course module viewed", "URL", "URL: External tutorial", 2.0, (0.0, 0.0, -0.7, -0.6)),
    ("Discussion viewed", "Forum", "Forum: Q&A", 4.0, (0.9, 0.0, -0.2, 0.0)),
    ("Grade user report viewed", "User report", "Course: Programming 1", 2.0, (0.0, 0.0, -0.5, 0.3)),
    ("User logged in", "System", "System", 3.0, (0.0, 0.0, 0.0, 0.0)),
]


def ils_answers(rng: Rng, signs: list[int]) -> str:
    out = []
    for s in signs:
        magnitude = 1 + 2 * rng.randbelow(6)
        n_a = (11 + s * magnitude) // 2
        items = ["a"] * n_a + ["b"] * (11 - n_a)
        rng.shuffle(items)
        out.extend(items)
    return "".join(out)


def main() -> None:
    rng = Rng(SEED)
    OUT.mkdir(parents=True, exist_ok=True)
    start = datetime(2022, 9, 5, 8, 0)
    events = []
    ils_rows = []
    for i in range(N_STUDENTS):
        user = f"student{i + 1:03d}"
        signs = [1 if rng.random() < 0.5 else -1 for _ in range(4)]
        ils_rows.append([user, ils_answers(rng, signs)])
        for name, comp, ctx, base, weights in ACTIVITIES:
            lam = base * math.exp(sum(w * s for w, s in zip(weights, signs)))
            for _ in range(rng.poisson(lam)):
                when = start + timedelta(minutes=rng.randbelow(60 * 24 * 100))
                events.append((when, user, ctx, comp, name))
    events.sort(key=lambda e: (e[0], e[1], e[4]))
    with open(OUT / "events.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(HEADER)
        for k, (when, user, ctx, comp, name) in enumerate(events):
            w.writerow([
                when.strftime("%d/%m/%y, %H:%M"), user, "-", ctx, comp, name,
                f"The user with id '{user}' triggered '{name}'.", "web", f"10.0.{k % 250}.{k % 7 + 1}",
            ])
            if k in (40, 900):
                w.writerow(["not a time", user, "-", ctx, comp, name, "", "web", "10.0.0.1"])
    with open(OUT / "ils.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["user_id", "answers"])
        w.writerows(ils_rows)
    config = {
        "seed": 7,
        "paths": {"events": "events.csv", "mapping": "default", "ils": "ils.csv", "out_dir": "out"},
        "dimensions": "all",
        "ingest": {"min_events": 1, "strict": False},
        "ils_layout": "grouped",
        "split": {"labeled_ratio": 0.5, "stratified": True, "undersample": False},
        "models": {"labeling": {"C": 1.0, "kernel": "linear"}, "final": "svm", "final_config": {}},
        "eval": {"k": 5},
        "emit": ["json", "csv", "svg"],
    }
    (OUT / "config.json").write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")
    print(f"{len(events)} events for {N_STUDENTS} students -> {OUT}")


if __name__ == "__main__":
    main()
