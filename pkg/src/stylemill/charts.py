"""Standalone SVG line and grouped-bar charts for sweep, comparison and run reports.

Every mark carries its exact value in a ``data-value`` attribute and a
``<title>``; category and x-axis tick labels are the report's own values,
formatted with :func:`fmt`.  No plotting library is involved, so the output
bytes depend only on the report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape, quoteattr

from stylemill.errors import DataError

WIDTH, HEIGHT = 640, 400
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 64, 160, 40, 56
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


def fmt(value: float) -> str:
    """Shortest round-tripping text for a number (``0.1`` stays ``0.1``)."""
    v = float(value)
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


@dataclass
class LineChart:
    title: str
    x_label: str
    y_label: str
    series: dict[str, list[tuple[float, float]]] = field(default_factory=dict)


@dataclass
class BarChart:
    title: str
    y_label: str
    groups: list[str]
    series: dict[str, list[float | None]] = field(default_factory=dict)


def _y_range(values: list[float]) -> tuple[float, float]:
    lo, hi = min(values), max(values)
    if 0.0 <= lo and hi <= 1.0:
        return 0.0, 1.0
    lo = min(lo, 0.0)
    if hi == lo:
        hi = lo + 1.0
    return lo, hi


def _frame(title: str, y_label: str, x_label: str, lo: float, hi: float) -> list[str]:
    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
        f'<line x1="{MARGIN_L}" y1="{MARGIN_T + plot_h}" x2="{MARGIN_L + plot_w}" y2="{MARGIN_T + plot_h}" stroke="black"/>',
        f'<line x1="{MARGIN_L}" y1="{MARGIN_T}" x2="{MARGIN_L}" y2="{MARGIN_T + plot_h}" stroke="black"/>',
    ]
    for i in range(6):
        v = lo + (hi - lo) * i / 5
        y = MARGIN_T + plot_h - plot_h * i / 5
        out.append(f'<line x1="{MARGIN_L - 4}" y1="{y:.2f}" x2="{MARGIN_L}" y2="{y:.2f}" stroke="black"/>')
        out.append(
            f'<text class="y-tick" x="{MARGIN_L - 6}" y="{y + 4:.2f}" text-anchor="end">{fmt(round(v, 10))}</text>'
        )
    out.append(
        f'<text x="16" y="{MARGIN_T + plot_h / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {MARGIN_T + plot_h / 2:.1f})">{escape(y_label)}</text>'
    )
    out.append(
        f'<text x="{MARGIN_L + plot_w / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle">{escape(x_label)}</text>'
    )
    return out


def _legend(names: list[str]) -> list[str]:
    out = []
    x = WIDTH - MARGIN_R + 16
    for i, name in enumerate(names):
        y = MARGIN_T + 18 * i
        color = PALETTE[i % len(PALETTE)]
        out.append(f'<rect x="{x}" y="{y}" width="12" height="12" fill="{color}"/>')
        out.append(f'<text x="{x + 18}" y="{y + 10}">{escape(name)}</text>')
    return out


def render_lines(chart: LineChart) -> str:
    points = [p for pts in chart.series.values() for p in pts]
    if not points:
        raise DataError("cannot chart an empty report")
    xs = sorted({float(x) for x, _ in points})
    lo, hi = _y_range([float(y) for _, y in points])
    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B
    x_lo, x_hi = xs[0], xs[-1]

    def px(x: float) -> float:
        if x_hi == x_lo:
            return MARGIN_L + plot_w / 2
        return MARGIN_L + plot_w * (x - x_lo) / (x_hi - x_lo)

    def py(y: float) -> float:
        return MARGIN_T + plot_h - plot_h * (y - lo) / (hi - lo)

    out = _frame(chart.title, chart.y_label, chart.x_label, lo, hi)
    base = MARGIN_T + plot_h
    for x in xs:
        out.append(f'<line x1="{px(x):.2f}" y1="{base}" x2="{px(x):.2f}" y2="{base + 4}" stroke="black"/>')
        out.append(f'<text class="x-tick" x="{px(x):.2f}" y="{base + 18}" text-anchor="middle">{fmt(x)}</text>')
    for i, (name, pts) in enumerate(chart.series.items()):
        color = PALETTE[i % len(PALETTE)]
        pts = sorted((float(x), float(y)) for x, y in pts)
        if len(pts) > 1:
            path = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in pts)
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{path}"/>')
        for x, y in pts:
            out.append(
                f'<circle class="mark" data-series={quoteattr(name)} data-x="{fmt(x)}" data-value="{fmt(y)}" '
                f'cx="{px(x):.2f}" cy="{py(y):.2f}" r="4" fill="{color}">'
                f"<title>{escape(name)}: {fmt(x)} -> {fmt(y)}</title></circle>"
            )
    out.extend(_legend(list(chart.series)))
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_bars(chart: BarChart) -> str:
    values = [v for vals in chart.series.values() for v in vals if v is not None]
    if not chart.groups or not values:
        raise DataError("cannot chart an empty report")
    lo, hi = _y_range([float(v) for v in values])
    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B
    n_series = max(1, len(chart.series))
    slot = plot_w / len(chart.groups)
    bar_w = slot * 0.8 / n_series

    def py(y: float) -> float:
        return MARGIN_T + plot_h - plot_h * (y - lo) / (hi - lo)

    out = _frame(chart.title, chart.y_label, "", lo, hi)
    base = MARGIN_T + plot_h
    for g, group in enumerate(chart.groups):
        cx = MARGIN_L + slot * (g + 0.5)
        out.append(f'<text class="x-tick" x="{cx:.2f}" y="{base + 18}" text-anchor="middle">{escape(group)}</text>')
    zero = py(max(lo, 0.0))
    for s, (name, vals) in enumerate(chart.series.items()):
        color = PALETTE[s % len(PALETTE)]
        for g, v in enumerate(vals):
            if v is None:
                continue
            x = MARGIN_L + slot * g + slot * 0.1 + bar_w * s
            top = py(float(v))
            y, h = min(top, zero), abs(zero - top)
            out.append(
                f'<rect class="mark" data-series={quoteattr(name)} data-group={quoteattr(chart.groups[g])} '
                f'data-value="{fmt(v)}" x="{x:.2f}" y="{y:.2f}" width="{bar_w:.2f}" height="{h:.2f}" fill="{color}">'
                f"<title>{escape(chart.groups[g])} / {escape(name)}: {fmt(v)}</title></rect>"
            )
    out.extend(_legend(list(chart.series)))
    out.append("</svg>")
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------
# report -> chart


def _mean(vals: list[float]) -> float:
    return math.fsum(vals) / len(vals)


def _sweep_lines(report: dict, metric: str) -> LineChart:
    cells: dict[str, dict[float, list[float]]] = {}
    for row in report["rows"]:
        for arm, label in (("ssl", "self-training"), ("sl", "supervised")):
            v = row.get(arm, {}).get(metric)
            if v is not None:
                cells.setdefault(f"{row['kind']} {label}", {}).setdefault(float(row["ratio"]), []).append(v)
        if metric == "accuracy" and row.get("accuracy_st") is not None:
            cells.setdefault(f"{row['kind']} Accuracy_ST", {}).setdefault(float(row["ratio"]), []).append(row["accuracy_st"])
    series = {name: [(x, _mean(v)) for x, v in sorted(pts.items())] for name, pts in cells.items()}
    dim = report.get("dimension", "")
    return LineChart(f"{dim} {metric} by labeled ratio".strip(), "labeled ratio", metric, series)


def _compare_items(report: dict) -> list[dict]:
    if report.get("report") == "compare":
        return [report]
    return list(report.get("results", []))


def _compare_bars(report: dict, metric: str) -> BarChart:
    items = _compare_items(report)
    groups = [it["dimension"] for it in items]
    methods = ("SL", "SSL", "TT")
    series = {m: [it["means"].get(m, {}).get(metric) for it in items] for m in methods}
    return BarChart(f"Mean {metric}: SL vs SSL vs TT", metric, groups, series)


def _pipeline_bars(report: dict, metric: str) -> BarChart:
    dims = report.get("dimensions", [])
    groups = [d["dimension"] for d in dims]
    series = {
        "labeling CV": [d["labeling_cv"]["mean"].get(metric) for d in dims],
        "final CV": [d["final_cv"]["mean"].get(metric) for d in dims],
    }
    if metric == "accuracy":
        series["Accuracy_ST"] = [d.get("accuracy_st") for d in dims]
    return BarChart(f"{metric} per dimension", metric, groups, series)


def chart_for_report(report: dict, kind: str | None = None, metric: str = "accuracy") -> LineChart | BarChart:
    """Pick the chart that fits ``report``: lines for sweeps, bars otherwise."""
    if not isinstance(report, dict) or not report:
        raise DataError("cannot chart an empty report")
    rtype = report.get("report")
    if rtype == "ratio_sweep":
        if not report.get("rows"):
            raise DataError("cannot chart an empty report")
        chart = _sweep_lines(report, metric)
        if kind == "bars":
            xs = sorted({x for pts in chart.series.values() for x, _ in pts})
            groups = [fmt(x) for x in xs]
            series = {n: [dict(pts).get(x) for x in xs] for n, pts in chart.series.items()}
            return BarChart(chart.title, metric, groups, series)
        return chart
    if rtype in ("compare", "compare_set"):
        if not _compare_items(report):
            raise DataError("cannot chart an empty report")
        chart = _compare_bars(report, metric)
    elif rtype == "pipeline":
        if not report.get("dimensions"):
            raise DataError("cannot chart an empty report")
        chart = _pipeline_bars(report, metric)
    else:
        raise DataError(f"no chart for report type {rtype!r}")
    if kind == "lines":
        series = {n: [(float(i), v) for i, v in enumerate(vals) if v is not None] for n, vals in chart.series.items()}
        return LineChart(chart.title, "group index", metric, series)
    return chart


def emit_chart(report: dict, kind: str | None = None, out=None, metric: str = "accuracy") -> str:
    """Render ``report`` as SVG text; also write it to ``out`` when given."""
    chart = chart_for_report(report, kind, metric)
    svg = render_lines(chart) if isinstance(chart, LineChart) else render_bars(chart)
    if out is not None:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(svg)
    return svg
