import xml.etree.ElementTree as ET

import pytest

from stylemill.charts import emit_chart, fmt
from stylemill.errors import DataError
from stylemill.evaluation import CompareSpec, compare_methods, ratio_sweep
from stylemill.features import Dimension
from stylemill.synth import SynthSpec, generate

NS = "{http://www.w3.org/2000/svg}"
DIM = Dimension.PROCESSING


@pytest.fixture(scope="module")
def dataset():
    return generate(SynthSpec(n_students=120, separation=1.5, seed=2))[0]


def marks(svg):
    root = ET.fromstring(svg)
    assert root.tag == NS + "svg"
    return [el for el in root.iter() if el.get("class") == "mark"]


def test_fmt():
    assert fmt(0.1) == "0.1" and fmt(1.0) == "1" and fmt(0.75) == "0.75"
    assert float(fmt(1 / 3)) == 1 / 3


def test_sweep_lines_have_five_points_per_series(dataset):
    rep = ratio_sweep(dataset, DIM, [0.1, 0.2, 0.5, 0.75, 1.0], ["svm"], [0])
    svg = emit_chart(rep, "lines")
    ms = marks(svg)
    per_series = {}
    for m in ms:
        per_series.setdefault(m.get("data-series"), []).append(m)
    assert set(per_series) == {"svm self-training", "svm supervised", "svm Accuracy_ST"}
    assert all(len(v) == 5 for v in per_series.values())
    root = ET.fromstring(svg)
    ticks = [t.text for t in root.iter(NS + "text") if t.get("class") == "x-tick"]
    assert ticks == ["0.1", "0.2", "0.5", "0.75", "1"]
    by_ratio = {r["ratio"]: r["ssl"]["accuracy"] for r in rep["rows"]}
    for m in per_series["svm self-training"]:
        assert float(m.get("data-value")) == by_ratio[float(m.get("data-x"))]


def test_compare_bars_grouped_per_dimension(dataset):
    results = []
    for dim in (Dimension.PROCESSING, Dimension.INPUT):
        ds = generate(SynthSpec(n_students=120, separation=1.5, seed=2, dimension=dim))[0]
        results.append(compare_methods(ds, dim, CompareSpec(0.3, [0, 1], kind="nb")))
    rep = {"report": "compare_set", "results": results}
    ms = marks(emit_chart(rep, "bars"))
    assert len(ms) == 2 * 3
    assert {m.get("data-group") for m in ms} == {"Processing", "Input"}
    assert {m.get("data-series") for m in ms} == {"SL", "SSL", "TT"}
    for m in ms:
        item = [r for r in results if r["dimension"] == m.get("data-group")][0]
        assert float(m.get("data-value")) == item["means"][m.get("data-series")]["accuracy"]


def test_single_row_and_write(dataset, tmp_path):
    rep = ratio_sweep(dataset, DIM, [0.5], ["nb"], [0])
    out = tmp_path / "c.svg"
    svg = emit_chart(rep, "lines", out)
    assert out.read_text() == svg
    assert len(marks(svg)) == 3
    assert "nan" not in svg.lower() and "inf" not in svg.lower()
    assert len(marks(emit_chart(rep, "bars"))) == 3


def test_empty_reports_raise():
    for rep in ({}, {"report": "ratio_sweep", "rows": []}, {"report": "compare_set", "results": []},
                {"report": "pipeline", "dimensions": []}, {"report": "unknown"}):
        with pytest.raises(DataError):
            emit_chart(rep)


def test_chart_bytes_depend_only_on_report(dataset):
    rep = ratio_sweep(dataset, DIM, [0.2, 1.0], ["tree"], [1])
    assert emit_chart(rep) == emit_chart(rep)
