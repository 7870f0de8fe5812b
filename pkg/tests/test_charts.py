import matplotlib.pyplot as plt
import pandas as pd
import pytest

from lpssl.charts import BAR_STAGES, _unit_axis, emit_charts, emit_heatmap, emit_radar_chart, emit_trend_chart
from lpssl.config import ExperimentConfig
from lpssl.metrics import MetricsReport
from lpssl.pipeline import BASELINE, FULL, FULLY_SUPERVISED, LP_SSL, RunRecord

ACCURACY = {BASELINE: 0.70, LP_SSL: 0.80, FULL: 0.82, FULLY_SUPERVISED: 1.0}


def _records(fractions=(0.1,)):
    records = []
    for fraction in fractions:
        cfg = ExperimentConfig().with_overrides({"label_fraction": fraction, "out_dir": f"runs/{fraction}"})
        for stage, accuracy in ACCURACY.items():
            value = min(1.0, accuracy + fraction)
            metrics = MetricsReport(accuracy=value, f1=value - 0.05, auc_roc=value)
            records.append(RunRecord(stage=stage, metrics=metrics, wall_time=0.0,
                                     config_digest=cfg.digest, config=cfg))
    return records


def test_bar_charts_one_per_metric(tmp_path):
    """Three stages, one configuration: an SVG and a CSV per metric."""
    paths = emit_charts(_records(), "label_fraction", tmp_path)
    assert [p.name for p in paths] == [
        "accuracy_by_label_fraction.svg",
        "f1_by_label_fraction.svg",
        "auc_roc_by_label_fraction.svg",
    ]
    for path in paths:
        assert path.read_text(encoding="utf-8").lstrip().startswith("<?xml")
        table = pd.read_csv(path.with_suffix(".csv"), index_col=0)
        assert list(table.columns) == list(BAR_STAGES)
        assert len(table) == 1


def test_chart_csv_holds_plotted_values(tmp_path):
    """The CSV beside a chart carries the exact metric values."""
    emit_charts(_records((0.1, 0.2)), "label_fraction", tmp_path)
    table = pd.read_csv(tmp_path / "accuracy_by_label_fraction.csv", index_col=0)
    assert table.loc[0.1, BASELINE] == pytest.approx(0.8)
    assert table.loc[0.2, LP_SSL] == pytest.approx(1.0)
    assert table.loc[0.2, FULLY_SUPERVISED] == 1.0


def test_charts_are_reproducible(tmp_path):
    """Same records, byte-identical SVG."""
    first = emit_charts(_records(), "label_fraction", tmp_path / "a")
    second = emit_charts(_records(), "label_fraction", tmp_path / "b")
    for a, b in zip(first, second):
        assert a.read_bytes() == b.read_bytes()


def test_unit_axis_top_is_one():
    """A value of 1.0 reaches the top gridline."""
    fig, ax = plt.subplots()
    _unit_axis(ax, "accuracy")
    assert ax.get_ylim() == (0.0, 1.0)
    assert ax.get_yticks()[-1] == 1.0
    plt.close(fig)


def test_trend_chart(tmp_path):
    """One line per stage over a numeric axis, values as CSV."""
    path = emit_trend_chart(_records((0.1, 0.2, 0.35)), "label_fraction", tmp_path)
    assert path.name == "trend_label_fraction.svg"
    table = pd.read_csv(path.with_suffix(".csv"))
    assert set(table["metric"]) == {"accuracy", "f1", "auc_roc"}
    assert FULL in table.columns
    assert len(table) == 9


def test_heatmap(tmp_path):
    """Rows per configuration, columns per stage."""
    path = emit_heatmap(_records((0.1, 0.2)), ["label_fraction"], tmp_path)
    assert path.name == "heatmap_accuracy.svg"
    table = pd.read_csv(path.with_suffix(".csv"), index_col=0)
    assert list(table.columns) == [BASELINE, LP_SSL, FULL, FULLY_SUPERVISED]
    assert len(table) == 2


def test_radar_chart(tmp_path):
    """Baseline, LP-SSL and fully supervised per configuration; the full stage is left out."""
    path = emit_radar_chart(_records((0.1, 0.2)), "label_fraction", tmp_path)
    assert path.name == "radar_label_fraction.svg"
    assert path.read_text(encoding="utf-8").startswith("<?xml")
    table = pd.read_csv(path.with_suffix(".csv"))
    assert list(table.columns) == ["label_fraction", *BAR_STAGES, "metric"]
    assert len(table) == 6
    row = table[(table["metric"] == "accuracy") & (table["label_fraction"] == 0.1)]
    assert row[LP_SSL].item() == pytest.approx(0.9)


def test_radar_chart_missing_auc(tmp_path):
    """A run without AUC still draws; the CSV keeps the gap."""
    records = _records()
    for record in records:
        record.metrics = MetricsReport(accuracy=0.5, f1=0.0, auc_roc=None)
    path = emit_radar_chart(records, "label_fraction", tmp_path)
    table = pd.read_csv(path.with_suffix(".csv"))
    assert table.loc[table["metric"] == "auc_roc", BASELINE].isna().all()


def test_radar_chart_needs_records(tmp_path):
    with pytest.raises(ValueError):
        emit_radar_chart([], "label_fraction", tmp_path)
