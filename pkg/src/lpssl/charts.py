"""SVG comparison charts over run records; every chart has its values as CSV beside it."""

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from .pipeline import BASELINE, FULL, FULLY_SUPERVISED, LP_SSL, METRIC_NAMES, RunRecord, records_frame

logger = logging.getLogger(__name__)

BAR_STAGES = (BASELINE, LP_SSL, FULLY_SUPERVISED)
ALL_STAGES = (BASELINE, LP_SSL, FULL, FULLY_SUPERVISED)
STAGE_LABELS = {
    BASELINE: "Baseline",
    LP_SSL: "LP-SSL",
    FULL: "Full pipeline",
    FULLY_SUPERVISED: "Fully supervised",
}
STAGE_COLORS = {
    BASELINE: "#FF9800",
    LP_SSL: "#4CAF50",
    FULL: "#2196F3",
    FULLY_SUPERVISED: "#9E9E9E",
}
METRIC_LABELS = {"accuracy": "Accuracy", "f1": "F1", "auc_roc": "AUC-ROC"}
UNIT_TICKS = np.linspace(0.0, 1.0, 6)

# no timestamps and fixed element ids, so identical values give identical files
plt.rcParams["svg.hashsalt"] = "lpssl"
SVG_METADATA = {"Date": None}


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata=SVG_METADATA)
    plt.close(fig)
    logger.info(f"💾  Saved chart to {path}")
    return path


def _metric_table(records: list[RunRecord], axis: str, metric: str, stages: tuple[str, ...]) -> pd.DataFrame:
    """Mean metric per (axis value, stage); rows ordered by axis value."""
    frame = records_frame(records, [axis])
    frame = frame[(frame["metric"] == metric) & (frame["stage"].isin(stages))]
    frame = frame.assign(value=pd.to_numeric(frame["value"], errors="coerce"))
    table = frame.pivot_table(index=axis, columns="stage", values="value", aggfunc="mean", dropna=False)
    present = [s for s in stages if s in table.columns]
    return table.reindex(columns=present).sort_index()


def _unit_axis(ax, metric: str) -> None:
    ax.set_ylim(0.0, 1.0)
    ax.set_yticks(UNIT_TICKS)
    ax.set_ylabel(METRIC_LABELS.get(metric, metric))
    ax.grid(axis="y", linestyle="--", alpha=0.3)
    ax.set_axisbelow(True)


def _draw_grouped_bars(table: pd.DataFrame, axis: str, metric: str, path: Path) -> Path:
    groups = [str(v) for v in table.index]
    stages = list(table.columns)
    width = 0.8 / max(len(stages), 1)
    x = np.arange(len(groups))

    fig, ax = plt.subplots(figsize=(max(6, 1.6 * len(groups) + 3), 4.5))
    for i, stage in enumerate(stages):
        offset = (i - (len(stages) - 1) / 2) * width
        ax.bar(x + offset, table[stage].to_numpy(), width, label=STAGE_LABELS.get(stage, stage),
               color=STAGE_COLORS.get(stage))
    ax.set_xticks(x, groups)
    ax.set_xlabel(axis)
    _unit_axis(ax, metric)
    ax.set_title(f"{METRIC_LABELS.get(metric, metric)} by {axis}")
    ax.legend(loc="lower right")
    fig.tight_layout()
    return _save(fig, path)


def emit_charts(records: list[RunRecord], axis: str, out_dir: str | Path) -> list[Path]:
    """One grouped bar chart per metric: baseline, LP-SSL and fully supervised per axis value."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for metric in METRIC_NAMES:
        table = _metric_table(records, axis, metric, BAR_STAGES)
        if table.empty:
            logger.warning(f"No {metric} values to chart over {axis}")
            continue
        stem = out_dir / f"{metric}_by_{axis}"
        table.to_csv(stem.with_suffix(".csv"), float_format="%.10g")
        paths.append(_draw_grouped_bars(table, axis, metric, stem.with_suffix(".svg")))
    return paths


def emit_trend_chart(records: list[RunRecord], axis: str, out_dir: str | Path) -> Path:
    """Each metric against a numeric axis (e.g. label_fraction), one line per stage."""
    out_dir = Path(out_dir)
    fig, axes = plt.subplots(1, len(METRIC_NAMES), figsize=(5 * len(METRIC_NAMES), 4))
    tables = []
    for ax, metric in zip(axes, METRIC_NAMES):
        table = _metric_table(records, axis, metric, ALL_STAGES)
        for stage in table.columns:
            ax.plot(table.index.to_numpy(dtype=float), table[stage].to_numpy(), marker="o",
                    label=STAGE_LABELS.get(stage, stage), color=STAGE_COLORS.get(stage))
        ax.set_xlabel(axis)
        _unit_axis(ax, metric)
        tables.append(table.assign(metric=metric).reset_index())
    axes[0].legend(loc="lower right")
    fig.tight_layout()

    stem = out_dir / f"trend_{axis}"
    stem.parent.mkdir(parents=True, exist_ok=True)
    pd.concat(tables, ignore_index=True).to_csv(stem.with_suffix(".csv"), index=False, float_format="%.10g")
    return _save(fig, stem.with_suffix(".svg"))


def emit_heatmap(records: list[RunRecord], axes: list[str], out_dir: str | Path,
                 metric: str = "accuracy") -> Path:
    """Heat map of ``metric`` with one row per grid cell and one column per stage."""
    out_dir = Path(out_dir)
    frame = records_frame(records, axes)
    frame = frame[frame["metric"] == metric]
    frame = frame.assign(
        cell=frame[list(axes)].astype(str).agg(", ".join, axis=1) if axes else frame["out_dir"],
        value=pd.to_numeric(frame["value"], errors="coerce"),
    )
    table = frame.pivot_table(index="cell", columns="stage", values="value", aggfunc="mean", dropna=False)
    table = table.reindex(columns=[s for s in ALL_STAGES if s in table.columns])

    values = table.to_numpy(dtype=float)
    fig, ax = plt.subplots(figsize=(2 + 1.8 * values.shape[1], 1.5 + 0.45 * values.shape[0]))
    image = ax.imshow(values, vmin=0.0, vmax=1.0, cmap="viridis", aspect="auto")
    ax.set_xticks(np.arange(values.shape[1]), [STAGE_LABELS.get(s, s) for s in table.columns])
    ax.set_yticks(np.arange(values.shape[0]), list(table.index))
    for (row, col), value in np.ndenumerate(values):
        if np.isfinite(value):
            ax.text(col, row, f"{value:.3f}", ha="center", va="center", color="white", fontsize=8)
    ax.set_title(f"{METRIC_LABELS.get(metric, metric)} by configuration")
    fig.colorbar(image, ax=ax)
    fig.tight_layout()

    stem = out_dir / f"heatmap_{metric}"
    stem.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(stem.with_suffix(".csv"), float_format="%.10g")
    return _save(fig, stem.with_suffix(".svg"))


def emit_radar_chart(records: list[RunRecord], axis: str, out_dir: str | Path) -> Path:
    """One polar chart per axis value: a spoke per metric, a polygon per stage."""
    if not records:
        raise ValueError(f"No records to chart over {axis}")
    out_dir = Path(out_dir)
    tables = {metric: _metric_table(records, axis, metric, BAR_STAGES) for metric in METRIC_NAMES}
    groups = sorted(set().union(*(table.index for table in tables.values())))
    stages = [s for s in BAR_STAGES if any(s in table.columns for table in tables.values())]

    angles = np.linspace(0.0, 2 * np.pi, len(METRIC_NAMES), endpoint=False)
    closed = np.append(angles, angles[0])
    fig, axes = plt.subplots(1, len(groups), figsize=(4 * len(groups), 4.4),
                             subplot_kw={"projection": "polar"}, squeeze=False)
    for ax, group in zip(axes[0], groups):
        for stage in stages:
            radii = np.array([
                tables[metric].reindex(index=[group], columns=[stage]).iloc[0, 0] for metric in METRIC_NAMES
            ], dtype=float)
            # missing AUC sits at the center
            radii = np.nan_to_num(radii, nan=0.0)
            ax.plot(closed, np.append(radii, radii[0]), color=STAGE_COLORS.get(stage),
                    label=STAGE_LABELS.get(stage, stage), linewidth=1.5)
            ax.fill(closed, np.append(radii, radii[0]), color=STAGE_COLORS.get(stage), alpha=0.15)
        ax.set_xticks(angles, [METRIC_LABELS.get(m, m) for m in METRIC_NAMES])
        ax.set_ylim(0.0, 1.0)
        ax.set_yticks(UNIT_TICKS[1:])
        ax.tick_params(axis="y", labelsize=7)
        ax.set_title(f"{axis} = {group}", pad=14)
    axes[0][0].legend(loc="upper right", bbox_to_anchor=(1.25, 1.15), fontsize=8)
    fig.tight_layout()

    stem = out_dir / f"radar_{axis}"
    stem.parent.mkdir(parents=True, exist_ok=True)
    values = pd.concat([table.assign(metric=metric).reset_index() for metric, table in tables.items()],
                       ignore_index=True)
    values.to_csv(stem.with_suffix(".csv"), index=False, float_format="%.10g")
    return _save(fig, stem.with_suffix(".svg"))


__all__ = ["BAR_STAGES", "emit_charts", "emit_trend_chart", "emit_heatmap", "emit_radar_chart"]
