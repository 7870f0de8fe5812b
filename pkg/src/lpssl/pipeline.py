"""Baseline / fully supervised / LP-SSL / full stages, end to end from one config."""

from dataclasses import dataclass, field
from itertools import product
import json
import logging
from pathlib import Path
import time
from typing import Any

import numpy as np
import pandas as pd

from .config import ExperimentConfig
from .corpus import (
    IndexedDataset,
    SplitSpec,
    Vocabulary,
    build_vocabulary,
    corpus_tokens,
    index_dataset,
    index_test_documents,
    load_documents,
    split_documents,
)
from .diffusion import (
    LabelDistribution,
    PseudoLabelSet,
    diffuse,
    export_pseudo_labels,
    extract_pseudo_labels,
    pseudo_label_accuracy,
    seed_matrix,
)
from .embeddings import EmbeddingTable, default_embedding_table, embedding_stats, load_word_vectors
from .errors import DimensionMismatch, NoLabeledPoints, NotConverged, StageOrderError
from .graph import build_graph, save_features, save_graph
from .metrics import MetricsReport
from .model import (
    WEIGHTING_CERTAINTY_CLASS,
    WEIGHTING_NONE,
    TextClassifier,
    TrainConfig,
    build_classifier,
    evaluate,
    extract_features,
    load_checkpoint,
    reset_head,
    save_checkpoint,
    train,
)
from .schemas import METRICS_SCHEMA, validate_json_schema
from .utils import fnv1a_64

logger = logging.getLogger(__name__)

BASELINE = "baseline"
FULLY_SUPERVISED = "fully_supervised"
LP_SSL = "lp_ssl"
FULL = "full"

CONFIG_FILE = "config.env"
METRICS_FILE = "metrics.json"
CHECKPOINT_FILE = "model.lpck"
SUMMARY_FILE = "summary.csv"
METRIC_NAMES = ("accuracy", "f1", "auc_roc")

# Keys that decide what `prepare` produces
DATA_KEYS = (
    "dataset_path",
    "test_path",
    "num_classes",
    "vocab_max_size",
    "max_len",
    "train_fraction",
    "label_fraction",
    "seed",
    "embedding_path",
    "embedding_dim",
)


@dataclass
class PreparedCorpus:
    vocab: Vocabulary
    train: IndexedDataset
    validation: IndexedDataset
    embeddings: EmbeddingTable
    test: IndexedDataset | None = None
    directory: Path | None = None


@dataclass
class RunRecord:
    stage: str
    metrics: MetricsReport
    wall_time: float
    config_digest: str
    config: ExperimentConfig
    artifacts: dict[str, Path] = field(default_factory=dict)
    test_metrics: MetricsReport | None = None
    details: dict[str, Any] = field(default_factory=dict)
    full: "RunRecord | None" = None

    def metrics_payload(self) -> dict[str, Any]:
        payload = {
            "stage": self.stage,
            **self.metrics.as_dict(),
            "wall_time_s": round(self.wall_time, 6) if self.config.report_timing else None,
            "config_digest": self.config_digest,
        }
        if self.test_metrics is not None:
            payload["test"] = self.test_metrics.as_dict()
        return payload


@dataclass
class GridResult:
    records: list[RunRecord]
    failures: list[dict[str, Any]]
    summary_path: Path
    charts: list[Path] = field(default_factory=list)


_prepared_cache: dict[str, PreparedCorpus] = {}


def clear_prepared_cache() -> None:
    _prepared_cache.clear()


def _data_digest(cfg: ExperimentConfig) -> str:
    items = dict(cfg.canonical_items())
    lines = [f"{key}={items[key]}" for key in DATA_KEYS]
    lines.append(f"out_dir={cfg.output_path.resolve()}")
    return f"{fnv1a_64(chr(10).join(lines)):016x}"


def prepare(cfg: ExperimentConfig) -> PreparedCorpus:
    """Load, split, index and embed the corpus; artifacts go to ``<out>/prepared``.

    Results are cached in-process by the data-defining keys and the resolved output
    directory, so the stages of one experiment share one preparation. Grid cells write
    to their own directories and each prepare their own corpus.
    """
    cfg.require_valid()
    key = _data_digest(cfg)
    if key in _prepared_cache:
        return _prepared_cache[key]

    docs = load_documents(cfg.dataset_path, cfg.num_classes)
    spec = SplitSpec(train_fraction=cfg.train_fraction, label_fraction=cfg.label_fraction, seed=cfg.seed)
    train_docs, _ = split_documents(docs, spec)
    # vocabulary sees the train split only
    vocab = build_vocabulary(corpus_tokens(train_docs), cfg.vocab_max_size)
    train_set, validation = index_dataset(docs, vocab, cfg.max_len, spec, cfg.num_classes)

    test = None
    if cfg.test_path:
        test_docs = load_documents(cfg.test_path, cfg.num_classes)
        test = index_test_documents(test_docs, vocab, cfg.max_len, cfg.num_classes)

    if cfg.embedding_path:
        embeddings = load_word_vectors(cfg.embedding_path, vocab)
        if embeddings.dim != cfg.embedding_dim:
            raise DimensionMismatch(
                f"{cfg.embedding_path} has d={embeddings.dim}, config embedding_dim={cfg.embedding_dim}"
            )
    else:
        embeddings = default_embedding_table(vocab, cfg.embedding_dim)
    stats = embedding_stats(embeddings)

    directory = cfg.output_path / "prepared"
    vocab.dump(directory / "vocab.tsv")
    train_set.save(directory / "train.npz")
    validation.save(directory / "validation.npz")
    if test is not None:
        test.save(directory / "test.npz")
    embeddings.save(directory / "embeddings.npz")
    (directory / "embedding_stats.json").write_text(json.dumps(stats, indent=2, sort_keys=True) + "\n",
                                                     encoding="utf-8")

    prepared = PreparedCorpus(vocab=vocab, train=train_set, validation=validation, embeddings=embeddings,
                              test=test, directory=directory)
    _prepared_cache[key] = prepared
    logger.info(f"✅ Prepared corpus: |V|={len(vocab)}, coverage {stats['coverage']:.4f}, "
                f"artifacts in {directory}")
    return prepared


def stage_dir(cfg: ExperimentConfig, stage: str) -> Path:
    return cfg.output_path / stage


def _new_classifier(cfg: ExperimentConfig, prepared: PreparedCorpus) -> TextClassifier:
    return build_classifier(
        vocab_size=len(prepared.vocab),
        embed_dim=prepared.embeddings.dim,
        hidden_dim=cfg.hidden_dim,
        num_classes=cfg.num_classes,
        num_hidden_layers=cfg.num_hidden_layers,
        finetune_embeddings=cfg.finetune_embeddings,
        embeddings=prepared.embeddings.matrix,
        seed=cfg.seed,
    )


def _train_config(cfg: ExperimentConfig, epochs: int, weighting: str = WEIGHTING_NONE) -> TrainConfig:
    return TrainConfig(epochs=epochs, batch_size=cfg.batch_size, learning_rate=cfg.learning_rate,
                       seed=cfg.seed, weighting=weighting)


def _finish_stage(cfg: ExperimentConfig, prepared: PreparedCorpus, stage: str, model: TextClassifier,
                  started: float, artifacts: dict[str, Path] | None = None,
                  details: dict[str, Any] | None = None) -> RunRecord:
    """Evaluate, then write config, checkpoint and metrics JSON for one stage."""
    metrics = evaluate(model, prepared.validation)
    test_metrics = evaluate(model, prepared.test) if prepared.test is not None else None
    wall_time = time.perf_counter() - started

    out = stage_dir(cfg, stage)
    artifacts = dict(artifacts or {})
    artifacts["config"] = cfg.write(out / CONFIG_FILE)
    artifacts["checkpoint"] = save_checkpoint(out / CHECKPOINT_FILE, model)

    record = RunRecord(stage=stage, metrics=metrics, wall_time=wall_time, config_digest=cfg.digest,
                       config=cfg, artifacts=artifacts, test_metrics=test_metrics, details=details or {})
    payload = record.metrics_payload()
    validate_json_schema(payload, METRICS_SCHEMA, name="Metrics")
    metrics_path = out / METRICS_FILE
    metrics_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    artifacts["metrics"] = metrics_path

    auc = "n/a" if metrics.auc_roc is None else f"{metrics.auc_roc:.4f}"
    logger.info(f"✅ {stage}: accuracy {metrics.accuracy:.4f}, f1 {metrics.f1:.4f}, auc {auc} "
                f"({wall_time:.2f}s)")
    return record


def run_baseline(cfg: ExperimentConfig) -> RunRecord:
    """Train on the labeled subset L for M epochs (lower bound)."""
    started = time.perf_counter()
    prepared = prepare(cfg)
    if prepared.train.labeled_count == 0:
        raise NoLabeledPoints("Baseline needs at least one labeled training point")
    model = _new_classifier(cfg, prepared)
    result = train(model, prepared.train, None, _train_config(cfg, cfg.epochs_m))
    return _finish_stage(cfg, prepared, BASELINE, result.model, started, details={"losses": result.losses})


def run_fully_supervised(cfg: ExperimentConfig) -> RunRecord:
    """Train on every training point with its gold label for M epochs (upper bound)."""
    started = time.perf_counter()
    prepared = prepare(cfg)
    model = _new_classifier(cfg, prepared)
    result = train(model, prepared.train.fully_labeled(), None, _train_config(cfg, cfg.epochs_m))
    return _finish_stage(cfg, prepared, FULLY_SUPERVISED, result.model, started,
                         details={"losses": result.losses})


def _require_checkpoint(cfg: ExperimentConfig, record: RunRecord, stage: str) -> Path:
    if record.stage != stage:
        raise StageOrderError(f"Expected a {stage} record, got {record.stage}")
    if record.config_digest != cfg.digest:
        raise StageOrderError(
            f"{stage} record has config digest {record.config_digest}, current config is {cfg.digest}"
        )
    checkpoint = record.artifacts.get("checkpoint")
    if checkpoint is None or not Path(checkpoint).is_file():
        raise StageOrderError(f"No {stage} checkpoint found; run the {stage} stage first")
    return Path(checkpoint)


def _load_stage_model(cfg: ExperimentConfig, prepared: PreparedCorpus, checkpoint: Path) -> TextClassifier:
    expected = {
        "vocab_size": len(prepared.vocab),
        "embed_dim": prepared.embeddings.dim,
        "hidden_dim": cfg.hidden_dim,
        "num_hidden_layers": cfg.num_hidden_layers,
        "num_classes": cfg.num_classes,
    }
    return load_checkpoint(checkpoint, finetune_embeddings=cfg.finetune_embeddings, expected=expected)


def propagate(cfg: ExperimentConfig, model: TextClassifier, dataset: IndexedDataset,
              out_dir: Path) -> tuple[PseudoLabelSet, LabelDistribution, dict[str, Any]]:
    """Features -> kNN graph -> diffusion -> weighted pseudo-labels, with artifacts in ``out_dir``."""
    features = extract_features(model, dataset)
    graph = build_graph(features, cfg.k, cfg.gamma)
    save_features(out_dir / "features.lpfm", features)
    save_graph(out_dir / "graph.lpgr", graph)

    try:
        z = diffuse(graph, seed_matrix(dataset), alpha=cfg.alpha, tol=cfg.tol, max_iter=cfg.max_iter,
                    n_jobs=cfg.n_jobs)
    except NotConverged as e:
        logger.warning(f"{str(e)}; continuing with the partial solution")
        z = e.partial

    pseudo = extract_pseudo_labels(z, dataset)
    csv_path, json_path = export_pseudo_labels(pseudo, z, out_dir)
    accuracy = pseudo_label_accuracy(pseudo, dataset.gold_labels)
    logger.info(f"Pseudo-label accuracy on unlabeled points: {accuracy:.4f}")
    details = {
        "pseudo_label_accuracy": accuracy,
        "residual": z.residual_norm,
        "iterations": z.iterations,
        "converged": z.converged,
        "fallback_count": z.fallback_count,
        "artifacts": {
            "features": out_dir / "features.lpfm",
            "graph": out_dir / "graph.lpgr",
            "pseudo_labels": csv_path,
            "pseudo_labels_meta": json_path,
        },
    }
    return pseudo, z, details


def _weighted_stage(cfg: ExperimentConfig, prepared: PreparedCorpus, stage: str, model: TextClassifier,
                    epochs: int, reset: bool, started: float) -> RunRecord:
    out = stage_dir(cfg, stage)
    pseudo, _, details = propagate(cfg, model, prepared.train, out)
    if reset:
        reset_head(model, seed=cfg.seed)
    result = train(model, prepared.train, pseudo, _train_config(cfg, epochs, WEIGHTING_CERTAINTY_CLASS))
    artifacts = details.pop("artifacts")
    details["losses"] = result.losses
    return _finish_stage(cfg, prepared, stage, result.model, started, artifacts=artifacts, details=details)


def run_lp_ssl(cfg: ExperimentConfig, baseline: RunRecord) -> RunRecord:
    """Propagate from baseline features, reset the head and train on L and U for E epochs.

    The full stage follows immediately and is attached as ``record.full``.
    """
    checkpoint = _require_checkpoint(cfg, baseline, BASELINE)
    started = time.perf_counter()
    prepared = prepare(cfg)
    model = _load_stage_model(cfg, prepared, checkpoint)
    record = _weighted_stage(cfg, prepared, LP_SSL, model, cfg.epochs_e, reset=True, started=started)
    record.full = run_full_pipeline(cfg, record)
    return record


def run_full_pipeline(cfg: ExperimentConfig, lp_ssl: RunRecord) -> RunRecord:
    """Second propagation round from LP-SSL features, then N more weighted epochs."""
    checkpoint = _require_checkpoint(cfg, lp_ssl, LP_SSL)
    started = time.perf_counter()
    prepared = prepare(cfg)
    model = _load_stage_model(cfg, prepared, checkpoint)
    return _weighted_stage(cfg, prepared, FULL, model, cfg.epochs_n, reset=False, started=started)


def _existing_record(cfg: ExperimentConfig, stage: str) -> RunRecord | None:
    out = stage_dir(cfg, stage)
    if not (out / METRICS_FILE).is_file() or not (out / CHECKPOINT_FILE).is_file():
        return None
    records = [r for r in load_records(out) if r.config_digest == cfg.digest]
    return records[0] if records else None


def propagate_only(cfg: ExperimentConfig) -> PseudoLabelSet:
    """Pseudo-labels from the baseline model, exported to ``<out>/lp``.

    A baseline checkpoint with the same config digest is reused, otherwise trained.
    """
    baseline = _existing_record(cfg, BASELINE)
    if baseline is None:
        baseline = run_baseline(cfg)
    else:
        logger.info(f"Reusing baseline checkpoint {baseline.artifacts['checkpoint']}")
    prepared = prepare(cfg)
    model = _load_stage_model(cfg, prepared, _require_checkpoint(cfg, baseline, BASELINE))
    out = cfg.output_path / "lp"
    cfg.write(out / CONFIG_FILE)
    pseudo, _, _ = propagate(cfg, model, prepared.train, out)
    return pseudo


def run_experiment(cfg: ExperimentConfig) -> list[RunRecord]:
    """Baseline, fully supervised, LP-SSL and full stages in order."""
    logger.info(f"Running experiment {cfg.digest} into {cfg.output_path}")
    baseline = run_baseline(cfg)
    supervised = run_fully_supervised(cfg)
    lp = run_lp_ssl(cfg, baseline)
    records = [baseline, supervised, lp]
    if lp.full is not None:
        records.append(lp.full)
    return records


def records_frame(records: list[RunRecord], axes: list[str] | tuple[str, ...] = ()) -> pd.DataFrame:
    """One row per (config, stage, metric)."""
    rows = []
    for record in records:
        base = {"config_digest": record.config_digest, "out_dir": record.config.out_dir}
        base.update({axis: getattr(record.config, axis) for axis in axes})
        for metric in METRIC_NAMES:
            rows.append({**base, "stage": record.stage, "metric": metric,
                         "value": getattr(record.metrics, metric)})
    columns = ["config_digest", "out_dir", *axes, "stage", "metric", "value"]
    return pd.DataFrame(rows, columns=columns)


def _cell_name(index: int, values: dict[str, Any]) -> str:
    parts = "_".join(f"{key}={value}" for key, value in values.items())
    safe = "".join(ch if ch.isalnum() or ch in "=._-" else "-" for ch in parts)
    return f"cell{index:03d}_{safe}"


def run_grid(cfg: ExperimentConfig, sweep: dict[str, list[Any]], charts: bool = True) -> GridResult:
    """Full experiment for every combination of ``sweep`` values, one directory per cell.

    A failing cell is recorded in ``failures`` and the sweep moves on.
    """
    if not sweep or any(len(values) == 0 for values in sweep.values()):
        raise ValueError("Sweep needs at least one axis with at least one value")
    axes = list(sweep)
    root = cfg.output_path
    records: list[RunRecord] = []
    failures: list[dict[str, Any]] = []

    combos = list(product(*(sweep[axis] for axis in axes)))
    logger.info(f"Grid over {', '.join(axes)}: {len(combos)} configuration(s)")
    for index, combo in enumerate(combos):
        values = dict(zip(axes, combo))
        cell_dir = root / _cell_name(index, values)
        try:
            cell_cfg = cfg.with_overrides({**values, "out_dir": str(cell_dir)}, source="sweep")
            records.extend(run_experiment(cell_cfg))
        except Exception as e:
            logger.error(f"Grid cell {values} failed: {str(e)}")
            failures.append({**values, "error": type(e).__name__, "message": str(e)})

    root.mkdir(parents=True, exist_ok=True)
    summary_path = root / SUMMARY_FILE
    records_frame(records, axes).to_csv(summary_path, index=False, float_format="%.10g")
    if failures:
        pd.DataFrame(failures).to_csv(root / "failures.csv", index=False)
    logger.info(f"💾  Saved grid summary to {summary_path} ({len(failures)} failed cell(s))")

    chart_paths: list[Path] = []
    if charts and records:
        from .charts import emit_charts

        for axis in axes:
            chart_paths.extend(emit_charts(records, axis, root / "charts"))
    return GridResult(records=records, failures=failures, summary_path=summary_path, charts=chart_paths)


def _report_from(payload: dict[str, Any] | None) -> MetricsReport | None:
    if payload is None:
        return None
    return MetricsReport(accuracy=payload["accuracy"], f1=payload["f1"], auc_roc=payload["auc_roc"])


def load_records(directory: str | Path) -> list[RunRecord]:
    """Rebuild records from every ``metrics.json`` + ``config.env`` pair below ``directory``."""
    directory = Path(directory)
    records = []
    for metrics_path in sorted(directory.rglob(METRICS_FILE)):
        config_path = metrics_path.parent / CONFIG_FILE
        if not config_path.is_file():
            logger.warning(f"Skipping {metrics_path}: no {CONFIG_FILE} next to it")
            continue
        payload = json.loads(metrics_path.read_text(encoding="utf-8"))
        validate_json_schema(payload, METRICS_SCHEMA, name=str(metrics_path))
        cfg = ExperimentConfig.from_file(config_path, use_env=False)
        artifacts = {"config": config_path, "metrics": metrics_path}
        checkpoint = metrics_path.parent / CHECKPOINT_FILE
        if checkpoint.is_file():
            artifacts["checkpoint"] = checkpoint
        records.append(RunRecord(
            stage=payload["stage"],
            metrics=_report_from(payload),
            wall_time=payload["wall_time_s"] or 0.0,
            config_digest=payload["config_digest"],
            config=cfg,
            artifacts=artifacts,
            test_metrics=_report_from(payload.get("test")),
        ))
    return records


def summarize(records: list[RunRecord]) -> dict[str, dict[str, float | None]]:
    """Mean of each metric per stage."""
    out: dict[str, dict[str, float | None]] = {}
    for stage in dict.fromkeys(r.stage for r in records):
        stage_records = [r for r in records if r.stage == stage]
        out[stage] = {}
        for metric in METRIC_NAMES:
            values = [getattr(r.metrics, metric) for r in stage_records]
            values = [v for v in values if v is not None]
            out[stage][metric] = float(np.mean(values)) if values else None
    return out


__all__ = [
    "BASELINE",
    "FULLY_SUPERVISED",
    "LP_SSL",
    "FULL",
    "PreparedCorpus",
    "RunRecord",
    "GridResult",
    "clear_prepared_cache",
    "prepare",
    "stage_dir",
    "propagate",
    "run_baseline",
    "run_fully_supervised",
    "run_lp_ssl",
    "run_full_pipeline",
    "propagate_only",
    "run_experiment",
    "records_frame",
    "run_grid",
    "load_records",
    "summarize",
]
