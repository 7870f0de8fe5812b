import logging
from typing import Any

from typing_extensions import Annotated
from fastmcp.server import FastMCP
from pydantic import Field
import numpy as np

from .config import ExperimentConfig, load_config
from .embeddings import embedding_stats
from .errors import ConfigError
from .pipeline import prepare, propagate_only, run_experiment, run_grid, stage_dir
from .schemas import CONFIG_OVERRIDES_SCHEMA, SWEEP_REQUEST_SCHEMA, validate_json_schema

logger = logging.getLogger(__name__)

CONFIG_PATH_DESCRIPTION = "Path to a flat key = value config file. If None, built-in defaults are used."
OVERRIDES_DESCRIPTION = (
    "Config keys to override, e.g. {\"dataset_path\": \"data/train.csv\", \"k\": 10}. "
    "Applied after the config file and LPSSL_* environment variables."
)


def _resolve_config(config_path: str | None, overrides: dict[str, Any] | None) -> ExperimentConfig:
    """
    Helper function to resolve and validate the experiment configuration.
    Raises ValueError (ConfigError) if the configuration is invalid.
    """
    validate_json_schema(overrides, CONFIG_OVERRIDES_SCHEMA, name="ConfigOverrides")
    cfg = load_config(config_path, overrides)
    config_errors = cfg.validate()
    if config_errors:
        raise ConfigError(f"Configuration errors: {'; '.join(config_errors)}")
    logger.info(f"✅ Config OK ({cfg.digest})")
    return cfg


def _prepare_corpus(config_path: str | None, overrides: dict[str, Any] | None) -> dict[str, Any]:
    cfg = _resolve_config(config_path, overrides)
    prepared = prepare(cfg)
    return {
        "status": "success",
        "config_digest": cfg.digest,
        "vocab_size": len(prepared.vocab),
        "train_size": len(prepared.train),
        "labeled_count": prepared.train.labeled_count,
        "validation_size": len(prepared.validation),
        "test_size": len(prepared.test) if prepared.test is not None else 0,
        "embedding": embedding_stats(prepared.embeddings),
        "artifacts_dir": str(prepared.directory),
    }


def _embedding_coverage(config_path: str | None, overrides: dict[str, Any] | None) -> dict[str, Any]:
    cfg = _resolve_config(config_path, overrides)
    if not cfg.embedding_path:
        raise ConfigError("embedding_path is required to report embedding coverage")
    prepared = prepare(cfg)
    return {
        "status": "success",
        "embedding_path": cfg.embedding_path,
        "duplicate_count": prepared.embeddings.duplicate_count,
        **embedding_stats(prepared.embeddings),
    }


def _propagate_labels(config_path: str | None, overrides: dict[str, Any] | None) -> dict[str, Any]:
    cfg = _resolve_config(config_path, overrides)
    pseudo = propagate_only(cfg)
    unlabeled = ~pseudo.source_mask
    out = cfg.output_path / "lp"
    return {
        "status": "success",
        "config_digest": cfg.digest,
        "points": len(pseudo),
        "seed_points": int(pseudo.source_mask.sum()),
        "class_counts": np.bincount(pseudo.labels, minlength=pseudo.num_classes).tolist(),
        "class_weights": [float(w) for w in pseudo.class_weights],
        "mean_certainty_unlabeled": float(pseudo.certainty[unlabeled].mean()) if unlabeled.any() else None,
        "pseudo_labels_csv": str(out / "pseudo_labels.csv"),
        "baseline_dir": str(stage_dir(cfg, "baseline")),
    }


def _run_experiment(config_path: str | None, overrides: dict[str, Any] | None) -> dict[str, Any]:
    cfg = _resolve_config(config_path, overrides)
    records = run_experiment(cfg)
    return {
        "status": "success",
        "config_digest": cfg.digest,
        "out_dir": str(cfg.output_path),
        "stages": [record.metrics_payload() for record in records],
    }


def _run_grid_sweep(sweep: dict[str, list[Any]], config_path: str | None,
                    overrides: dict[str, Any] | None) -> dict[str, Any]:
    validate_json_schema({"sweep": sweep, "overrides": overrides}, SWEEP_REQUEST_SCHEMA, name="SweepRequest")
    unknown = sorted(set(sweep) - set(ExperimentConfig.field_types()))
    if unknown:
        raise ConfigError(f"Unknown sweep axes: {', '.join(unknown)}")
    cfg = _resolve_config(config_path, overrides)
    result = run_grid(cfg, sweep)
    return {
        "status": "success",
        "cells": int(np.prod([len(values) for values in sweep.values()])),
        "records": len(result.records),
        "failures": result.failures,
        "summary_csv": str(result.summary_path),
        "charts": [str(p) for p in result.charts],
    }

# Tool registration

def register_tools(mcp: FastMCP):
    @mcp.tool()
    def prepare_corpus(
        config_path: Annotated[str | None, Field(description=CONFIG_PATH_DESCRIPTION)] = None,
        overrides: Annotated[dict[str, Any] | None, Field(description=OVERRIDES_DESCRIPTION)] = None,
    ) -> dict[str, Any]:
        """Clean, tokenize, split and index the dataset; build vocabulary and embedding matrix."""
        try:
            return _prepare_corpus(config_path, overrides)
        except ValueError as e:
            logger.error(f"Error in prepare_corpus: {str(e)}")
            return {"status": "error", "message": str(e)}

    @mcp.tool()
    def embedding_coverage(
        config_path: Annotated[str | None, Field(description=CONFIG_PATH_DESCRIPTION)] = None,
        overrides: Annotated[dict[str, Any] | None, Field(description=OVERRIDES_DESCRIPTION)] = None,
    ) -> dict[str, Any]:
        """How many vocabulary entries the configured word-vector file covers."""
        try:
            return _embedding_coverage(config_path, overrides)
        except ValueError as e:
            logger.error(f"Error in embedding_coverage: {str(e)}")
            return {"status": "error", "message": str(e)}

    @mcp.tool()
    def propagate_labels(
        config_path: Annotated[str | None, Field(description=CONFIG_PATH_DESCRIPTION)] = None,
        overrides: Annotated[dict[str, Any] | None, Field(description=OVERRIDES_DESCRIPTION)] = None,
    ) -> dict[str, Any]:
        """Propagate labels from the baseline model's features and export weighted pseudo-labels."""
        try:
            return _propagate_labels(config_path, overrides)
        except ValueError as e:
            logger.error(f"Error in propagate_labels: {str(e)}")
            return {"status": "error", "message": str(e)}

    @mcp.tool(name="run_experiment")
    def run_experiment_tool(
        config_path: Annotated[str | None, Field(description=CONFIG_PATH_DESCRIPTION)] = None,
        overrides: Annotated[dict[str, Any] | None, Field(description=OVERRIDES_DESCRIPTION)] = None,
    ) -> dict[str, Any]:
        """Baseline, fully supervised, LP-SSL and full stages; returns each stage's metrics."""
        try:
            return _run_experiment(config_path, overrides)
        except ValueError as e:
            logger.error(f"Error in run_experiment: {str(e)}")
            return {"status": "error", "message": str(e)}

    @mcp.tool()
    def run_grid_sweep(
        sweep: Annotated[dict[str, list[Any]], Field(description="Config key to list of values, e.g. {\"label_fraction\": [0.1, 0.2, 0.35]}. Every combination is run.")],
        config_path: Annotated[str | None, Field(description=CONFIG_PATH_DESCRIPTION)] = None,
        overrides: Annotated[dict[str, Any] | None, Field(description=OVERRIDES_DESCRIPTION)] = None,
    ) -> dict[str, Any]:
        """Grid sweep of full experiments with a summary CSV and comparison charts."""
        try:
            return _run_grid_sweep(sweep, config_path, overrides)
        except ValueError as e:
            logger.error(f"Error in run_grid_sweep: {str(e)}")
            return {"status": "error", "message": str(e)}


__all__ = [
    "register_tools"
]
