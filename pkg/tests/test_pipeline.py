import json
from unittest import mock

import pandas as pd
import pytest

from lpssl.errors import NoLabeledPoints, StageOrderError
from lpssl.pipeline import (
    BASELINE,
    FULL,
    FULLY_SUPERVISED,
    LP_SSL,
    load_records,
    prepare,
    propagate_only,
    run_baseline,
    run_experiment,
    run_fully_supervised,
    run_grid,
    run_lp_ssl,
    summarize,
)
from lpssl.schemas import METRICS_SCHEMA, validate_json_schema
from lpssl.synthetic import write_synthetic_csv


def test_prepare_writes_artifacts(small_config):
    """Vocabulary, indexed splits and embedding stats under <out>/prepared."""
    prepared = prepare(small_config)
    assert len(prepared.train) == 160
    assert len(prepared.validation) == 40
    assert prepared.train.labeled_count > 0
    for name in ("vocab.tsv", "train.npz", "validation.npz", "embeddings.npz", "embedding_stats.json"):
        assert (prepared.directory / name).is_file()
    stats = json.loads((prepared.directory / "embedding_stats.json").read_text(encoding="utf-8"))
    assert stats["vocab_size"] == len(prepared.vocab)


def test_prepare_is_cached(small_config):
    """Model-only changes reuse the prepared corpus."""
    assert prepare(small_config) is prepare(small_config.with_overrides({"k": 7, "hidden_dim": 8}))
    assert prepare(small_config) is not prepare(small_config.with_overrides({"label_fraction": 0.3}))


def test_prepare_cache_is_per_output_directory(small_config, tmp_path):
    """Same data under another out_dir is prepared again and written there."""
    other = small_config.with_overrides({"out_dir": str(tmp_path / "elsewhere")})
    first, second = prepare(small_config), prepare(other)
    assert first is not second
    assert first.directory != second.directory
    assert (tmp_path / "elsewhere" / "prepared" / "vocab.tsv").is_file()
    assert first.vocab.id_to_token == second.vocab.id_to_token


def test_run_experiment_artifacts(small_config):
    """Four stages in order, each with config, checkpoint and schema-valid metrics."""
    records = run_experiment(small_config)
    assert [r.stage for r in records] == [BASELINE, FULLY_SUPERVISED, LP_SSL, FULL]

    for record in records:
        out = small_config.output_path / record.stage
        payload = json.loads((out / "metrics.json").read_text(encoding="utf-8"))
        validate_json_schema(payload, METRICS_SCHEMA)
        assert payload["stage"] == record.stage
        assert payload["config_digest"] == small_config.digest
        assert payload["wall_time_s"] is None
        assert (out / "config.env").is_file()
        assert (out / "model.lpck").is_file()

    lp_dir = small_config.output_path / LP_SSL
    for name in ("features.lpfm", "graph.lpgr", "pseudo_labels.csv", "pseudo_labels.json"):
        assert (lp_dir / name).is_file()
    assert 0.0 <= records[2].details["pseudo_label_accuracy"] <= 1.0


def test_metrics_identical_across_output_dirs(small_config, tmp_path):
    """Same config, different out_dir: byte-identical metrics files."""
    other = small_config.with_overrides({"out_dir": str(tmp_path / "again")})
    run_experiment(small_config)
    run_experiment(other)
    for stage in (BASELINE, FULLY_SUPERVISED, LP_SSL, FULL):
        first = (small_config.output_path / stage / "metrics.json").read_bytes()
        second = (other.output_path / stage / "metrics.json").read_bytes()
        assert first == second


def test_report_timing(small_config):
    """wall_time_s is filled in only when asked for."""
    record = run_baseline(small_config.with_overrides({"report_timing": True}))
    assert record.metrics_payload()["wall_time_s"] >= 0


def test_full_label_fraction_baseline_equals_supervised(small_config):
    """With every training label revealed the two bounds coincide."""
    cfg = small_config.with_overrides({"label_fraction": 1.0})
    assert run_baseline(cfg).metrics == run_fully_supervised(cfg).metrics


def test_lp_ssl_requires_baseline(small_config):
    """Stage order and config digest are checked."""
    supervised = run_fully_supervised(small_config)
    with pytest.raises(StageOrderError):
        run_lp_ssl(small_config, supervised)

    baseline = run_baseline(small_config)
    with pytest.raises(StageOrderError):
        run_lp_ssl(small_config.with_overrides({"k": 7}), baseline)


def test_tiny_alpha_gives_zero_certainty(small_config):
    """alpha near 0: unlabeled pseudo-labels fall back to uniform with weight 0."""
    cfg = small_config.with_overrides({"alpha": 1e-12})
    run_lp_ssl(cfg, run_baseline(cfg))
    frame = pd.read_csv(cfg.output_path / LP_SSL / "pseudo_labels.csv")
    unlabeled = frame[frame["is_seed"] == 0]
    assert (unlabeled["certainty"] == 0.0).all()
    assert (frame[frame["is_seed"] == 1]["certainty"] == 1.0).all()
    sidecar = json.loads((cfg.output_path / LP_SSL / "pseudo_labels.json").read_text(encoding="utf-8"))
    assert sidecar["fallback_count"] == len(unlabeled)


def test_propagate_only_reuses_baseline(small_config):
    """An existing baseline checkpoint with the same digest is not retrained."""
    run_baseline(small_config)
    with mock.patch("lpssl.pipeline.run_baseline", side_effect=AssertionError("retrained")):
        pseudo = propagate_only(small_config)
    assert len(pseudo) == 160
    assert (small_config.output_path / "lp" / "pseudo_labels.csv").is_file()
    assert (small_config.output_path / "lp" / "config.env").is_file()


def test_propagate_only_trains_missing_baseline(small_config):
    """Without a baseline on disk one is trained first."""
    propagate_only(small_config)
    assert (small_config.output_path / BASELINE / "model.lpck").is_file()


def test_test_path_metrics(small_config, tmp_path):
    """A held-out CSV adds test metrics to every stage."""
    test_csv = write_synthetic_csv(tmp_path / "test.csv", n_docs=60, seed=11)
    cfg = small_config.with_overrides({"test_path": str(test_csv)})
    record = run_baseline(cfg)
    payload = json.loads((cfg.output_path / BASELINE / "metrics.json").read_text(encoding="utf-8"))
    assert set(payload["test"]) == {"accuracy", "f1", "auc_roc"}
    assert record.test_metrics is not None


def test_grid_single_value(small_config):
    """One value on one axis: one configuration, four stage records, one summary."""
    result = run_grid(small_config, {"hidden_dim": [8]}, charts=False)
    assert len(result.records) == 4
    assert result.failures == []
    summary = pd.read_csv(result.summary_path)
    assert len(summary) == 4 * 3
    assert set(summary["hidden_dim"]) == {8}


def test_grid_continues_past_failing_cell(small_config):
    """A k larger than the training set fails its cell only."""
    result = run_grid(small_config, {"k": [5, 10_000]})
    assert len(result.records) == 4
    assert len(result.failures) == 1
    assert result.failures[0]["k"] == 10_000
    assert result.failures[0]["error"] == "KTooLarge"
    assert (small_config.output_path / "failures.csv").is_file()
    assert len(result.charts) == 3


def test_load_records_and_summarize(small_config):
    """Records rebuilt from disk match the in-memory ones."""
    records = run_experiment(small_config)
    loaded = load_records(small_config.output_path)
    assert sorted(r.stage for r in loaded) == sorted(r.stage for r in records)
    by_stage = {r.stage: r for r in loaded}
    for record in records:
        assert by_stage[record.stage].metrics.accuracy == record.metrics.accuracy
        assert by_stage[record.stage].config == record.config

    summary = summarize(loaded)
    assert set(summary) == {BASELINE, FULLY_SUPERVISED, LP_SSL, FULL}
    assert summary[BASELINE]["accuracy"] == by_stage[BASELINE].metrics.accuracy


def test_no_labeled_points(small_config):
    """An empty labeled subset stops the baseline before training."""
    prepared = prepare(small_config)
    prepared.train.labeled_mask[:] = False
    with pytest.raises(NoLabeledPoints):
        run_baseline(small_config)
