import numpy as np
import pytest

from lpssl.config import ExperimentConfig
from lpssl.corpus import IndexedDataset
from lpssl.pipeline import clear_prepared_cache
from lpssl.synthetic import write_synthetic_csv


@pytest.fixture(autouse=True)
def _isolated(monkeypatch):
    """Keep LPSSL_* variables from the developer's shell out of the tests."""
    import os

    for name in list(os.environ):
        if name.startswith("LPSSL_"):
            monkeypatch.delenv(name)
    clear_prepared_cache()
    yield
    clear_prepared_cache()


@pytest.fixture
def synthetic_csv(tmp_path):
    return write_synthetic_csv(tmp_path / "synthetic.csv", n_docs=200, seed=7)


@pytest.fixture
def small_config(tmp_path, synthetic_csv):
    """Desk-scale config that runs every stage in a few seconds."""
    return ExperimentConfig().with_overrides({
        "dataset_path": str(synthetic_csv),
        "label_fraction": 0.2,
        "vocab_max_size": 500,
        "max_len": 40,
        "embedding_dim": 16,
        "hidden_dim": 16,
        "k": 5,
        "epochs_m": 3,
        "epochs_e": 2,
        "epochs_n": 2,
        "batch_size": 32,
        "learning_rate": 0.01,
        "out_dir": str(tmp_path / "runs"),
    })


def make_dataset(labels, labeled, num_classes=2, max_len=4) -> IndexedDataset:
    labels = np.asarray(labels, dtype=np.int64)
    mask = np.zeros(labels.shape[0], dtype=bool)
    mask[list(labeled)] = True
    sequences = np.tile(np.arange(2, 2 + max_len, dtype=np.int64), (labels.shape[0], 1))
    return IndexedDataset(sequences=sequences, gold_labels=labels, labeled_mask=mask,
                          num_classes=num_classes)
