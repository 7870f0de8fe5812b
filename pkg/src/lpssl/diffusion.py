"""Label diffusion over the normalized affinity graph and pseudo-label extraction."""

from dataclasses import dataclass, field
import json
import logging
from pathlib import Path

from joblib import Parallel, delayed
import numpy as np
import pandas as pd
import scipy.sparse as sp
from scipy.sparse.linalg import cg
from scipy.stats import entropy

from .corpus import IndexedDataset
from .errors import AlphaOutOfRange, NoLabeledPoints, NotConverged
from .graph import SparseAffinity
from .schemas import PSEUDO_LABEL_SIDECAR_SCHEMA, validate_json_schema

logger = logging.getLogger(__name__)

FALLBACK_MASS = 1e-12
# CG restarts from its own iterate when the true residual misses the target
MAX_RESTARTS = 5


@dataclass
class SeedMatrix:
    values: np.ndarray  # (n, C)

    @property
    def num_classes(self) -> int:
        return int(self.values.shape[1])


@dataclass
class LabelDistribution:
    values: np.ndarray  # (n, C) row-stochastic after post-processing
    raw: np.ndarray  # (n, C) solution of (I - alpha S) Z = Y
    residual_norm: float
    iterations: int
    converged: bool = True
    fallback_mask: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    @property
    def fallback_count(self) -> int:
        return int(self.fallback_mask.sum())


@dataclass
class PseudoLabelSet:
    labels: np.ndarray  # (n,) int64
    certainty: np.ndarray  # (n,) float64 in [0, 1]
    class_weights: np.ndarray  # (C,) float64
    source_mask: np.ndarray  # (n,) bool, True for seed (gold) points

    @property
    def num_classes(self) -> int:
        return int(self.class_weights.shape[0])

    def __len__(self) -> int:
        return int(self.labels.shape[0])


def seed_matrix(dataset: IndexedDataset) -> SeedMatrix:
    """One-hot rows for labeled points, zero rows elsewhere."""
    mask = dataset.labeled_mask
    if not mask.any():
        raise NoLabeledPoints("Label diffusion needs at least one labeled point")
    y = np.zeros((len(dataset), dataset.num_classes), dtype=np.float64)
    labeled = np.flatnonzero(mask)
    y[labeled, dataset.gold_labels[labeled]] = 1.0

    missing = np.flatnonzero(y.sum(axis=0) == 0)
    if missing.size:
        logger.warning(f"No labeled examples for class(es) {missing.tolist()}")
    return SeedMatrix(values=y)


def diffusion_operator(s: SparseAffinity, alpha: float) -> sp.csr_matrix:
    """I - alpha * S."""
    return (sp.identity(s.n, format="csr") - alpha * s.matrix).tocsr()


def _solve_column(a: sp.csr_matrix, b: np.ndarray, tol: float, max_iter: int) -> tuple[np.ndarray, int, bool]:
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return np.zeros_like(b), 0, True

    target = tol * b_norm
    x = np.zeros_like(b)
    iterations = 0
    for _ in range(MAX_RESTARTS + 1):
        remaining = max_iter - iterations
        if remaining <= 0:
            break
        counter = [0]

        def count(_xk):
            counter[0] += 1

        x, _info = cg(a, b, x0=x, rtol=tol, atol=0.0, maxiter=remaining, callback=count)
        iterations += counter[0]
        if np.linalg.norm(a @ x - b) <= target:
            return x, iterations, True
    return x, iterations, False


def diffuse(s: SparseAffinity, y: SeedMatrix, alpha: float = 0.99, tol: float = 1e-6,
            max_iter: int = 1000, n_jobs: int = 1) -> LabelDistribution:
    """Solve (I - alpha S) Z = Y one class column at a time by conjugate gradient.

    The solution is clamped at zero and row-normalized; rows with no mass fall back
    to the uniform distribution. Raises NotConverged (with the partial result) when
    any column misses ``tol`` within ``max_iter`` iterations.
    """
    if not 0 < alpha < 1:
        raise AlphaOutOfRange(f"alpha must be in (0, 1), got {alpha}")
    if tol <= 0:
        raise ValueError(f"tol must be > 0, got {tol}")
    if y.values.shape[0] != s.n:
        raise ValueError(f"Seed matrix has {y.values.shape[0]} rows, graph has {s.n} nodes")

    a = diffusion_operator(s, alpha)
    columns = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_solve_column)(a, y.values[:, c], tol, max_iter) for c in range(y.num_classes)
    )
    raw = np.column_stack([col for col, _, _ in columns])
    iterations = max(it for _, it, _ in columns)
    converged = all(ok for _, _, ok in columns)
    residual = float(max(np.linalg.norm(a @ raw[:, c] - y.values[:, c]) for c in range(y.num_classes)))

    values, fallback = _row_normalize(raw)
    z = LabelDistribution(values=values, raw=raw, residual_norm=residual, iterations=iterations,
                          converged=converged, fallback_mask=fallback)
    if fallback.any():
        logger.warning(f"{int(fallback.sum())} node(s) unreachable from any seed; uniform fallback")
    if not converged:
        raise NotConverged(
            f"Diffusion did not reach tol={tol} within {max_iter} iterations (residual {residual:.3e})",
            partial=z,
            residual=residual,
        )
    logger.info(f"Diffusion converged: {iterations} iterations, residual {residual:.3e}")
    return z


def _row_normalize(raw: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    clamped = np.clip(raw, 0.0, None)
    mass = clamped.sum(axis=1)
    fallback = mass < FALLBACK_MASS
    out = np.empty_like(clamped)
    out[~fallback] = clamped[~fallback] / mass[~fallback, None]
    out[fallback] = 1.0 / raw.shape[1]
    return out, fallback


def certainty_weights(probabilities: np.ndarray) -> np.ndarray:
    """1 - H(p)/ln C per row, natural log, 0 log 0 = 0."""
    c = probabilities.shape[1]
    if c < 2:
        return np.ones(probabilities.shape[0])
    omega = 1.0 - entropy(probabilities, axis=1) / np.log(c)
    omega = np.clip(omega, 0.0, 1.0)
    # round-off around the uniform row
    omega[omega < 1e-12] = 0.0
    return omega


def extract_pseudo_labels(z: LabelDistribution, dataset: IndexedDataset) -> PseudoLabelSet:
    """Argmax labels with entropy certainty; labeled points keep gold labels and weight 1."""
    if z.values.shape[0] != len(dataset):
        raise ValueError(f"Distribution has {z.values.shape[0]} rows, dataset has {len(dataset)}")
    labels = np.argmax(z.values, axis=1).astype(np.int64)
    certainty = certainty_weights(z.values)
    if z.fallback_mask.size:
        certainty[z.fallback_mask] = 0.0

    seeds = dataset.labeled_mask.copy()
    labels[seeds] = dataset.gold_labels[seeds]
    certainty[seeds] = 1.0

    pseudo = PseudoLabelSet(labels=labels, certainty=certainty,
                            class_weights=np.zeros(dataset.num_classes), source_mask=seeds)
    pseudo.class_weights = class_weights(pseudo, dataset.num_classes)
    return pseudo


def class_weights(p: PseudoLabelSet, c: int) -> np.ndarray:
    """zeta_j = N / (C * n_j); classes without members get 0."""
    counts = np.bincount(p.labels, minlength=c).astype(np.float64)[:c]
    total = counts.sum()
    weights = np.zeros(c, dtype=np.float64)
    present = counts > 0
    weights[present] = total / (c * counts[present])
    if not present.all():
        logger.warning(f"No (pseudo-)labeled points for class(es) {np.flatnonzero(~present).tolist()}")
    return weights


def pseudo_label_accuracy(pseudo: PseudoLabelSet, gold: np.ndarray) -> float:
    """Accuracy of the inferred labels on the non-seed points."""
    unlabeled = ~pseudo.source_mask
    if not unlabeled.any():
        return 1.0
    return float(np.mean(pseudo.labels[unlabeled] == gold[unlabeled]))


def export_pseudo_labels(pseudo: PseudoLabelSet, z: LabelDistribution, out_dir: str | Path) -> tuple[Path, Path]:
    """Write ``pseudo_labels.csv`` and its ``pseudo_labels.json`` sidecar."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "pseudo_labels.csv"
    json_path = out_dir / "pseudo_labels.json"

    pd.DataFrame({
        "index": np.arange(len(pseudo)),
        "pseudo_label": pseudo.labels,
        "certainty": pseudo.certainty,
        "is_seed": pseudo.source_mask.astype(int),
    }).to_csv(csv_path, index=False, float_format="%.10g")

    sidecar = {
        "class_weights": [float(w) for w in pseudo.class_weights],
        "residual": float(z.residual_norm),
        "iterations": int(z.iterations),
        "converged": bool(z.converged),
        "fallback_count": z.fallback_count,
    }
    validate_json_schema(sidecar, PSEUDO_LABEL_SIDECAR_SCHEMA, name="PseudoLabelSidecar")
    json_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.info(f"💾  Saved pseudo-labels to {csv_path}")
    return csv_path, json_path


__all__ = [
    "SeedMatrix",
    "LabelDistribution",
    "PseudoLabelSet",
    "seed_matrix",
    "diffusion_operator",
    "diffuse",
    "certainty_weights",
    "extract_pseudo_labels",
    "class_weights",
    "pseudo_label_accuracy",
    "export_pseudo_labels",
]
