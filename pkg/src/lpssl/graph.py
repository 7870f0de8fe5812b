"""Cosine kNN affinity graph over document features."""

from dataclasses import dataclass, field
import logging
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, FormatError, KTooLarge
from .utils import read_header, write_header

logger = logging.getLogger(__name__)

FEATURES_MAGIC = b"LPFM"
GRAPH_MAGIC = b"LPGR"


@dataclass
class FeatureMatrix:
    values: np.ndarray  # (n, h)
    normalized: bool = False
    zero_rows: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def rows(self) -> int:
        return int(self.values.shape[0])

    @property
    def dim(self) -> int:
        return int(self.values.shape[1])


@dataclass
class NeighborLists:
    """Result of :func:`knn_search`: row i's neighbors, most similar first."""

    indices: np.ndarray  # (n, k) int64
    similarities: np.ndarray  # (n, k) float64, clamped to [0, 1]

    @property
    def k(self) -> int:
        return int(self.indices.shape[1])

    @property
    def n(self) -> int:
        return int(self.indices.shape[0])


@dataclass
class SparseAffinity:
    matrix: sp.csr_matrix
    k: int
    gamma: float
    normalized: bool = False
    isolated: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def n(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def nnz(self) -> int:
        return int(self.matrix.nnz)

    @property
    def row_offsets(self) -> np.ndarray:
        return self.matrix.indptr

    @property
    def column_indices(self) -> np.ndarray:
        return self.matrix.indices

    @property
    def weights(self) -> np.ndarray:
        return self.matrix.data


def l2_normalize(features: FeatureMatrix) -> FeatureMatrix:
    values = np.asarray(features.values, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise ValueError("Feature matrix contains non-finite values")
    norms = np.linalg.norm(values, axis=1)
    zero = norms == 0
    scale = np.where(zero, 1.0, norms)
    out = values / scale[:, None]
    zero_rows = np.flatnonzero(zero)
    if zero_rows.size:
        logger.warning(f"{zero_rows.size} all-zero feature row(s) left unnormalized")
    return FeatureMatrix(values=out, normalized=True, zero_rows=zero_rows)


def knn_search(features: FeatureMatrix, k: int, block_size: int = 1024) -> NeighborLists:
    """Exact cosine kNN by blocked brute force.

    Rows must be normalized. Ties are resolved toward the smaller index and the
    returned similarities are clamped to [0, 1].
    """
    n = features.rows
    if k < 1:
        raise ConfigError(f"k must be a positive neighbor count, got {k}")
    if k >= n:
        raise KTooLarge(f"k={k} must be smaller than the number of points n={n}")
    if not features.normalized:
        features = l2_normalize(features)

    x = features.values
    indices = np.empty((n, k), dtype=np.int64)
    similarities = np.empty((n, k), dtype=np.float64)

    for start in range(0, n, block_size):
        stop = min(start + block_size, n)
        sims = x[start:stop] @ x.T
        rows = np.arange(stop - start)
        sims[rows, rows + start] = -np.inf
        # k-th largest value per row; everything at or above it is a candidate
        kth = -np.partition(-sims, k - 1, axis=1)[:, k - 1]
        for r in rows:
            candidates = np.flatnonzero(sims[r] >= kth[r])
            # stable sort on -sim keeps ascending index order among equal similarities
            order = np.argsort(-sims[r, candidates], kind="stable")[:k]
            chosen = candidates[order]
            indices[start + r] = chosen
            similarities[start + r] = sims[r, chosen]

    np.clip(similarities, 0.0, 1.0, out=similarities)
    return NeighborLists(indices=indices, similarities=similarities)


def build_affinity(neighbors: NeighborLists, gamma: float) -> SparseAffinity:
    """w_ij = sim^gamma on kNN pairs, symmetrized by elementwise max, zeros dropped."""
    if gamma <= 0:
        raise ValueError(f"gamma must be > 0, got {gamma}")
    n, k = neighbors.n, neighbors.k
    rows = np.repeat(np.arange(n), k)
    cols = neighbors.indices.ravel()
    weights = neighbors.similarities.ravel() ** gamma

    directed = sp.csr_matrix((weights, (rows, cols)), shape=(n, n))
    w = directed.maximum(directed.T).tocsr()
    w.eliminate_zeros()
    w.sort_indices()
    logger.debug(f"Affinity graph: n={n}, k={k}, gamma={gamma}, nnz={w.nnz}")
    return SparseAffinity(matrix=w, k=k, gamma=gamma)


def normalize_affinity(w: SparseAffinity) -> SparseAffinity:
    """S = D^-1/2 W D^-1/2; same sparsity pattern, isolated nodes reported."""
    m = w.matrix.tocsr()
    degree = np.asarray(m.sum(axis=1)).ravel()
    isolated = np.flatnonzero(degree == 0)
    d_inv_sqrt = np.zeros_like(degree)
    d_inv_sqrt[degree > 0] = 1.0 / np.sqrt(degree[degree > 0])

    row_of_entry = np.repeat(np.arange(m.shape[0]), np.diff(m.indptr))
    # d_i * d_j first: commutative, so S_ij and S_ji stay bit-identical
    data = m.data * (d_inv_sqrt[row_of_entry] * d_inv_sqrt[m.indices])
    s = sp.csr_matrix((data, m.indices.copy(), m.indptr.copy()), shape=m.shape)

    if isolated.size:
        logger.warning(f"{isolated.size} isolated node(s) in the affinity graph")
    return SparseAffinity(matrix=s, k=w.k, gamma=w.gamma, normalized=True, isolated=isolated)


def build_graph(features: FeatureMatrix, k: int, gamma: float) -> SparseAffinity:
    """Normalize, search, weight and normalize in one call."""
    normalized = l2_normalize(features)
    neighbors = knn_search(normalized, k)
    return normalize_affinity(build_affinity(neighbors, gamma))


def spectral_radius(s: SparseAffinity) -> float:
    """Largest |eigenvalue| by dense eigensolve; for small graphs only."""
    dense = s.matrix.toarray()
    return float(np.max(np.abs(np.linalg.eigvalsh(dense)))) if dense.size else 0.0


def save_features(path: str | Path, features: FeatureMatrix) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        write_header(f, FEATURES_MAGIC, "II", features.rows, features.dim)
        f.write(np.ascontiguousarray(features.values, dtype="<f4").tobytes())
    return path


def load_features(path: str | Path) -> FeatureMatrix:
    with open(path, "rb") as f:
        n, h = read_header(f, FEATURES_MAGIC, "II")
        raw = f.read()
    if len(raw) != n * h * 4:
        raise FormatError(f"{path}: expected {n}x{h} floats, found {len(raw) // 4}")
    values = np.frombuffer(raw, dtype="<f4").reshape(n, h).astype(np.float64)
    return FeatureMatrix(values=values)


def save_graph(path: str | Path, graph: SparseAffinity) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    m = graph.matrix
    with open(path, "wb") as f:
        write_header(f, GRAPH_MAGIC, "IQ", graph.n, graph.nnz)
        f.write(m.indptr.astype("<u8").tobytes())
        f.write(m.indices.astype("<u4").tobytes())
        f.write(m.data.astype("<f4").tobytes())
    return path


def load_graph(path: str | Path, k: int = 0, gamma: float = 0.0, normalized: bool = True) -> SparseAffinity:
    with open(path, "rb") as f:
        n, nnz = read_header(f, GRAPH_MAGIC, "IQ")
        indptr = np.frombuffer(f.read(8 * (n + 1)), dtype="<u8")
        indices = np.frombuffer(f.read(4 * nnz), dtype="<u4")
        data = np.frombuffer(f.read(4 * nnz), dtype="<f4")
    if indptr.size != n + 1 or indices.size != nnz or data.size != nnz:
        raise FormatError(f"{path}: truncated graph body")
    matrix = sp.csr_matrix(
        (data.astype(np.float64), indices.astype(np.int64), indptr.astype(np.int64)), shape=(n, n)
    )
    degree = np.diff(matrix.indptr)
    return SparseAffinity(matrix=matrix, k=k, gamma=gamma, normalized=normalized,
                          isolated=np.flatnonzero(degree == 0))


__all__ = [
    "FeatureMatrix",
    "NeighborLists",
    "SparseAffinity",
    "l2_normalize",
    "knn_search",
    "build_affinity",
    "normalize_affinity",
    "build_graph",
    "spectral_radius",
    "save_features",
    "load_features",
    "save_graph",
    "load_graph",
]
