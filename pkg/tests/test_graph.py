import numpy as np
import pytest
import scipy.sparse as sp

from lpssl.errors import ConfigError, FormatError, KTooLarge
from lpssl.graph import (
    FeatureMatrix,
    SparseAffinity,
    build_affinity,
    build_graph,
    knn_search,
    l2_normalize,
    load_features,
    load_graph,
    normalize_affinity,
    save_features,
    save_graph,
    spectral_radius,
)


def _random_features(n, h, seed=0):
    return FeatureMatrix(values=np.random.default_rng(seed).normal(size=(n, h)))


def test_l2_normalize_rows():
    """3-4-5 row and an untouched, flagged zero row."""
    out = l2_normalize(FeatureMatrix(values=np.array([[3.0, 4.0], [0.0, 0.0]])))
    assert np.allclose(out.values[0], [0.6, 0.8])
    assert np.array_equal(out.values[1], [0.0, 0.0])
    assert out.zero_rows.tolist() == [1]
    assert out.normalized


def test_l2_normalize_unit_norms():
    """Every nonzero row ends with norm 1."""
    out = l2_normalize(_random_features(5, 3))
    assert np.allclose(np.linalg.norm(out.values, axis=1), 1.0, atol=1e-6)


def test_l2_normalize_rejects_non_finite():
    """NaN features are not accepted."""
    with pytest.raises(ValueError):
        l2_normalize(FeatureMatrix(values=np.array([[np.nan, 1.0]])))


def test_knn_forced_geometry():
    """Duplicates pair up; the orthogonal point takes index 0 with similarity 0."""
    features = l2_normalize(FeatureMatrix(values=np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])))
    neighbors = knn_search(features, 1)
    assert neighbors.indices[:, 0].tolist() == [1, 0, 0]
    assert neighbors.similarities[:, 0].tolist() == [1.0, 1.0, 0.0]


def test_knn_matches_exhaustive_sort():
    """Neighbor sets equal a full sort over all pairwise similarities."""
    features = l2_normalize(_random_features(50, 8, seed=1))
    k = 5
    neighbors = knn_search(features, k, block_size=16)
    sims = features.values @ features.values.T
    for i in range(50):
        order = [j for j in np.lexsort((np.arange(50), -sims[i])) if j != i][:k]
        assert neighbors.indices[i].tolist() == order
        assert i not in neighbors.indices[i]


def test_knn_clamps_negative_similarity():
    """Anti-parallel neighbors get similarity 0."""
    features = l2_normalize(FeatureMatrix(values=np.array([[1.0, 0.0], [-1.0, 0.0], [-1.0, 0.1]])))
    neighbors = knn_search(features, 2)
    assert neighbors.similarities.min() >= 0.0
    assert neighbors.similarities[0].tolist() == [0.0, 0.0]


def test_knn_k_too_large():
    """k must be below n."""
    with pytest.raises(KTooLarge):
        knn_search(l2_normalize(_random_features(4, 2)), 4)


@pytest.mark.parametrize("k", [0, -3])
def test_knn_k_not_positive(k):
    """Non-positive k is a plain config error, not KTooLarge."""
    with pytest.raises(ConfigError, match="positive") as info:
        knn_search(l2_normalize(_random_features(4, 2)), k)
    assert not isinstance(info.value, KTooLarge)


def test_build_affinity_weights():
    """sim^gamma on each pair; 1 stays 1, 0.5 cubed is 0.125."""
    from lpssl.graph import NeighborLists

    neighbors = NeighborLists(indices=np.array([[1], [2], [0]]), similarities=np.array([[1.0], [0.5], [0.5]]))
    w = build_affinity(neighbors, gamma=3.0).matrix.toarray()
    assert w[0, 1] == 1.0
    assert w[1, 2] == 0.125
    assert w[2, 0] == 0.125


def test_build_affinity_symmetrizes_by_max():
    """A one-directional kNN pair is present both ways with equal weight."""
    from lpssl.graph import NeighborLists

    neighbors = NeighborLists(indices=np.array([[1], [2], [1]]), similarities=np.array([[0.9], [0.5], [0.7]]))
    w = build_affinity(neighbors, gamma=1.0).matrix
    dense = w.toarray()
    assert np.array_equal(dense, dense.T)
    assert dense[0, 1] == dense[1, 0] == 0.9
    assert dense[1, 2] == dense[2, 1] == 0.7
    assert (w.diagonal() == 0).all()


def test_build_affinity_drops_zero_weights():
    """Clamped-to-zero similarities are not stored."""
    features = l2_normalize(FeatureMatrix(values=np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])))
    graph = build_affinity(knn_search(features, 1), gamma=3.0)
    assert graph.nnz == 2
    assert (graph.weights > 0).all()


def test_normalize_two_nodes():
    """Single edge of weight 4 normalizes to 1."""
    w = SparseAffinity(matrix=sp.csr_matrix(np.array([[0.0, 4.0], [4.0, 0.0]])), k=1, gamma=1.0)
    s = normalize_affinity(w)
    assert s.matrix.toarray().tolist() == [[0.0, 1.0], [1.0, 0.0]]
    assert s.normalized


def test_normalize_reports_isolated_node():
    """An isolated node keeps an empty row and column."""
    dense = np.zeros((3, 3))
    dense[0, 1] = dense[1, 0] = 0.5
    s = normalize_affinity(SparseAffinity(matrix=sp.csr_matrix(dense), k=1, gamma=1.0))
    assert s.isolated.tolist() == [2]
    assert s.matrix[2].nnz == 0
    assert s.matrix[:, 2].nnz == 0


def test_normalized_graph_properties():
    """Symmetric, same sparsity pattern, spectral radius at most 1."""
    features = _random_features(10, 4, seed=3)
    w = build_affinity(knn_search(l2_normalize(features), 3), gamma=3.0)
    s = normalize_affinity(w)
    assert (s.matrix != s.matrix.T).nnz == 0
    assert np.array_equal(s.column_indices, w.column_indices)
    assert np.array_equal(s.row_offsets, w.row_offsets)
    assert spectral_radius(s) <= 1 + 1e-9


def test_build_graph_deterministic():
    """Same features, k and gamma give a bit-identical graph."""
    features = _random_features(40, 6, seed=4)
    a = build_graph(features, 4, 3.0).matrix
    b = build_graph(features, 4, 3.0).matrix
    assert np.array_equal(a.indptr, b.indptr)
    assert np.array_equal(a.indices, b.indices)
    assert a.data.tobytes() == b.data.tobytes()


def test_features_file_round_trip(tmp_path):
    """LPFM stores float32 rows."""
    features = _random_features(6, 3)
    loaded = load_features(save_features(tmp_path / "f.lpfm", features))
    assert loaded.values.shape == (6, 3)
    assert np.array_equal(loaded.values, features.values.astype(np.float32).astype(np.float64))


def test_graph_file_round_trip(tmp_path):
    """LPGR keeps structure and float32 weights."""
    graph = build_graph(_random_features(20, 4), 3, 3.0)
    loaded = load_graph(save_graph(tmp_path / "g.lpgr", graph))
    assert loaded.n == graph.n
    assert np.array_equal(loaded.column_indices, graph.column_indices)
    assert np.array_equal(loaded.weights, graph.weights.astype(np.float32).astype(np.float64))


def test_graph_file_bad_magic(tmp_path):
    """Wrong magic is a format error."""
    path = tmp_path / "bad.lpgr"
    path.write_bytes(b"NOPE" + b"\x00" * 32)
    with pytest.raises(FormatError):
        load_graph(path)
