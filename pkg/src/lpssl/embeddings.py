"""Pretrained word vectors aligned to a vocabulary."""

from dataclasses import dataclass
import gzip
import logging
from pathlib import Path
from typing import Any

import numpy as np

from .corpus import Vocabulary
from .errors import DimensionMismatch, EmptyFile, FileUnreadable
from .utils import fnv1a_64

logger = logging.getLogger(__name__)

DEFAULT_ROW_BOUND = 0.05


@dataclass
class EmbeddingTable:
    matrix: np.ndarray  # (|V|, d) float32
    dim: int
    matched_count: int
    duplicate_count: int = 0

    @property
    def vocab_size(self) -> int:
        return int(self.matrix.shape[0])

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as f:
            np.savez(f, matrix=self.matrix, matched_count=np.int64(self.matched_count),
                     duplicate_count=np.int64(self.duplicate_count))
        return path

    @classmethod
    def load(cls, path: str | Path) -> "EmbeddingTable":
        with np.load(path) as data:
            matrix = data["matrix"]
            return cls(matrix=matrix, dim=int(matrix.shape[1]),
                       matched_count=int(data["matched_count"]),
                       duplicate_count=int(data["duplicate_count"]))


def default_row(token: str, dim: int) -> np.ndarray:
    """Reproducible small-norm vector for a token absent from the pretrained file."""
    rng = np.random.default_rng(fnv1a_64(token))
    return rng.uniform(-DEFAULT_ROW_BOUND, DEFAULT_ROW_BOUND, dim).astype(np.float32)


def default_embedding_table(vocab: Vocabulary, dim: int) -> EmbeddingTable:
    """Table with default rows everywhere (no pretrained vectors)."""
    matrix = np.empty((len(vocab), dim), dtype=np.float32)
    for idx, token in enumerate(vocab.id_to_token):
        matrix[idx] = default_row(token, dim)
    matrix[vocab.pad_id] = 0.0
    return EmbeddingTable(matrix=matrix, dim=dim, matched_count=0)


def _open_text(path: Path):
    if path.name.endswith(".gz"):
        return gzip.open(path, "rt", encoding="utf-8", errors="replace")
    return open(path, "r", encoding="utf-8", errors="replace")


def _is_header(parts: list[str]) -> bool:
    return len(parts) == 2 and all(p.isdigit() for p in parts)


def load_word_vectors(path: str | Path, vocab: Vocabulary) -> EmbeddingTable:
    """Assemble the embedding matrix for ``vocab`` from a ``token v1 ... vd`` text file.

    A leading ``count dim`` header line is skipped. Tokens found in the file take
    their pretrained row (last occurrence wins), pad is zero and every other row
    gets :func:`default_row`.
    """
    path = Path(path)
    if not path.is_file():
        raise FileUnreadable(f"Word vector file not found: {path}")

    found: dict[int, np.ndarray] = {}
    dim: int | None = None
    duplicates = 0
    lines_read = 0
    try:
        with _open_text(path) as f:
            for line_no, line in enumerate(f, start=1):
                parts = line.split()
                if not parts:
                    continue
                if line_no == 1 and _is_header(parts):
                    continue
                lines_read += 1
                if dim is None:
                    dim = len(parts) - 1
                    if dim < 1:
                        raise DimensionMismatch(f"{path}:{line_no}: line has no vector values")
                elif len(parts) - 1 != dim:
                    raise DimensionMismatch(
                        f"{path}:{line_no}: expected {dim} values, found {len(parts) - 1}"
                    )
                idx = vocab.token_to_id.get(parts[0])
                if idx is None or idx == vocab.pad_id:
                    continue
                if idx in found:
                    duplicates += 1
                try:
                    found[idx] = np.asarray(parts[1:], dtype=np.float32)
                except ValueError:
                    raise FileUnreadable(f"{path}:{line_no}: non-numeric vector values")
    except (OSError, EOFError, UnicodeError) as e:
        raise FileUnreadable(f"Could not read word vectors {path}: {str(e)}")

    if dim is None:
        raise EmptyFile(f"Word vector file has no vectors: {path}")
    if duplicates:
        logger.warning(f"{duplicates} duplicate token(s) in {path}; last occurrence kept")

    matrix = default_embedding_table(vocab, dim).matrix
    for idx, vector in found.items():
        if not np.all(np.isfinite(vector)):
            logger.warning(f"Non-finite vector for '{vocab.id_to_token[idx]}' ignored")
            continue
        matrix[idx] = vector
    matched = sum(1 for v in found.values() if np.all(np.isfinite(v)))

    table = EmbeddingTable(matrix=matrix, dim=dim, matched_count=matched, duplicate_count=duplicates)
    stats = embedding_stats(table)
    logger.info(
        f"Loaded {lines_read} vectors (d={dim}) from {path}: "
        f"{matched}/{len(vocab)} tokens matched, coverage {stats['coverage']:.4f}"
    )
    return table


def embedding_stats(table: EmbeddingTable) -> dict[str, Any]:
    size = table.vocab_size
    coverage = round(table.matched_count / size, 4) if size else 0.0
    return {
        "dim": table.dim,
        "matched_count": table.matched_count,
        "vocab_size": size,
        "coverage": coverage,
    }


__all__ = [
    "EmbeddingTable",
    "default_row",
    "default_embedding_table",
    "load_word_vectors",
    "embedding_stats",
]
