"""Synthetic review-like corpus: class-specific word mixtures over a shared background."""

import logging
from pathlib import Path

import numpy as np
import pandas as pd

from .corpus import RawDocument

logger = logging.getLogger(__name__)


def _words(prefix: str, count: int) -> list[str]:
    return [f"{prefix}{i:03d}" for i in range(count)]


def make_synthetic_corpus(n_docs: int = 2000, seed: int = 0, num_classes: int = 2,
                          class_vocab_size: int = 600, background_vocab_size: int = 400,
                          min_len: int = 40, max_len: int = 80, class_rate: float = 0.15,
                          cross_rate: float = 0.03) -> list[RawDocument]:
    """Balanced labeled documents.

    Each token is drawn from the document's own class vocabulary with probability
    ``class_rate``, from another class's vocabulary with ``cross_rate`` and from the
    background vocabulary otherwise. Background words follow a Zipf-like profile.
    Class vocabularies are large next to the per-document class signal, so a small
    labeled subset leaves part of each class vocabulary unseen.
    """
    if n_docs < num_classes:
        raise ValueError(f"n_docs must be >= num_classes, got {n_docs}")
    if not 0 <= cross_rate <= class_rate <= 1 - cross_rate:
        raise ValueError("Need 0 <= cross_rate <= class_rate <= 1 - cross_rate")

    rng = np.random.default_rng(seed)
    class_words = [_words(f"c{c}w", class_vocab_size) for c in range(num_classes)]
    background = _words("bg", background_vocab_size)
    zipf = 1.0 / np.arange(1, background_vocab_size + 1)
    zipf /= zipf.sum()

    labels = rng.permutation(np.arange(n_docs) % num_classes)
    docs = []
    for label in labels.tolist():
        length = int(rng.integers(min_len, max_len + 1))
        source = rng.random(length)
        word = rng.integers(class_vocab_size, size=length)
        shift = 1 + rng.integers(max(num_classes - 1, 1), size=length)
        filler = rng.choice(background_vocab_size, size=length, p=zipf)
        tokens = []
        for u, w, s, b in zip(source, word, shift, filler):
            if u < class_rate:
                tokens.append(class_words[label][w])
            elif u < class_rate + cross_rate and num_classes > 1:
                tokens.append(class_words[(label + s) % num_classes][w])
            else:
                tokens.append(background[b])
        text = " ".join(tokens).capitalize() + "."
        docs.append(RawDocument(text=text, gold_label=int(label)))
    return docs


def write_synthetic_csv(path: str | Path, **kwargs) -> Path:
    """Write :func:`make_synthetic_corpus` output as a ``label,text`` CSV."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    docs = make_synthetic_corpus(**kwargs)
    pd.DataFrame({"label": [d.gold_label for d in docs], "text": [d.text for d in docs]}).to_csv(
        path, index=False
    )
    logger.info(f"💾  Wrote {len(docs)} synthetic documents to {path}")
    return path


__all__ = ["make_synthetic_corpus", "write_synthetic_csv"]
