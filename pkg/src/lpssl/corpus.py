"""Corpus ingestion: cleaning, tokenization, vocabulary and indexed splits."""

from collections import Counter
from dataclasses import dataclass, field
import logging
from pathlib import Path
import re
from typing import Iterable

import numpy as np
import pandas as pd

from .errors import (
    EmptyCorpus,
    EmptyFile,
    EmptySplit,
    FileUnreadable,
    FormatError,
    LabelOutOfRange,
)

logger = logging.getLogger(__name__)

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
PAD_ID = 0
UNK_ID = 1

PUNCTUATION = ".,!?;:'\"()-"
_PUNCT_CLASS = re.escape(PUNCTUATION)
_PUNCT_RE = re.compile(f"([{_PUNCT_CLASS}])")
# \w is letters, digits and underscore; underscore is not part of the token alphabet
_DISALLOWED_RE = re.compile(f"[^\\w\\s{_PUNCT_CLASS}]|_")

SPLIT_TRAIN = "train"
SPLIT_VALIDATION = "validation"
SPLIT_TEST = "test"


@dataclass(frozen=True)
class RawDocument:
    text: str
    gold_label: int | None = None


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    label_fraction: float = 0.10
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise ValueError(f"train_fraction must be in (0, 1), got {self.train_fraction}")
        if not 0 < self.label_fraction <= 1:
            raise ValueError(f"label_fraction must be in (0, 1], got {self.label_fraction}")


@dataclass
class Vocabulary:
    token_to_id: dict[str, int]
    id_to_token: list[str]
    max_size: int
    frequencies: list[int] = field(default_factory=list)

    pad_id: int = PAD_ID
    unk_id: int = UNK_ID

    def __len__(self) -> int:
        return len(self.id_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self.token_to_id.get(t, self.unk_id) for t in tokens]

    def dump(self, path: str | Path) -> Path:
        """Write ``token<TAB>id<TAB>frequency`` lines in id order."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for idx, token in enumerate(self.id_to_token):
                f.write(f"{token}\t{idx}\t{self.frequencies[idx]}\n")
        return path

    @classmethod
    def load(cls, path: str | Path, max_size: int | None = None) -> "Vocabulary":
        id_to_token: list[str] = []
        frequencies: list[int] = []
        with open(path, encoding="utf-8") as f:
            for line_no, line in enumerate(f):
                parts = line.rstrip("\n").split("\t")
                if len(parts) != 3 or int(parts[1]) != line_no:
                    raise FormatError(f"{path}:{line_no + 1}: expected token<TAB>{line_no}<TAB>frequency")
                id_to_token.append(parts[0])
                frequencies.append(int(parts[2]))
        if id_to_token[:2] != [PAD_TOKEN, UNK_TOKEN]:
            raise FormatError(f"{path}: first two entries must be {PAD_TOKEN} and {UNK_TOKEN}")
        return cls(
            token_to_id={t: i for i, t in enumerate(id_to_token)},
            id_to_token=id_to_token,
            max_size=max_size if max_size is not None else len(id_to_token) - 2,
            frequencies=frequencies,
        )


@dataclass
class IndexedDataset:
    sequences: np.ndarray  # (n, max_len) int64
    gold_labels: np.ndarray  # (n,) int64
    labeled_mask: np.ndarray  # (n,) bool
    num_classes: int
    split_tag: str = SPLIT_TRAIN

    def __len__(self) -> int:
        return int(self.sequences.shape[0])

    @property
    def max_len(self) -> int:
        return int(self.sequences.shape[1])

    @property
    def labeled_count(self) -> int:
        return int(self.labeled_mask.sum())

    def labeled_subset(self) -> "IndexedDataset":
        """The labeled rows L only."""
        mask = self.labeled_mask
        return IndexedDataset(
            sequences=self.sequences[mask],
            gold_labels=self.gold_labels[mask],
            labeled_mask=np.ones(int(mask.sum()), dtype=bool),
            num_classes=self.num_classes,
            split_tag=self.split_tag,
        )

    def fully_labeled(self) -> "IndexedDataset":
        """Same rows with every label revealed (T = L ∪ U)."""
        return IndexedDataset(
            sequences=self.sequences,
            gold_labels=self.gold_labels,
            labeled_mask=np.ones(len(self), dtype=bool),
            num_classes=self.num_classes,
            split_tag=self.split_tag,
        )

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as f:
            np.savez(
                f,
                sequences=self.sequences,
                gold_labels=self.gold_labels,
                labeled_mask=self.labeled_mask,
                num_classes=np.int64(self.num_classes),
                split_tag=np.array(self.split_tag),
            )
        return path

    @classmethod
    def load(cls, path: str | Path) -> "IndexedDataset":
        with np.load(path) as data:
            return cls(
                sequences=data["sequences"],
                gold_labels=data["gold_labels"],
                labeled_mask=data["labeled_mask"],
                num_classes=int(data["num_classes"]),
                split_tag=str(data["split_tag"]),
            )


def clean_text(raw: str | bytes) -> str:
    """Normalize review text.

    Lowercase, trim, pad each mark of ``PUNCTUATION`` with spaces, drop characters
    that are not letters, digits, whitespace or that punctuation, collapse whitespace.
    """
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8", errors="ignore")
    text = raw.lower().strip()
    text = _PUNCT_RE.sub(r" \1 ", text)
    text = _DISALLOWED_RE.sub("", text)
    return " ".join(text.split())


def tokenize(cleaned: str) -> list[str]:
    return cleaned.split()


def build_vocabulary(corpus: Iterable[list[str]], max_size: int) -> Vocabulary:
    """Top ``max_size`` tokens by frequency (ties lexicographic) after pad and unk."""
    if max_size < 1:
        raise ValueError(f"max_size must be >= 1, got {max_size}")
    counts: Counter[str] = Counter()
    for tokens in corpus:
        counts.update(tokens)
    # reserved symbols never compete for a slot
    counts.pop(PAD_TOKEN, None)
    counts.pop(UNK_TOKEN, None)
    if not counts:
        raise EmptyCorpus("Cannot build a vocabulary from a corpus without tokens")

    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))[:max_size]
    id_to_token = [PAD_TOKEN, UNK_TOKEN] + [token for token, _ in ranked]
    frequencies = [0, 0] + [count for _, count in ranked]
    logger.info(f"Built vocabulary: {len(id_to_token)} entries from {len(counts)} distinct tokens")
    return Vocabulary(
        token_to_id={t: i for i, t in enumerate(id_to_token)},
        id_to_token=id_to_token,
        max_size=max_size,
        frequencies=frequencies,
    )


def load_documents(path: str | Path, num_classes: int) -> list[RawDocument]:
    """Read a ``label,text`` CSV; rows whose text cleans to nothing are dropped."""
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype={"text": str}, keep_default_na=False, encoding="utf-8",
                            encoding_errors="ignore")
    except FileNotFoundError:
        raise FileUnreadable(f"Dataset file not found: {path}")
    except pd.errors.EmptyDataError:
        raise EmptyFile(f"Dataset file is empty: {path}")
    except (OSError, pd.errors.ParserError) as e:
        raise FileUnreadable(f"Could not read dataset {path}: {str(e)}")

    missing = {"label", "text"} - set(frame.columns)
    if missing:
        raise FormatError(f"{path}: missing column(s) {', '.join(sorted(missing))}")
    if frame.empty:
        raise EmptyFile(f"Dataset file has no rows: {path}")

    labels = pd.to_numeric(frame["label"], errors="coerce")
    if labels.isna().any() or (labels != labels.round()).any():
        bad = int(labels.isna().sum())
        raise LabelOutOfRange(f"{path}: {bad} label(s) are not integers")
    labels = labels.astype(np.int64)
    out_of_range = (labels < 0) | (labels >= num_classes)
    if out_of_range.any():
        first = int(labels[out_of_range].iloc[0])
        raise LabelOutOfRange(f"{path}: label {first} outside [0, {num_classes})")

    docs = []
    dropped = 0
    for label, text in zip(labels.tolist(), frame["text"].tolist()):
        if not clean_text(text):
            dropped += 1
            continue
        docs.append(RawDocument(text=text, gold_label=int(label)))
    if dropped:
        logger.warning(f"Dropped {dropped} row(s) with empty text from {path}")
    if not docs:
        raise EmptyFile(f"No usable rows in {path}")
    logger.info(f"Loaded {len(docs)} documents from {path}")
    return docs


def split_documents(docs: list[RawDocument], spec: SplitSpec) -> tuple[list[RawDocument], list[RawDocument]]:
    """Seeded shuffle followed by the train/validation cut."""
    n = len(docs)
    order = np.random.default_rng(spec.seed).permutation(n)
    n_train = int(np.floor(n * spec.train_fraction + 0.5))
    if n_train == 0 or n_train == n:
        raise EmptySplit(f"{n} documents with train_fraction {spec.train_fraction} leave an empty split")
    train = [docs[i] for i in order[:n_train]]
    validation = [docs[i] for i in order[n_train:]]
    return train, validation


def encode_documents(docs: list[RawDocument], vocab: Vocabulary, max_len: int) -> np.ndarray:
    """Truncate or right-pad token ids to ``max_len``."""
    if max_len < 1:
        raise ValueError(f"max_len must be >= 1, got {max_len}")
    sequences = np.full((len(docs), max_len), vocab.pad_id, dtype=np.int64)
    for row, doc in enumerate(docs):
        ids = vocab.encode(tokenize(clean_text(doc.text)))[:max_len]
        sequences[row, : len(ids)] = ids
    return sequences


def stratified_labeled_mask(labels: np.ndarray, num_classes: int, label_fraction: float,
                            rng: np.random.Generator) -> np.ndarray:
    """Mark ``label_fraction`` of each class as labeled (at least one per present class)."""
    mask = np.zeros(labels.shape[0], dtype=bool)
    for c in range(num_classes):
        members = np.flatnonzero(labels == c)
        if members.size == 0:
            continue
        take = max(1, int(np.floor(label_fraction * members.size + 0.5)))
        chosen = rng.permutation(members)[:take]
        mask[chosen] = True
    return mask


def _labels_of(docs: list[RawDocument], num_classes: int) -> np.ndarray:
    labels = np.empty(len(docs), dtype=np.int64)
    for i, doc in enumerate(docs):
        if doc.gold_label is None:
            raise LabelOutOfRange(f"Document {i} has no gold label")
        if not 0 <= doc.gold_label < num_classes:
            raise LabelOutOfRange(f"Document {i}: label {doc.gold_label} outside [0, {num_classes})")
        labels[i] = doc.gold_label
    return labels


def index_dataset(docs: list[RawDocument], vocab: Vocabulary, max_len: int, spec: SplitSpec,
                  num_classes: int = 2) -> tuple[IndexedDataset, IndexedDataset]:
    """Split, index and mark the labeled subset of the train split."""
    _labels_of(docs, num_classes)
    train_docs, val_docs = split_documents(docs, spec)

    train_labels = _labels_of(train_docs, num_classes)
    # separate stream from the shuffle so the split never depends on label_fraction
    rng = np.random.default_rng([spec.seed, 1])
    labeled = stratified_labeled_mask(train_labels, num_classes, spec.label_fraction, rng)

    train = IndexedDataset(
        sequences=encode_documents(train_docs, vocab, max_len),
        gold_labels=train_labels,
        labeled_mask=labeled,
        num_classes=num_classes,
        split_tag=SPLIT_TRAIN,
    )
    validation = IndexedDataset(
        sequences=encode_documents(val_docs, vocab, max_len),
        gold_labels=_labels_of(val_docs, num_classes),
        labeled_mask=np.ones(len(val_docs), dtype=bool),
        num_classes=num_classes,
        split_tag=SPLIT_VALIDATION,
    )
    logger.info(
        f"Indexed {len(train)} train ({train.labeled_count} labeled) / {len(validation)} validation documents"
    )
    return train, validation


def index_test_documents(docs: list[RawDocument], vocab: Vocabulary, max_len: int,
                         num_classes: int = 2) -> IndexedDataset:
    return IndexedDataset(
        sequences=encode_documents(docs, vocab, max_len),
        gold_labels=_labels_of(docs, num_classes),
        labeled_mask=np.ones(len(docs), dtype=bool),
        num_classes=num_classes,
        split_tag=SPLIT_TEST,
    )


def corpus_tokens(docs: Iterable[RawDocument]) -> list[list[str]]:
    return [tokenize(clean_text(doc.text)) for doc in docs]


__all__ = [
    "PAD_ID",
    "UNK_ID",
    "PAD_TOKEN",
    "UNK_TOKEN",
    "PUNCTUATION",
    "RawDocument",
    "SplitSpec",
    "Vocabulary",
    "IndexedDataset",
    "clean_text",
    "tokenize",
    "build_vocabulary",
    "load_documents",
    "split_documents",
    "encode_documents",
    "stratified_labeled_mask",
    "index_dataset",
    "index_test_documents",
    "corpus_tokens",
]
