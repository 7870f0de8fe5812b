import numpy as np
import pytest

from lpssl.corpus import (
    PAD_ID,
    UNK_ID,
    IndexedDataset,
    RawDocument,
    SplitSpec,
    Vocabulary,
    build_vocabulary,
    clean_text,
    corpus_tokens,
    index_dataset,
    load_documents,
    split_documents,
    stratified_labeled_mask,
    tokenize,
)
from lpssl.errors import EmptyCorpus, EmptyFile, EmptySplit, FileUnreadable, LabelOutOfRange


def _docs(n, num_classes=2):
    return [RawDocument(text=f"word{i % 5} shared token{i}", gold_label=i % num_classes) for i in range(n)]


def test_clean_text_spacing():
    """Punctuation is padded with single spaces and text lowercased."""
    assert clean_text("Hello, World!") == "hello , world !"


def test_clean_text_trim_and_collapse():
    """Leading/trailing whitespace is removed and runs collapse."""
    assert clean_text("  A  ") == "a"


def test_clean_text_filters_symbols():
    """Letters (accented too) and digits stay; other symbols go."""
    assert clean_text("café №5 — ok") == "café 5 ok"
    assert clean_text("10/10 would_watch") == "1010 wouldwatch"


def test_clean_text_bytes():
    """Undecodable bytes are dropped."""
    assert clean_text(b"good\xff movie") == "good movie"


@pytest.mark.parametrize("raw", ["Hello, World!", "it's (really) -- GOOD...", "  x\t\ny  ", "\"quoted\"; ok:"])
def test_clean_text_idempotent(raw):
    """Cleaning twice equals cleaning once."""
    once = clean_text(raw)
    assert clean_text(once) == once


def test_tokenize():
    """Whitespace fields, duplicates kept."""
    assert tokenize("hello , world !") == ["hello", ",", "world", "!"]
    assert tokenize("") == []
    assert tokenize("a a a") == ["a", "a", "a"]


def test_build_vocabulary_tie_break():
    """Equal frequencies are ordered lexicographically."""
    vocab = build_vocabulary([["b", "a", "c"], ["b", "a"], ["a", "b"]], max_size=2)
    assert vocab.token_to_id == {"<pad>": 0, "<unk>": 1, "a": 2, "b": 3}


def test_build_vocabulary_cap_not_reached():
    """A smaller corpus yields fewer than max_size + 2 entries."""
    vocab = build_vocabulary([["x"] * 5], max_size=3)
    assert len(vocab) == 3
    assert vocab.id_to_token == ["<pad>", "<unk>", "x"]


def test_build_vocabulary_empty():
    """No tokens at all is an error."""
    with pytest.raises(EmptyCorpus):
        build_vocabulary([[], []], max_size=10)


def test_vocabulary_dump_and_load(tmp_path):
    """The TSV dump reads back to the same vocabulary."""
    vocab = build_vocabulary([["b", "a", "a"]], max_size=10)
    path = vocab.dump(tmp_path / "vocab.tsv")
    assert path.read_text(encoding="utf-8").splitlines()[:3] == ["<pad>\t0\t0", "<unk>\t1\t0", "a\t2\t2"]
    loaded = Vocabulary.load(path)
    assert loaded.id_to_token == vocab.id_to_token
    assert loaded.frequencies == vocab.frequencies


def test_index_dataset_split_sizes():
    """10 documents split 8 / 2."""
    docs = _docs(10)
    vocab = build_vocabulary(corpus_tokens(docs), 100)
    train, validation = index_dataset(docs, vocab, 6, SplitSpec(0.8, 0.5, seed=1))
    assert len(train) == 8
    assert len(validation) == 2
    assert validation.labeled_mask.all()
    assert 1 <= train.labeled_count < 8


def test_index_dataset_padding_and_unk():
    """Short sequences are right-padded, unknown tokens map to unk."""
    docs = [RawDocument("a b c", 0), RawDocument("a b zzz", 1)] * 5
    vocab = build_vocabulary([["a", "b", "c"]], 10)
    train, _ = index_dataset(docs, vocab, 5, SplitSpec(0.8, 1.0, seed=0))
    a, b, c = (vocab.token_to_id[t] for t in "abc")
    rows = {tuple(r) for r in train.sequences.tolist()}
    assert rows <= {(a, b, c, PAD_ID, PAD_ID), (a, b, UNK_ID, PAD_ID, PAD_ID)}


def test_index_dataset_truncates():
    """Sequences longer than max_len are cut."""
    docs = [RawDocument("a b c d e", i % 2) for i in range(10)]
    vocab = build_vocabulary(corpus_tokens(docs), 10)
    train, _ = index_dataset(docs, vocab, 2, SplitSpec(0.8, 0.5))
    assert train.sequences.shape == (8, 2)
    assert (train.sequences == [vocab.token_to_id["a"], vocab.token_to_id["b"]]).all()


def test_index_dataset_label_out_of_range():
    """Labels at or above C are rejected."""
    docs = _docs(10, num_classes=3)
    vocab = build_vocabulary(corpus_tokens(docs), 100)
    with pytest.raises(LabelOutOfRange):
        index_dataset(docs, vocab, 4, SplitSpec(), num_classes=2)


def test_index_dataset_empty_split():
    """A single document cannot be split."""
    docs = _docs(1)
    vocab = build_vocabulary(corpus_tokens(docs), 10)
    with pytest.raises(EmptySplit):
        index_dataset(docs, vocab, 4, SplitSpec())


def test_index_dataset_deterministic():
    """Same documents and seed give identical arrays."""
    docs = _docs(50)
    vocab = build_vocabulary(corpus_tokens(docs), 100)
    first = index_dataset(docs, vocab, 8, SplitSpec(seed=3))
    second = index_dataset(docs, vocab, 8, SplitSpec(seed=3))
    for a, b in zip(first, second):
        assert np.array_equal(a.sequences, b.sequences)
        assert np.array_equal(a.gold_labels, b.gold_labels)
        assert np.array_equal(a.labeled_mask, b.labeled_mask)


def test_stratified_mask_balanced():
    """10% of 25,000 balanced documents is 1,250 per class."""
    labels = np.repeat([0, 1], 12500)
    mask = stratified_labeled_mask(labels, 2, 0.10, np.random.default_rng(0))
    assert mask.sum() == 2500
    assert mask[labels == 0].sum() == 1250
    assert mask[labels == 1].sum() == 1250


def test_stratified_mask_keeps_one_per_class():
    """Tiny classes still get one labeled member."""
    labels = np.array([0] * 30 + [1] * 3)
    mask = stratified_labeled_mask(labels, 2, 0.05, np.random.default_rng(0))
    assert mask[labels == 1].sum() == 1
    assert mask[labels == 0].sum() == 2


def test_vocabulary_from_train_only():
    """Validation-only tokens are unknown to a train-split vocabulary."""
    docs = [RawDocument(f"common only{i}", i % 2) for i in range(20)]
    spec = SplitSpec(seed=5)
    train_docs, val_docs = split_documents(docs, spec)
    vocab = build_vocabulary(corpus_tokens(train_docs), 1000)
    for doc in val_docs:
        token = tokenize(clean_text(doc.text))[1]
        assert vocab.encode([token]) == [UNK_ID]


def test_load_documents(tmp_path):
    """Standard CSV quoting; rows with empty text are dropped."""
    path = tmp_path / "data.csv"
    path.write_text('label,text\n1,"Great, really great"\n0,"line one\nline two"\n1,"%%%"\n', encoding="utf-8")
    docs = load_documents(path, num_classes=2)
    assert [d.gold_label for d in docs] == [1, 0]
    assert docs[0].text == "Great, really great"
    assert "\n" in docs[1].text


def test_load_documents_errors(tmp_path):
    """Missing file, empty file and bad labels."""
    with pytest.raises(FileUnreadable):
        load_documents(tmp_path / "missing.csv", 2)

    empty = tmp_path / "empty.csv"
    empty.write_text("", encoding="utf-8")
    with pytest.raises(EmptyFile):
        load_documents(empty, 2)

    bad = tmp_path / "bad.csv"
    bad.write_text("label,text\n2,hello\n", encoding="utf-8")
    with pytest.raises(LabelOutOfRange):
        load_documents(bad, 2)


def test_indexed_dataset_save_load(tmp_path):
    """npz round trip keeps every field."""
    docs = _docs(10)
    vocab = build_vocabulary(corpus_tokens(docs), 100)
    train, _ = index_dataset(docs, vocab, 4, SplitSpec())
    loaded = IndexedDataset.load(train.save(tmp_path / "train.npz"))
    assert np.array_equal(loaded.sequences, train.sequences)
    assert np.array_equal(loaded.labeled_mask, train.labeled_mask)
    assert loaded.num_classes == 2
    assert loaded.split_tag == "train"


def test_labeled_subset_and_fully_labeled():
    """L only, and T with every label revealed."""
    docs = _docs(20)
    vocab = build_vocabulary(corpus_tokens(docs), 100)
    train, _ = index_dataset(docs, vocab, 4, SplitSpec(label_fraction=0.25))
    subset = train.labeled_subset()
    assert len(subset) == train.labeled_count
    assert subset.labeled_mask.all()
    assert train.fully_labeled().labeled_count == len(train)
