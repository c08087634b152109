"""Dataset acquisition: corpus loading, bag-of-words featurization,
precomputed-embedding files, and the synthetic blob generator.

Featurizers append a constant bias column as the last feature, so a
declared dimension d arrives at the model as d + 1. Vocabulary is built
from the train split only; test tokens outside it are dropped.
"""

from __future__ import annotations

import csv
import json
import re
import struct
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .data import TEST, TRAIN, DatasetSplit
from .errors import DataError, InputError

WEIGHTINGS = ("binary", "count", "tfidf")

EMB_MAGIC = b"FLIPEMB\x00"

BUNDLED_CORPUS = "mini_sentiment"


@dataclass(frozen=True)
class CorpusRecord:
    """One raw text with its binary label and split assignment."""

    text: str
    label: int
    split: str

    def __post_init__(self):
        if self.label not in (0, 1):
            raise DataError(f"label must be 0 or 1, got {self.label!r}")
        if self.split not in (TRAIN, TEST):
            raise DataError(f"split must be 'train' or 'test', got {self.split!r}")


@dataclass(frozen=True)
class BowConfig:
    """Bag-of-words featurization knobs.

    ``token_pattern`` is a regex whose matches are the tokens; the
    default keeps alphanumeric runs, i.e. splits on whitespace and
    punctuation. Pruning: keep tokens appearing in at least ``min_df``
    train documents, capped at ``max_vocab`` (highest document frequency
    first, ties alphabetical).
    """

    lowercase: bool = True
    token_pattern: str = r"[0-9a-zA-Z]+"
    min_df: int = 2
    max_vocab: int = 10000
    weighting: str = "count"

    def __post_init__(self):
        if self.min_df < 1:
            raise InputError("min_df must be >= 1")
        if self.max_vocab < 1:
            raise InputError("max_vocab must be >= 1")
        if self.weighting not in WEIGHTINGS:
            raise InputError(f"weighting must be one of {WEIGHTINGS}, got {self.weighting!r}")

    def tokenize(self, text: str) -> List[str]:
        if self.lowercase:
            text = text.lower()
        return re.findall(self.token_pattern, text)


def _parse_label(raw, where: str) -> int:
    if isinstance(raw, bool):
        raise DataError(f"{where}: label must be 0 or 1, got boolean {raw!r}")
    if isinstance(raw, (int, float)) and float(raw) in (0.0, 1.0):
        return int(raw)
    if isinstance(raw, str) and raw.strip() in ("0", "1"):
        return int(raw.strip())
    raise DataError(f"{where}: label must be 0 or 1, got {raw!r}")


def _record_from_fields(text, label, split, where: str) -> CorpusRecord:
    if text is None or label is None or split is None:
        raise DataError(f"{where}: missing required field (text, label, split)")
    if split not in (TRAIN, TEST):
        raise DataError(f"{where}: split must be 'train' or 'test', got {split!r}")
    return CorpusRecord(text=str(text), label=_parse_label(label, where), split=split)


def load_corpus(path, fmt: Optional[str] = None) -> Tuple[List[CorpusRecord], List[CorpusRecord]]:
    """Read a labeled corpus from csv or jsonl into (train, test) record lists.

    Ordering within each split follows file order. Malformed rows raise
    DataError naming the offending line.
    """
    path = resolve_corpus_path(path)
    if fmt is None:
        fmt = "csv" if path.suffix.lower() == ".csv" else "jsonl"
    if fmt not in ("csv", "jsonl"):
        raise InputError(f"format must be 'csv' or 'jsonl', got {fmt!r}")
    if not path.exists():
        raise DataError(f"corpus file not found: {path}")
    records: List[CorpusRecord] = []
    if fmt == "csv":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"text", "label", "split"} <= set(reader.fieldnames):
                raise DataError(f"{path}: csv must have columns text,label,split")
            for lineno, row in enumerate(reader, start=2):
                records.append(_record_from_fields(
                    row.get("text"), row.get("label"), row.get("split"), f"{path}:{lineno}"))
    else:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise DataError(f"{path}:{lineno}: invalid json ({exc})") from exc
                if not isinstance(obj, dict):
                    raise DataError(f"{path}:{lineno}: expected an object per line")
                records.append(_record_from_fields(
                    obj.get("text"), obj.get("label"), obj.get("split"), f"{path}:{lineno}"))
    train = [r for r in records if r.split == TRAIN]
    test = [r for r in records if r.split == TEST]
    return train, test


def featurize_bow(train_records: Sequence[CorpusRecord],
                  test_records: Sequence[CorpusRecord],
                  config: BowConfig) -> Tuple[DatasetSplit, DatasetSplit, Dict]:
    """Sparse bag-of-words splits plus the vocabulary manifest.

    The vocabulary (and document frequencies, and tf-idf weights) comes
    from the train records only. Returns (train_split, test_split,
    manifest); the manifest maps token -> column and records the bias
    column index.
    """
    if not train_records:
        raise DataError("train split has no records")
    train_tokens = [config.tokenize(r.text) for r in train_records]
    df: Dict[str, int] = {}
    for toks in train_tokens:
        for tok in set(toks):
            df[tok] = df.get(tok, 0) + 1
    kept = [tok for tok, count in df.items() if count >= config.min_df]
    kept.sort(key=lambda tok: (-df[tok], tok))
    kept = kept[:config.max_vocab]
    if not kept:
        raise DataError("vocabulary is empty after pruning; lower min_df or check the corpus")
    vocab = {tok: col for col, tok in enumerate(sorted(kept))}
    n_vocab = len(vocab)

    # Column weight applied to term counts: 1 except under tf-idf, where
    # idf = ln((1 + n_docs) / (1 + df)) + 1 over train documents.
    col_weight = np.ones(n_vocab, dtype=np.float64)
    if config.weighting == "tfidf":
        n_docs = len(train_records)
        for tok, col in vocab.items():
            col_weight[col] = np.log((1.0 + n_docs) / (1.0 + df[tok])) + 1.0

    def build(records: Sequence[CorpusRecord], token_lists, kind: str) -> DatasetSplit:
        rows, cols, vals = [], [], []
        for i, toks in enumerate(token_lists):
            counts: Dict[int, float] = {}
            for tok in toks:
                col = vocab.get(tok)
                if col is not None:
                    counts[col] = counts.get(col, 0.0) + 1.0
            for col in sorted(counts):
                if config.weighting == "binary":
                    val = 1.0
                else:
                    val = counts[col] * col_weight[col]
                rows.append(i)
                cols.append(col)
                vals.append(val)
            rows.append(i)
            cols.append(n_vocab)
            vals.append(1.0)  # bias feature
        X = sp.csr_matrix((vals, (rows, cols)),
                          shape=(len(records), n_vocab + 1), dtype=np.float64)
        y = np.array([r.label for r in records], dtype=np.int64)
        return DatasetSplit(X=X, y=y, kind=kind, texts=tuple(r.text for r in records))

    train_split = build(train_records, train_tokens, TRAIN)
    test_split = build(test_records, [config.tokenize(r.text) for r in test_records], TEST)

    manifest = {
        "vocabulary": vocab,
        "document_frequency": {tok: df[tok] for tok in vocab},
        "bias_column": n_vocab,
        "dimension": n_vocab + 1,
        "weighting": config.weighting,
        "config": {
            "lowercase": config.lowercase,
            "token_pattern": config.token_pattern,
            "min_df": config.min_df,
            "max_vocab": config.max_vocab,
            "weighting": config.weighting,
        },
        "counts": {"train": len(train_records), "test": len(test_records)},
    }
    return train_split, test_split, manifest


def write_embedding_file(path, X, y) -> None:
    """Write dense vectors + labels in the binary embedding format.

    Layout: 8-byte magic, little-endian uint64 n and d, then n records of
    (label as float64, d float64 features). Round-trips bit-exactly.
    ``X`` may be a matrix or a sequence of vectors; a vector whose length
    disagrees with the first record is rejected by record index.
    """
    if not isinstance(X, np.ndarray):
        rows = [np.asarray(row, dtype=np.float64).ravel() for row in X]
        if rows:
            d0 = rows[0].shape[0]
            for i, row in enumerate(rows):
                if row.shape[0] != d0:
                    raise DataError(f"record {i}: vector has dimension {row.shape[0]}, "
                                    f"expected {d0}")
        X = np.vstack(rows) if rows else np.zeros((0, 0))
    X = np.ascontiguousarray(np.asarray(X, dtype=np.float64))
    y = np.asarray(y)
    if X.ndim != 2:
        raise InputError("X must be 2-D")
    n, d = X.shape
    if y.shape != (n,):
        raise InputError("y must align with X rows")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = bytearray()
    buf += EMB_MAGIC
    buf += struct.pack("<QQ", n, d)
    for i in range(n):
        label = float(y[i])
        if label not in (0.0, 1.0):
            raise DataError(f"record {i}: label must be 0 or 1, got {y[i]!r}")
        buf += struct.pack("<d", label)
        buf += X[i].astype("<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(bytes(buf))


def read_embedding_file(path) -> Tuple[np.ndarray, np.ndarray]:
    """Read one binary embedding file back into (X, y), bit-exact."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"embedding file not found: {path}")
    raw = path.read_bytes()
    header_len = len(EMB_MAGIC) + 16
    if len(raw) < header_len or raw[:len(EMB_MAGIC)] != EMB_MAGIC:
        raise DataError(f"{path}: not an embedding file (bad header)")
    n, d = struct.unpack_from("<QQ", raw, len(EMB_MAGIC))
    record_bytes = 8 * (d + 1)
    X = np.empty((n, d), dtype=np.float64)
    y = np.empty(n, dtype=np.int64)
    offset = header_len
    for i in range(n):
        if offset + record_bytes > len(raw):
            raise DataError(f"{path}: record {i} truncated "
                            f"(expected {record_bytes} bytes, file ends early)")
        label = struct.unpack_from("<d", raw, offset)[0]
        if label not in (0.0, 1.0):
            raise DataError(f"{path}: record {i} has non-binary label {label!r}")
        y[i] = int(label)
        X[i] = np.frombuffer(raw, dtype="<f8", count=d, offset=offset + 8)
        offset += record_bytes
    if offset != len(raw):
        raise DataError(f"{path}: {len(raw) - offset} trailing bytes after record {n - 1}")
    return X, y


def write_embeddings(dir_path, train: Tuple[np.ndarray, np.ndarray],
                     test: Tuple[np.ndarray, np.ndarray]) -> None:
    dir_path = Path(dir_path)
    write_embedding_file(dir_path / "train.emb", *train)
    write_embedding_file(dir_path / "test.emb", *test)


def load_embeddings(path) -> Tuple[DatasetSplit, DatasetSplit]:
    """Load precomputed dense vectors from a directory holding train.emb/test.emb.

    Appends the bias column; train and test must agree on dimension.
    """
    path = Path(path)
    X_train, y_train = read_embedding_file(path / "train.emb")
    X_test, y_test = read_embedding_file(path / "test.emb")
    if X_test.shape[0] and X_test.shape[1] != X_train.shape[1]:
        raise DataError(f"{path}: test dimension {X_test.shape[1]} != train dimension {X_train.shape[1]}")

    def with_bias(X: np.ndarray) -> np.ndarray:
        return np.hstack([X, np.ones((X.shape[0], 1))])

    return (DatasetSplit(X=with_bias(X_train), y=y_train, kind=TRAIN),
            DatasetSplit(X=with_bias(X_test), y=y_test, kind=TEST))


def make_synthetic(seed: int, n_train: int, n_test: int, dim: int,
                   class_separation: float, noise_rate: float) -> Tuple[DatasetSplit, DatasetSplit]:
    """Two Gaussian blobs at +-(separation/2) along a seeded random unit direction.

    Labels are balanced Bernoulli draws; ``noise_rate`` of them are
    flipped afterwards. A bias column is appended like the text
    featurizers do. Deterministic per seed.
    """
    if n_train < 1 or n_test < 0 or dim < 1:
        raise InputError("n_train must be >= 1, n_test >= 0, dim >= 1")
    if class_separation < 0:
        raise InputError("class_separation must be >= 0")
    if not 0.0 <= noise_rate <= 1.0:
        raise InputError("noise_rate must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    direction = rng.standard_normal(dim)
    direction /= np.linalg.norm(direction)
    means = np.stack([-0.5 * class_separation * direction,
                      +0.5 * class_separation * direction])

    def draw(n: int, kind: str) -> DatasetSplit:
        y = rng.integers(0, 2, size=n)
        X = means[y] + rng.standard_normal((n, dim))
        flip = rng.random(n) < noise_rate
        y = np.where(flip, 1 - y, y)
        X = np.hstack([X, np.ones((n, 1))])
        return DatasetSplit(X=X, y=y, kind=kind)

    return draw(n_train, TRAIN), draw(n_test, TEST)


def resolve_corpus_path(path) -> Path:
    """Resolve user paths, expanding the bundled: scheme to packaged data."""
    text = str(path)
    if text.startswith("bundled:"):
        return bundled_corpus_path(text.split(":", 1)[1])
    return Path(text)


def bundled_corpus_path(name: str = BUNDLED_CORPUS) -> Path:
    target = resources.files("flipset.bundled") / f"{name}.jsonl"
    with resources.as_file(target) as concrete:
        if not concrete.exists():
            raise DataError(f"no bundled corpus named {name!r}")
        return Path(concrete)


def bundled_corpus_manifest(name: str = BUNDLED_CORPUS) -> Dict:
    target = resources.files("flipset.bundled") / f"{name}.manifest.json"
    with resources.as_file(target) as concrete:
        if not concrete.exists():
            raise DataError(f"no manifest for bundled corpus {name!r}")
        return json.loads(concrete.read_text(encoding="utf-8"))
