"""Featurized dataset containers shared by training, influence, and search.

Feature matrices may be dense ``numpy`` arrays or ``scipy.sparse`` CSR
matrices (bag-of-words); single feature vectors are always handled as
dense 1-D arrays. Splits are immutable after construction and safe to
share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp

from .errors import InputError

FeatureMatrix = Union[np.ndarray, sp.csr_matrix]

TRAIN = "train"
TEST = "test"


def dense_vector(x, dim: Optional[int] = None) -> np.ndarray:
    """Coerce a feature vector (dense, sparse row, or sequence) to 1-D float64.

    Raises InputError on dimension mismatch when ``dim`` is given.
    """
    if sp.issparse(x):
        arr = np.asarray(x.todense()).ravel().astype(np.float64)
    else:
        arr = np.asarray(x, dtype=np.float64).ravel()
    if dim is not None and arr.shape[0] != dim:
        raise InputError(f"feature vector has dimension {arr.shape[0]}, expected {dim}")
    return arr


@dataclass(frozen=True)
class Instance:
    """One training or test example: feature vector, binary label, optional text."""

    index: int
    features: np.ndarray
    label: int
    text: Optional[str] = None

    def __post_init__(self):
        if self.label not in (0, 1):
            raise InputError(f"label must be 0 or 1, got {self.label!r}")


@dataclass(frozen=True)
class DatasetSplit:
    """An immutable featurized split with dense indices 0..n-1.

    ``X`` is (n, d) dense or CSR; ``y`` is an int array in {0, 1};
    ``texts``, when present, aligns with rows.
    """

    X: FeatureMatrix
    y: np.ndarray
    kind: str = TRAIN
    texts: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in (TRAIN, TEST):
            raise InputError(f"kind must be 'train' or 'test', got {self.kind!r}")
        X = self.X
        if sp.issparse(X):
            X = sp.csr_matrix(X, dtype=np.float64)
        else:
            X = np.asarray(X, dtype=np.float64)
            if X.ndim != 2:
                raise InputError(f"X must be 2-D, got shape {X.shape}")
        y = np.asarray(self.y)
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise InputError("y must be 1-D and aligned with X rows")
        if not np.isin(y, (0, 1)).all():
            raise InputError("labels must all be 0 or 1")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y.astype(np.int64))
        if self.texts is not None:
            texts = tuple(self.texts)
            if len(texts) != X.shape[0]:
                raise InputError("texts must align with X rows")
            object.__setattr__(self, "texts", texts)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dimension(self) -> int:
        return self.X.shape[1]

    def feature_row(self, i: int) -> np.ndarray:
        """Row ``i`` as a dense 1-D vector."""
        self._check_index(i)
        if sp.issparse(self.X):
            return dense_vector(self.X.getrow(i))
        return np.asarray(self.X[i], dtype=np.float64)

    def text_of(self, i: int) -> Optional[str]:
        return self.texts[i] if self.texts is not None else None

    def instance(self, i: int) -> Instance:
        self._check_index(i)
        return Instance(index=i, features=self.feature_row(i), label=int(self.y[i]), text=self.text_of(i))

    def instances(self) -> Iterator[Instance]:
        for i in range(self.n):
            yield self.instance(i)

    def without(self, removed: Sequence[int]) -> "DatasetSplit":
        """New split with the given rows dropped; remaining rows reindex to 0..m-1."""
        removed_set = set(int(i) for i in removed)
        for i in removed_set:
            self._check_index(i)
        keep = np.array([i for i in range(self.n) if i not in removed_set], dtype=np.intp)
        return self._take_rows(keep)

    def take(self, indices: Sequence[int]) -> "DatasetSplit":
        """New split with exactly the given rows, in the given order."""
        idx = np.asarray(list(indices), dtype=np.intp)
        for i in idx:
            self._check_index(int(i))
        return self._take_rows(idx)

    def _take_rows(self, idx: np.ndarray) -> "DatasetSplit":
        X = self.X[idx]
        texts = tuple(self.texts[i] for i in idx) if self.texts is not None else None
        return DatasetSplit(X=X, y=self.y[idx], kind=self.kind, texts=texts)

    def _check_index(self, i: int) -> None:
        if not 0 <= i < self.n:
            raise InputError(f"index {i} out of range for split of size {self.n}")
