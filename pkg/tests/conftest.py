import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from flipset import DatasetSplit, Hyperparams


def make_split(X, y, kind="train", texts=None):
    return DatasetSplit(X=np.asarray(X, dtype=np.float64), y=np.asarray(y), kind=kind, texts=texts)


def random_problem(rng, n, d, separation=2.0):
    """Balanced labeled blobs along a random direction, bias column appended."""
    u = rng.standard_normal(d)
    u /= np.linalg.norm(u)
    y = rng.permutation(np.resize([0, 1], n))
    X = (2 * y[:, None] - 1) * (separation / 2.0) * u + rng.standard_normal((n, d))
    X = np.hstack([X, np.ones((n, 1))])
    return make_split(X, y)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def hyper():
    return Hyperparams(lam=0.5)


@pytest.fixture
def mirrored_pair():
    # Symmetric bias-free pair: the zero vector sits on the boundary for
    # any weights, and symmetry keeps training anchored there.
    x = np.array([1.5, -2.0, 0.5])
    probe = np.zeros(3)
    return make_split(np.stack([x, -x]), np.array([1, 0])), probe
