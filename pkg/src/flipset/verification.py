"""Exact-retraining ground truth: flip verification, leave-one-out
calibration of the influence convention, and brute-force minimal sets.

Everything here retrains from scratch (theta = 0, same deterministic
Newton path) so the oracle stays independent of the influence
approximations it certifies.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

from .data import DatasetSplit, dense_vector
from .errors import DegenerateRemainderError, InputError
from .influence import prediction_influence
from .model import Hyperparams, TrainedModel, hessian_operator, sigmoid, train
from .search import FLIPPED, NOT_FLIPPED, FlipsetResult

BRUTE_FORCE_MAX_N = 15
BRUTE_FORCE_MAX_K = 4


def retrain_without(train_split: DatasetSplit, removed: Iterable[int],
                    hyper: Hyperparams) -> TrainedModel:
    """Exact Newton retrain on the split minus ``removed`` (same lam, same tolerances).

    The reduced risk is re-normalized to the mean over the remaining
    points. Raises DegenerateRemainderError when nothing remains or only
    one class remains.
    """
    removed = sorted(set(int(i) for i in removed))
    reduced = train_split.without(removed)
    if reduced.n == 0:
        raise DegenerateRemainderError("removal leaves an empty training set")
    if len(np.unique(reduced.y)) < 2:
        raise DegenerateRemainderError(
            f"removal leaves a single-class training set (label {int(reduced.y[0])} only)")
    return train(reduced, hyper)


def verify_flip(result: FlipsetResult, train_split: DatasetSplit, x_t,
                hyper: Hyperparams) -> FlipsetResult:
    """Retrain without the result's members and record whether the label flipped."""
    if not result.found:
        raise InputError("verify_flip requires a nonempty member set")
    retrained = retrain_without(train_split, result.members, hyper)
    retrained_prob = retrained.predict_proba(x_t)
    new_label = int(retrained_prob > hyper.tau)
    verdict = FLIPPED if new_label != result.original_label else NOT_FLIPPED
    return replace(result, verified=verdict, retrained_prob=retrained_prob)


def brute_force_min_flipset(train_split: DatasetSplit, x_t, hyper: Hyperparams,
                            max_k: int) -> Optional[Tuple[int, ...]]:
    """Exhaustive minimal flipping subset on a tiny instance, or None.

    Enumerates subsets by increasing cardinality and lexicographic order,
    exact-retraining each; the first flip wins. Subsets whose removal
    degenerates the remainder are skipped. Scale bounds (N <= 15,
    max_k <= 4) are enforced because cost is combinatorial.
    """
    if train_split.n > BRUTE_FORCE_MAX_N:
        raise InputError(f"brute force limited to N <= {BRUTE_FORCE_MAX_N}, got {train_split.n}")
    if not 1 <= max_k <= BRUTE_FORCE_MAX_K:
        raise InputError(f"max_k must be in 1..{BRUTE_FORCE_MAX_K}, got {max_k}")
    x_t = dense_vector(x_t, train_split.dimension)
    base = train(train_split, hyper)
    base_label = base.predict_label(x_t)
    for k in range(1, min(max_k, train_split.n - 1) + 1):
        for combo in itertools.combinations(range(train_split.n), k):
            try:
                retrained = retrain_without(train_split, combo, hyper)
            except DegenerateRemainderError:
                continue
            if retrained.predict_label(x_t) != base_label:
                return combo
    return None


@dataclass(frozen=True)
class PointCalibration:
    test_index: int
    pearson_r: Optional[float]
    sign_agreement: float


@dataclass(frozen=True)
class LooCalibrationReport:
    """Per-test-point agreement between influence deltas and exact LOO retrains."""

    per_point: Tuple[PointCalibration, ...]
    mean_r: Optional[float]
    sign_agreement: float
    n_train: int

    @property
    def defined_r(self) -> Tuple[float, ...]:
        return tuple(p.pearson_r for p in self.per_point if p.pearson_r is not None)


def _pearson(a: np.ndarray, b: np.ndarray) -> Optional[float]:
    # Degenerate variance makes the correlation undefined, not an error.
    if a.std() == 0.0 or b.std() == 0.0:
        return None
    return float(np.corrcoef(a, b)[0, 1])


def loo_calibration(model: TrainedModel, train_split: DatasetSplit, test_points,
                    test_indices: Optional[Sequence[int]] = None) -> LooCalibrationReport:
    """Certify the removal-delta convention against exact leave-one-out retrains.

    ``test_points`` is a (m, d) feature matrix (or anything DatasetSplit
    rows coerce from). All N leave-one-out models are retrained once and
    shared across test points.
    """
    X_test = test_points if hasattr(test_points, "shape") else np.asarray(test_points, dtype=np.float64)
    if X_test.ndim != 2:
        raise InputError("test_points must be a 2-D feature matrix")
    m = X_test.shape[0]
    indices = list(range(m)) if test_indices is None else [int(i) for i in test_indices]
    if len(indices) != m:
        raise InputError("test_indices must align with test_points rows")

    hyper = model.hyper
    loo_thetas = np.empty((train_split.n, model.dimension), dtype=np.float64)
    for i in range(train_split.n):
        loo_thetas[i] = retrain_without(train_split, (i,), hyper).theta

    op = hessian_operator(model, train_split)
    per_point = []
    agree_total = 0
    pair_total = 0
    for row, t in enumerate(indices):
        x_t = dense_vector(X_test[row] if not hasattr(X_test, "getrow") else X_test.getrow(row),
                           model.dimension)
        p0 = model.predict_proba(x_t)
        exact = np.array([float(sigmoid(float(x_t @ th))) - p0 for th in loo_thetas])
        approx = prediction_influence(model, train_split, x_t, test_index=t, op=op).deltas
        agree = int(np.sum(np.sign(approx) == np.sign(exact)))
        agree_total += agree
        pair_total += train_split.n
        per_point.append(PointCalibration(test_index=t, pearson_r=_pearson(approx, exact),
                                          sign_agreement=agree / train_split.n))
    defined = [p.pearson_r for p in per_point if p.pearson_r is not None]
    mean_r = float(np.mean(defined)) if defined else None
    return LooCalibrationReport(per_point=tuple(per_point), mean_r=mean_r,
                                sign_agreement=agree_total / max(pair_total, 1),
                                n_train=train_split.n)
