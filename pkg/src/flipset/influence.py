"""Influence-function machinery: parameter influence, influence on
prediction and loss, and the similarity/gradient attribution baselines.

Sign and scale convention, fixed once and calibrated against the exact
leave-one-out retraining oracle: every stored delta is the estimated
REMOVAL effect, i.e. deltas[i] = (1/N) grad_f(x_t)^T H^-1 grad_L(z_i)
approximates f(x_t; retrained without z_i) - f(x_t). Summing deltas over
a subset estimates the group-removal effect, which is exactly the
quantity the prefix search accumulates against the threshold.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, Optional

import numpy as np
import scipy.sparse as sp

from .data import DatasetSplit, Instance, dense_vector
from .errors import InputError
from .linalg import HessianOperator, solve_spd, spd_inverse_sqrt
from .model import (TrainedModel, hessian_operator, loss_grad,
                    prediction_gradient, risk_hessian, sigmoid)

REMOVAL_CONVENTION = "removal-delta-probability"

METHODS = ("IP", "IF_LOSS", "EUC", "DOT", "COS", "RIF", "GD", "GC", "RANDOM")

__all__ = [
    "METHODS", "REMOVAL_CONVENTION", "AttributionScores", "InfluenceVector",
    "ParamInfluence", "attribution", "loss_influence", "param_influence",
    "prediction_influence", "solve_spd", "sweep_order",
]


@dataclass(frozen=True)
class ParamInfluence:
    """Per-point parameter-update columns H^-1 grad_L(z_i) at ``base_theta``.

    ``normalization`` records the divisor (the training-set size) that
    converts a column into the removal-effect parameter shift.
    """

    columns: Dict[int, np.ndarray]
    base_theta: np.ndarray
    normalization: float


@dataclass(frozen=True)
class InfluenceVector:
    """Estimated per-training-point prediction shifts for one test point."""

    test_index: int
    deltas: np.ndarray
    convention: str = REMOVAL_CONVENTION

    def __post_init__(self):
        if not np.isfinite(self.deltas).all():
            raise InputError("influence deltas must be finite")


@dataclass(frozen=True)
class AttributionScores:
    """Scores over the training set for one test point under one method."""

    method: str
    scores: np.ndarray
    seed: Optional[int] = None


def _residuals(model: TrainedModel, split: DatasetSplit) -> np.ndarray:
    return sigmoid(split.X @ model.theta) - split.y


def param_influence(model: TrainedModel, train_split: DatasetSplit,
                    subset: Iterable[int],
                    op: Optional[HessianOperator] = None) -> ParamInfluence:
    """Explicit influence columns for the requested training indices.

    One SPD solve per column; use ``prediction_influence`` when only the
    projection onto a prediction gradient is needed.
    """
    op = hessian_operator(model, train_split) if op is None else op
    columns: Dict[int, np.ndarray] = {}
    for i in subset:
        grad = loss_grad(train_split.instance(i), model.theta)
        columns[int(i)] = op.solve(grad)
    return ParamInfluence(columns=columns, base_theta=model.theta,
                          normalization=float(train_split.n))


def prediction_influence(model: TrainedModel, train_split: DatasetSplit, x_t,
                         *, test_index: int = -1,
                         op: Optional[HessianOperator] = None) -> InfluenceVector:
    """Removal effect of every training point on the predicted probability at x_t.

    Computed with a single SPD solve: v = H^-1 grad_f(x_t), then
    deltas[i] = (1/N) (sigma_i - y_i) (x_i . v). Pass a prebuilt ``op``
    to share the factorization across many test points.
    """
    op = hessian_operator(model, train_split) if op is None else op
    v = op.solve(prediction_gradient(model, x_t))
    deltas = (train_split.X @ v) * _residuals(model, train_split) / train_split.n
    return InfluenceVector(test_index=test_index, deltas=np.asarray(deltas, dtype=np.float64))


def loss_influence(model: TrainedModel, train_split: DatasetSplit, z_t: Instance,
                   op: Optional[HessianOperator] = None) -> np.ndarray:
    """Removal effect of every training point on the test loss at z_t.

    Same one-solve contract as ``prediction_influence`` with the test
    loss gradient in place of the prediction gradient.
    """
    op = hessian_operator(model, train_split) if op is None else op
    v = op.solve(loss_grad(z_t, model.theta))
    return np.asarray((train_split.X @ v) * _residuals(model, train_split) / train_split.n,
                      dtype=np.float64)


def _row_norms(X) -> np.ndarray:
    if sp.issparse(X):
        return np.sqrt(np.asarray(X.multiply(X).sum(axis=1)).ravel())
    return np.linalg.norm(X, axis=1)


def _neg_sq_distances(X, x_t: np.ndarray) -> np.ndarray:
    # Direct subtraction keeps EUC(x, x) exactly zero; sparse rows are
    # densified in bounded blocks.
    n, d = X.shape
    out = np.empty(n)
    block = max(1, 4_000_000 // max(d, 1))
    for start in range(0, n, block):
        end = min(start + block, n)
        rows = X[start:end]
        if sp.issparse(rows):
            rows = np.asarray(rows.todense())
        diff = rows - x_t
        out[start:end] = -np.einsum("ij,ij->i", diff, diff)
    return out


def _safe_cosine(dots: np.ndarray, norms: np.ndarray, ref_norm: float) -> np.ndarray:
    # Zero-norm vectors get cosine 0 so downstream sorts stay total.
    out = np.zeros_like(dots)
    ok = (norms > 0) & (ref_norm > 0)
    out[ok] = dots[ok] / (norms[ok] * ref_norm)
    return out


def attribution(method: str, model: TrainedModel, train_split: DatasetSplit,
                z_t: Instance, seed: int = 0) -> AttributionScores:
    """Training-set attribution scores for one test instance.

    Similarity baselines (EUC = negated squared distance, DOT, COS) use
    raw features; gradient baselines (GD, GC, RIF) use per-instance loss
    gradients, RIF after whitening by the inverse square root of the
    Hessian with its spectrum floored at lam/2. RANDOM scores are a
    seeded uniform permutation.
    """
    if method not in METHODS:
        raise InputError(f"unknown attribution method {method!r}; expected one of {METHODS}")
    X = train_split.X
    x_t = dense_vector(z_t.features, model.dimension)

    if method == "IP":
        iv = prediction_influence(model, train_split, x_t, test_index=z_t.index)
        return AttributionScores(method=method, scores=iv.deltas)
    if method == "IF_LOSS":
        return AttributionScores(method=method, scores=loss_influence(model, train_split, z_t))
    if method == "RANDOM":
        rng = np.random.default_rng(seed)
        return AttributionScores(method=method,
                                 scores=rng.permutation(train_split.n).astype(np.float64),
                                 seed=seed)

    if method in ("EUC", "DOT", "COS"):
        if method == "EUC":
            return AttributionScores(method=method, scores=_neg_sq_distances(X, x_t))
        dots = np.asarray(X @ x_t, dtype=np.float64)
        if method == "DOT":
            return AttributionScores(method=method, scores=dots)
        return AttributionScores(
            method=method, scores=_safe_cosine(dots, _row_norms(X), float(np.linalg.norm(x_t))))

    # Gradient-similarity family: grad_L(z_i) = (sigma_i - y_i) x_i.
    res = _residuals(model, train_split)
    g_t = loss_grad(z_t, model.theta)
    if method in ("GD", "GC"):
        dots = res * np.asarray(X @ g_t, dtype=np.float64)
        if method == "GD":
            return AttributionScores(method=method, scores=dots)
        norms = np.abs(res) * _row_norms(X)
        return AttributionScores(
            method=method, scores=_safe_cosine(dots, norms, float(np.linalg.norm(g_t))))

    # RIF: cosine between whitened gradients, W = H^(-1/2).
    H = risk_hessian(train_split, model.theta, model.hyper.lam)
    W = spd_inverse_sqrt(H, eigen_floor=model.hyper.lam / 2.0)
    wg_t = W @ g_t
    XW = np.asarray(X @ W)
    dots = res * (XW @ wg_t)
    norms = np.abs(res) * np.linalg.norm(XW, axis=1)
    return AttributionScores(
        method="RIF", scores=_safe_cosine(dots, norms, float(np.linalg.norm(wg_t))))


def sweep_order(att: AttributionScores, original_positive: bool) -> np.ndarray:
    """Removal order for the top-k attribution sweep.

    Influence methods are ordered toward flipping the current prediction
    (most label-opposing removal effect first); all other methods remove
    the highest-scoring points first. Ties break by ascending index.
    """
    scores = att.scores
    if att.method in ("IP", "IF_LOSS"):
        keys = scores if original_positive else -scores
    else:
        keys = -scores
    return np.argsort(keys, kind="stable")
