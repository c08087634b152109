"""Greedy and iterative searches for a training subset that flips a prediction.

Both work on removal-effect deltas from the influence engine. The greedy
pass sorts the whole training set toward the flip direction and returns
the shortest prefix whose cumulative estimated effect pushes the
prediction across the threshold. The iterative variant then re-estimates
the surviving candidate's deltas after a single Newton step on the
reduced risk and searches for a shorter prefix inside the candidate,
looping while the candidate strictly shrinks.

A prediction is positive iff its probability strictly exceeds tau, and a
cumulative sum landing exactly on tau never counts as a crossing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .data import DatasetSplit, dense_vector
from .errors import InputError, NumericalError
from .influence import prediction_influence
from .linalg import HessianOperator
from .model import TrainedModel, risk_grad, sigmoid

GREEDY = "greedy"
ITERATIVE = "iterative"

FLIPPED = "flipped"
NOT_FLIPPED = "not_flipped"

DEFAULT_MAX_PASSES = 25


@dataclass(frozen=True)
class FlipsetResult:
    """Outcome of one flipset search (members empty means no set was found).

    ``members`` keeps the prefix order of the accepting pass and
    ``member_deltas`` the per-member estimated removal effects behind it.
    ``verified``/``retrained_prob`` stay None until exact retraining
    checks the set.
    """

    test_index: int
    original_prob: float
    original_label: int
    members: Tuple[int, ...]
    member_deltas: Tuple[float, ...]
    estimated_prob: float
    algorithm: str
    outer_passes: int = 1
    verified: Optional[str] = None
    retrained_prob: Optional[float] = None

    @property
    def found(self) -> bool:
        return len(self.members) > 0

    @property
    def k(self) -> int:
        return len(self.members)


def _flip_order(deltas: np.ndarray, positive: bool) -> np.ndarray:
    """Sort order pushing the prediction off its current side.

    Positive predictions need the probability to drop, so the most
    negative deltas come first; negative predictions the reverse. Stable,
    so ties fall back to ascending train index.
    """
    keys = deltas if positive else -deltas
    return np.argsort(keys, kind="stable")


def _prefix_crossing(p0: float, positive: bool, sorted_deltas: np.ndarray,
                     tau: float) -> Tuple[Optional[int], float]:
    """Shortest prefix length whose cumulative delta strictly crosses tau."""
    cum = p0 + np.cumsum(sorted_deltas)
    crossed = cum < tau if positive else cum > tau
    if not crossed.any():
        return None, p0
    k = int(np.argmax(crossed)) + 1
    return k, float(cum[k - 1])


def greedy_flipset(model: TrainedModel, train_split: DatasetSplit, x_t,
                   tau: Optional[float] = None, *, test_index: int = -1,
                   op: Optional[HessianOperator] = None) -> FlipsetResult:
    """Single-pass search: one influence vector, one sorted prefix scan.

    Never errors on exhaustion; an empty result is the legitimate "no
    subset found" outcome.
    """
    tau = model.hyper.tau if tau is None else float(tau)
    x_t = dense_vector(x_t, model.dimension)
    p0 = model.predict_proba(x_t)
    positive = p0 > tau
    deltas = prediction_influence(model, train_split, x_t,
                                  test_index=test_index, op=op).deltas
    order = _flip_order(deltas, positive)
    k, est = _prefix_crossing(p0, positive, deltas[order], tau)
    if k is None:
        return FlipsetResult(test_index=test_index, original_prob=p0,
                             original_label=int(positive), members=(),
                             member_deltas=(), estimated_prob=p0,
                             algorithm=GREEDY)
    chosen = order[:k]
    return FlipsetResult(test_index=test_index, original_prob=p0,
                         original_label=int(positive),
                         members=tuple(int(i) for i in chosen),
                         member_deltas=tuple(float(d) for d in deltas[chosen]),
                         estimated_prob=est, algorithm=GREEDY)


def iterative_flipset(model: TrainedModel, train_split: DatasetSplit, x_t,
                      tau: Optional[float] = None,
                      max_passes: int = DEFAULT_MAX_PASSES, *,
                      test_index: int = -1,
                      op: Optional[HessianOperator] = None) -> FlipsetResult:
    """Refinement search: shrink the greedy candidate with re-estimated deltas.

    Each refinement pass takes one Newton step of the reduced risk (train
    set minus the candidate) from the previous refined weights, rebuilds
    the Hessian there, re-estimates removal deltas for candidate members
    only, and re-runs the prefix scan within the candidate. The scan's
    base is the refined-frame estimate of the original prediction (the
    reduced-model probability minus the candidate's summed deltas), so
    the cumulative test never mixes tangent frames; mixing them inflates
    the re-estimated deltas and yields tiny candidates that fail exact
    verification. Stops when the candidate no longer shrinks or at
    ``max_passes``.
    """
    if max_passes < 1:
        raise InputError("max_passes must be >= 1")
    tau = model.hyper.tau if tau is None else float(tau)
    x_t = dense_vector(x_t, model.dimension)
    first = greedy_flipset(model, train_split, x_t, tau, test_index=test_index, op=op)
    if not first.found:
        return FlipsetResult(test_index=test_index, original_prob=first.original_prob,
                             original_label=first.original_label, members=(),
                             member_deltas=(), estimated_prob=first.original_prob,
                             algorithm=ITERATIVE, outer_passes=1)

    p0 = first.original_prob
    positive = bool(first.original_label)
    lam = model.hyper.lam
    solver_tol = model.hyper.solver_tol
    members = list(first.members)
    member_deltas = list(first.member_deltas)
    estimated_prob = first.estimated_prob
    passes = 1
    theta_prime = model.theta

    while passes < max_passes:
        remaining = train_split.without(members)
        if remaining.n == 0:
            break
        try:
            # One Newton step of the reduced risk from the previous theta'.
            grad = risk_grad(remaining, theta_prime, lam)
            p = sigmoid(remaining.X @ theta_prime)
            step_op = HessianOperator(remaining.X, p * (1.0 - p), lam, solver_tol=solver_tol)
            theta_prime = theta_prime - step_op.solve(grad)

            # Removal deltas for candidate members, at the updated weights.
            p_new = sigmoid(remaining.X @ theta_prime)
            refine_op = HessianOperator(remaining.X, p_new * (1.0 - p_new), lam,
                                        solver_tol=solver_tol)
            sigma_t = sigmoid(float(x_t @ theta_prime))
            v = refine_op.solve(sigma_t * (1.0 - sigma_t) * x_t)
        except NumericalError as exc:
            raise NumericalError(f"iterative refinement failed in pass {passes + 1}: {exc}") from exc
        cand = train_split.take(members)
        residuals = sigmoid(cand.X @ theta_prime) - cand.y
        deltas = np.asarray(cand.X @ v, dtype=np.float64) * residuals / remaining.n

        passes += 1
        base = sigma_t - float(deltas.sum())
        if (base <= tau) == positive:
            # refined frame puts even the full candidate's restoration across
            # the threshold; its estimates are not trustworthy here
            break
        order = _flip_order(deltas, positive)
        k, est = _prefix_crossing(base, positive, deltas[order], tau)
        if k is None or k == len(members):
            break
        chosen = order[:k]
        members = [members[j] for j in chosen]
        member_deltas = [float(deltas[j]) for j in chosen]
        estimated_prob = est

    return FlipsetResult(test_index=test_index, original_prob=p0,
                         original_label=int(positive), members=tuple(members),
                         member_deltas=tuple(member_deltas),
                         estimated_prob=estimated_prob, algorithm=ITERATIVE,
                         outer_passes=passes)
