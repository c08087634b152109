"""L2-regularized logistic regression trained by damped Newton.

Holds the convex core: the sigmoid model, per-instance cross-entropy and
its exact gradient, the regularized empirical risk with gradient and
Hessian, and deterministic training (Newton from zero with Armijo
backtracking). Everything downstream (influence estimates, retraining
oracles) leans on these being exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import DatasetSplit, Instance, dense_vector
from .errors import InputError, TrainingError
from .linalg import DENSE_THRESHOLD, HessianOperator

ARMIJO_C = 1e-4
BACKTRACK_FACTOR = 0.5
MAX_BACKTRACKS = 60


def sigmoid(z):
    """Numerically stable logistic function, elementwise."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class Hyperparams:
    """Training and search hyperparameters.

    ``lam`` is the L2 weight (must be positive: it is what keeps the risk
    strongly convex and the Hessian SPD). ``tau`` is the classification
    threshold; a point is labeled positive iff its probability strictly
    exceeds it.
    """

    lam: float = 0.1
    tau: float = 0.5
    newton_tol: float = 1e-8
    newton_max_iter: int = 100
    solver_tol: float = 1e-8

    def __post_init__(self):
        if not self.lam > 0:
            raise InputError(f"lam must be positive, got {self.lam}")
        if not 0.0 < self.tau < 1.0:
            raise InputError(f"tau must lie in (0, 1), got {self.tau}")
        if self.newton_tol <= 0 or self.solver_tol <= 0:
            raise InputError("tolerances must be positive")
        if self.newton_max_iter < 1:
            raise InputError("newton_max_iter must be >= 1")


@dataclass(frozen=True)
class TrainedModel:
    """Converged weight vector with its hyperparameters and diagnostics.

    ``risk_history`` records the objective after each accepted Newton
    step (index 0 is the value at theta = 0).
    """

    theta: np.ndarray
    hyper: Hyperparams
    final_grad_norm: float
    iterations: int
    risk_history: tuple = ()

    @property
    def dimension(self) -> int:
        return self.theta.shape[0]

    def predict_proba(self, x) -> float:
        """Probability of the positive class for one feature vector."""
        x = dense_vector(x, self.dimension)
        return float(sigmoid(float(x @ self.theta)))

    def predict_label(self, x, tau: Optional[float] = None) -> int:
        tau = self.hyper.tau if tau is None else tau
        return int(self.predict_proba(x) > tau)

    def probabilities(self, X) -> np.ndarray:
        """Probabilities for every row of a feature matrix."""
        return sigmoid(X @ self.theta)

    def labels(self, X, tau: Optional[float] = None) -> np.ndarray:
        tau = self.hyper.tau if tau is None else tau
        return (self.probabilities(X) > tau).astype(np.int64)


def loss_value(z: Instance, theta: np.ndarray) -> float:
    """Cross-entropy of one instance, in the overflow-safe log-sum-exp form."""
    m = float(np.asarray(z.features) @ theta)
    return float(np.logaddexp(0.0, m) - z.label * m)


def loss_grad(z: Instance, theta: np.ndarray) -> np.ndarray:
    """Exact per-instance gradient (sigma(theta.x) - y) x."""
    x = dense_vector(z.features, theta.shape[0])
    return (sigmoid(float(x @ theta)) - z.label) * x


def risk_value(split: DatasetSplit, theta: np.ndarray, lam: float) -> float:
    """Mean cross-entropy over the split plus the (lam/2) |theta|^2 penalty."""
    m = split.X @ theta
    mean_loss = float(np.mean(np.logaddexp(0.0, m) - split.y * m))
    return mean_loss + 0.5 * lam * float(theta @ theta)


def risk_grad(split: DatasetSplit, theta: np.ndarray, lam: float) -> np.ndarray:
    residual = sigmoid(split.X @ theta) - split.y
    return (split.X.T @ residual) / split.n + lam * theta


def risk_hessian(split: DatasetSplit, theta: np.ndarray, lam: float) -> np.ndarray:
    """Dense Hessian (1/N) sum_i w_i x_i x_i^T + lam I, w_i = sigma_i(1 - sigma_i).

    Always SPD for lam > 0. Intended for moderate dimension; the implicit
    operator in ``linalg`` covers the wide case.
    """
    if split.n < 1:
        raise InputError("split must be nonempty")
    if lam <= 0:
        raise InputError("lam must be positive")
    p = sigmoid(split.X @ theta)
    op = HessianOperator(split.X, p * (1.0 - p), lam, dense_threshold=max(DENSE_THRESHOLD, split.dimension))
    return op.dense()


def hessian_operator(model: TrainedModel, split: DatasetSplit,
                     theta: Optional[np.ndarray] = None) -> HessianOperator:
    """Risk-Hessian operator for a split at ``theta`` (default: the model's)."""
    theta = model.theta if theta is None else theta
    p = sigmoid(split.X @ theta)
    return HessianOperator(split.X, p * (1.0 - p), model.hyper.lam,
                           solver_tol=model.hyper.solver_tol)


def prediction_gradient(model: TrainedModel, x) -> np.ndarray:
    """Gradient of the predicted probability w.r.t. theta: sigma(1 - sigma) x."""
    x = dense_vector(x, model.dimension)
    p = sigmoid(float(x @ model.theta))
    return p * (1.0 - p) * x


def train(split: DatasetSplit, hyper: Hyperparams) -> TrainedModel:
    """Minimize the regularized risk by damped Newton from theta = 0.

    Deterministic: no randomness, stable arithmetic, so identical inputs
    give bitwise-identical weights. Raises TrainingError (carrying the
    last gradient norm) if the gradient-norm tolerance is not reached
    within ``newton_max_iter`` accepted steps.
    """
    if split.n < 1:
        raise InputError("cannot train on an empty split")
    d = split.dimension
    theta = np.zeros(d, dtype=np.float64)
    value = risk_value(split, theta, hyper.lam)
    grad = risk_grad(split, theta, hyper.lam)
    grad_norm = float(np.linalg.norm(grad))
    history = [value]
    iterations = 0
    while grad_norm > hyper.newton_tol:
        if iterations >= hyper.newton_max_iter:
            raise TrainingError(
                f"Newton did not reach tolerance {hyper.newton_tol:.1e} in "
                f"{hyper.newton_max_iter} iterations (grad norm {grad_norm:.3e})",
                last_grad_norm=grad_norm, iterations=iterations)
        p = sigmoid(split.X @ theta)
        op = HessianOperator(split.X, p * (1.0 - p), hyper.lam, solver_tol=hyper.solver_tol)
        step = op.solve(grad)
        descent = float(grad @ step)
        t = 1.0
        for _ in range(MAX_BACKTRACKS):
            candidate = theta - t * step
            cand_value = risk_value(split, candidate, hyper.lam)
            if cand_value <= value - ARMIJO_C * t * descent:
                break
            t *= BACKTRACK_FACTOR
        else:
            raise TrainingError(
                f"line search failed at iteration {iterations} (grad norm {grad_norm:.3e})",
                last_grad_norm=grad_norm, iterations=iterations)
        theta = candidate
        value = cand_value
        history.append(value)
        grad = risk_grad(split, theta, hyper.lam)
        grad_norm = float(np.linalg.norm(grad))
        iterations += 1
    return TrainedModel(theta=theta, hyper=hyper, final_grad_norm=grad_norm,
                        iterations=iterations, risk_history=tuple(history))
