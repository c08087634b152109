"""Binary classification metrics for the training summaries.

Undefined values (empty evaluation set, single-class AUC) come back as
None so summaries stay valid strict JSON.
"""

from __future__ import annotations

from typing import Dict, Optional

import numpy as np
from scipy.stats import rankdata


def accuracy(y_true: np.ndarray, y_pred: np.ndarray) -> Optional[float]:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.size == 0:
        return None
    return float(np.mean(y_true == y_pred))


def f1_score(y_true: np.ndarray, y_pred: np.ndarray) -> Optional[float]:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.size == 0:
        return None
    tp = int(np.sum((y_true == 1) & (y_pred == 1)))
    fp = int(np.sum((y_true == 0) & (y_pred == 1)))
    fn = int(np.sum((y_true == 1) & (y_pred == 0)))
    denom = 2 * tp + fp + fn
    return float(2 * tp / denom) if denom else 0.0


def roc_auc(y_true: np.ndarray, scores: np.ndarray) -> Optional[float]:
    """AUC via the Mann-Whitney rank statistic (average ranks handle ties)."""
    y_true = np.asarray(y_true)
    scores = np.asarray(scores, dtype=np.float64)
    n_pos = int(np.sum(y_true == 1))
    n_neg = y_true.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = rankdata(scores)
    pos_rank_sum = float(np.sum(ranks[y_true == 1]))
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def summarize(y_true: np.ndarray, probs: np.ndarray, tau: float) -> Dict[str, Optional[float]]:
    preds = (np.asarray(probs) > tau).astype(np.int64)
    return {
        "accuracy": accuracy(y_true, preds),
        "f1": f1_score(y_true, preds),
        "auc": roc_auc(y_true, probs),
    }
