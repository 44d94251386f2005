"""AUROC as the Wilcoxon-Mann-Whitney statistic.

Ties between a positive and a negative score count one half. ``auroc`` runs in
O(n log n) through midranks; ``auroc_bruteforce`` enumerates every
positive-negative pair and exists as an oracle for tests.
"""
from __future__ import annotations

import numpy as np
from scipy.stats import rankdata

from .errors import EmptyClass, NonFiniteScore

__all__ = ["auroc", "auroc_bruteforce", "split_scores"]


def split_scores(scores, labels):
    """Validate ``scores``/``labels`` and return (positive scores, negative scores).

    Labels must be +1 or -1.
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise ValueError(f"{scores.size} scores but {labels.size} labels")
    if not np.all((labels == 1) | (labels == -1)):
        raise ValueError("labels must be +1 or -1")
    if not np.all(np.isfinite(scores)):
        raise NonFiniteScore("scores contain NaN or inf")
    pos = scores[labels == 1]
    neg = scores[labels == -1]
    if pos.size == 0 or neg.size == 0:
        raise EmptyClass(f"need both classes, got {pos.size} positive and {neg.size} negative")
    return pos, neg


def auroc(scores, labels) -> float:
    pos, neg = split_scores(scores, labels)
    n_pos, n_neg = pos.size, neg.size
    ranks = rankdata(np.concatenate([pos, neg]), method="average")
    # Midranks are multiples of 1/2, so this sum is exact in double precision.
    u_stat = ranks[:n_pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u_stat / (n_pos * n_neg))


def auroc_bruteforce(scores, labels) -> float:
    pos, neg = split_scores(scores, labels)
    wins = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                wins += 1.0
            elif p == q:
                wins += 0.5
    return wins / (pos.size * neg.size)
