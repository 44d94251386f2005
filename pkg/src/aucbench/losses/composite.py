"""Composite AUROC losses.

A composite loss is

    mean_pos (s_i - a)^2 + mean_neg (s_j - b)^2 + l(A - B)

where ``a``/``b`` are free centering variables, ``A``/``B`` are the batch mean
scores of each class and ``l`` is an outer surrogate applied to ``d = A - B``.
The same module carries the min-max (square / margin) forms these losses are
equivalent to, plus the score gradients used by the primal-dual optimizer.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from ..errors import EmptyClass

__all__ = [
    "CompositeKind",
    "CompositeLossSpec",
    "BatchComponents",
    "batch_components",
    "surrogate_value",
    "surrogate_grad",
    "composite_objective",
    "composite_grads",
    "minmax_objective",
    "minmax_score_grads",
    "optimal_alpha",
]


class CompositeKind(str, enum.Enum):
    CSQ = "CSQ"
    CSH = "CSH"  # same objective as AUC-M (min-max margin with alpha >= 0)
    CH = "CH"
    CL = "CL"


@dataclass(frozen=True)
class CompositeLossSpec:
    kind: CompositeKind
    margin: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", CompositeKind(self.kind))
        if self.kind is CompositeKind.CL:
            if not self.scale > 0:
                raise ValueError(f"CL needs scale > 0, got {self.scale}")
        elif not self.margin > 0:
            raise ValueError(f"{self.kind.value} needs margin > 0, got {self.margin}")

    @property
    def family(self) -> str:
        return "composite"


@dataclass(frozen=True)
class BatchComponents:
    h_plus: float
    h_minus: float
    a_mean: float
    b_mean: float

    @property
    def gap(self) -> float:
        return self.a_mean - self.b_mean


def _as_classes(pos_scores, neg_scores):
    pos = np.asarray(pos_scores, dtype=np.float64).ravel()
    neg = np.asarray(neg_scores, dtype=np.float64).ravel()
    if pos.size == 0 or neg.size == 0:
        raise EmptyClass("composite loss needs at least one positive and one negative score")
    return pos, neg


def batch_components(pos_scores, neg_scores, a: float, b: float) -> BatchComponents:
    pos, neg = _as_classes(pos_scores, neg_scores)
    # dot products and plain sums: these run every training step on small batches
    dp, dn = pos - a, neg - b
    return BatchComponents(
        h_plus=float(dp @ dp) / pos.size,
        h_minus=float(dn @ dn) / neg.size,
        a_mean=float(pos.sum()) / pos.size,
        b_mean=float(neg.sum()) / neg.size,
    )


def surrogate_value(spec: CompositeLossSpec, d: float) -> float:
    # numpy scalars overflow to inf (caught by the trainer) instead of raising
    c, s, d = spec.margin, spec.scale, np.float64(d)
    if spec.kind is CompositeKind.CSQ:
        return float(0.5 * (c - d) ** 2)
    if spec.kind is CompositeKind.CSH:
        return float(0.5 * np.maximum(c - d, 0.0) ** 2)
    if spec.kind is CompositeKind.CH:
        return float(np.maximum(c - d, 0.0))
    return float(np.logaddexp(0.0, -s * d))


def surrogate_grad(spec: CompositeLossSpec, d: float) -> float:
    c, s, d = spec.margin, spec.scale, np.float64(d)
    if spec.kind is CompositeKind.CSQ:
        return float(-(c - d))
    if spec.kind is CompositeKind.CSH:
        return float(-np.maximum(c - d, 0.0))
    if spec.kind is CompositeKind.CH:
        return -1.0 if d < c else 0.0
    return float(-s * expit(-s * d))


def composite_objective(spec: CompositeLossSpec, pos_scores, neg_scores, a: float, b: float) -> float:
    comp = batch_components(pos_scores, neg_scores, a, b)
    return comp.h_plus + comp.h_minus + surrogate_value(spec, comp.gap)


def composite_grads(spec: CompositeLossSpec, pos_scores, neg_scores, a: float, b: float, d: float):
    """Score and (a, b) gradients with the outer derivative evaluated at ``d``.

    ``d`` is whatever estimate of ``A - B`` the caller tracks (a moving average
    during training). With ``d = A - B`` the result is the exact gradient of
    ``composite_objective``.

    Returns ``(grad_pos, grad_neg, grad_a, grad_b)``.
    """
    pos, neg = _as_classes(pos_scores, neg_scores)
    outer = surrogate_grad(spec, d)
    dp, dn = pos - a, neg - b
    grad_pos = (2.0 * dp + outer) / pos.size
    grad_neg = (2.0 * dn - outer) / neg.size
    grad_a = -2.0 * float(dp.sum()) / pos.size
    grad_b = -2.0 * float(dn.sum()) / neg.size
    return grad_pos, grad_neg, grad_a, grad_b


def optimal_alpha(margin: float, a_mean: float, b_mean: float, nonnegative: bool = True) -> float:
    """Maximizer of ``alpha * (c + B - A) - alpha^2 / 2``, optionally over alpha >= 0."""
    u = margin + b_mean - a_mean
    return max(u, 0.0) if nonnegative else u


def minmax_objective(pos_scores, neg_scores, a: float, b: float, alpha: float, margin: float) -> float:
    """Min-max square-loss objective at a fixed dual variable ``alpha``."""
    comp = batch_components(pos_scores, neg_scores, a, b)
    u = margin + comp.b_mean - comp.a_mean
    alpha = np.float64(alpha)
    return float(comp.h_plus + comp.h_minus + alpha * u - 0.5 * alpha**2)


def minmax_score_grads(pos_scores, neg_scores, a: float, b: float, alpha: float):
    """Primal gradients of ``minmax_objective``: ``(grad_pos, grad_neg, grad_a, grad_b)``."""
    pos, neg = _as_classes(pos_scores, neg_scores)
    grad_pos = (2.0 * (pos - a) - alpha) / pos.size
    grad_neg = (2.0 * (neg - b) + alpha) / neg.size
    grad_a = -2.0 * float(np.mean(pos - a))
    grad_b = -2.0 * float(np.mean(neg - b))
    return grad_pos, grad_neg, grad_a, grad_b
