"""Pairwise AUROC surrogates and their batch-level gradients.

Every loss is a function of the score gap ``t = h(x_pos) - h(x_neg)`` and is
averaged over all positive-negative pairs of a mini-batch.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from ..errors import EmptyClass

__all__ = [
    "PairwiseKind",
    "PairwiseLossSpec",
    "pair_loss",
    "pair_loss_grad",
    "pbh_branches",
    "batch_pairwise_loss",
    "batch_pairwise_score_grad",
]


class PairwiseKind(str, enum.Enum):
    PSQ = "PSQ"  # square
    PSH = "PSH"  # squared hinge
    PH = "PH"  # hinge
    PL = "PL"  # logistic
    PSM = "PSM"  # sigmoid
    PBH = "PBH"  # barrier hinge (symmetric)


MARGIN_KINDS = frozenset({PairwiseKind.PSQ, PairwiseKind.PSH, PairwiseKind.PH, PairwiseKind.PBH})
SCALE_KINDS = frozenset({PairwiseKind.PL, PairwiseKind.PSM, PairwiseKind.PBH})


@dataclass(frozen=True)
class PairwiseLossSpec:
    """Loss kind plus margin ``c`` and scale ``s``; a kind ignores the one it does not use."""

    kind: PairwiseKind
    margin: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", PairwiseKind(self.kind))
        if self.kind in MARGIN_KINDS and not self.margin > 0:
            raise ValueError(f"{self.kind.value} needs margin > 0, got {self.margin}")
        if self.kind in SCALE_KINDS and not self.scale > 0:
            raise ValueError(f"{self.kind.value} needs scale > 0, got {self.scale}")

    @property
    def family(self) -> str:
        return "pairwise"


def pbh_branches(spec: PairwiseLossSpec, t):
    """The three linear pieces of the barrier hinge, stacked on a new leading axis."""
    c, s = spec.margin, spec.scale
    t = np.asarray(t, dtype=np.float64)
    return np.stack([-s * (c + t) + c, s * (t - c), c - t])


def pair_loss(spec: PairwiseLossSpec, t):
    t = np.asarray(t, dtype=np.float64)
    c, s = spec.margin, spec.scale
    kind = spec.kind
    if kind is PairwiseKind.PSQ:
        out = (c - t) ** 2
    elif kind is PairwiseKind.PSH:
        out = np.maximum(c - t, 0.0) ** 2
    elif kind is PairwiseKind.PH:
        out = np.maximum(c - t, 0.0)
    elif kind is PairwiseKind.PL:
        out = np.logaddexp(0.0, -s * t)
    elif kind is PairwiseKind.PSM:
        out = expit(-s * t)
    else:
        out = pbh_branches(spec, t).max(axis=0)
    return out if out.ndim else float(out)


def pair_loss_grad(spec: PairwiseLossSpec, t):
    """Derivative of ``pair_loss`` in ``t``.

    Hinge kinks take the flat side (0 at ``t == c``); barrier-hinge ties take the
    first branch in the order (-s(c+t)+c, s(t-c), c-t).
    """
    t = np.asarray(t, dtype=np.float64)
    c, s = spec.margin, spec.scale
    kind = spec.kind
    if kind is PairwiseKind.PSQ:
        out = -2.0 * (c - t)
    elif kind is PairwiseKind.PSH:
        out = -2.0 * np.maximum(c - t, 0.0)
    elif kind is PairwiseKind.PH:
        out = np.where(t < c, -1.0, 0.0)
    elif kind is PairwiseKind.PL:
        out = -s * expit(-s * t)
    elif kind is PairwiseKind.PSM:
        out = -s * expit(s * t) * expit(-s * t)
    else:
        active = pbh_branches(spec, t).argmax(axis=0)
        out = np.array([-s, s, -1.0])[active]
    return out if out.ndim else float(out)


def _gaps(pos_scores, neg_scores):
    pos = np.asarray(pos_scores, dtype=np.float64).ravel()
    neg = np.asarray(neg_scores, dtype=np.float64).ravel()
    if pos.size == 0 or neg.size == 0:
        raise EmptyClass("pairwise loss needs at least one positive and one negative score")
    return pos[:, None] - neg[None, :]


def batch_pairwise_loss(spec: PairwiseLossSpec, pos_scores, neg_scores) -> float:
    return float(np.mean(pair_loss(spec, _gaps(pos_scores, neg_scores))))


def batch_pairwise_score_grad(spec: PairwiseLossSpec, pos_scores, neg_scores):
    """Gradient of ``batch_pairwise_loss`` with respect to each positive and negative score."""
    t = _gaps(pos_scores, neg_scores)
    dl = pair_loss_grad(spec, t) / t.size
    return dl.sum(axis=1), -dl.sum(axis=0)
