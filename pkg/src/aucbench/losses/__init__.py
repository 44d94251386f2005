"""Pairwise and composite AUROC surrogate losses."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .composite import (
    BatchComponents,
    CompositeKind,
    CompositeLossSpec,
    batch_components,
    composite_grads,
    composite_objective,
    minmax_objective,
    minmax_score_grads,
    optimal_alpha,
    surrogate_grad,
    surrogate_value,
)
from .pairwise import (
    PairwiseKind,
    PairwiseLossSpec,
    batch_pairwise_loss,
    batch_pairwise_score_grad,
    pair_loss,
    pair_loss_grad,
)


@dataclass(frozen=True)
class PesgSpec:
    """Min-max margin objective solved by primal-dual updates (the comparator optimizer)."""

    margin: float = 1.0
    kind: str = "PESG"

    def __post_init__(self):
        if not self.margin > 0:
            raise ValueError(f"PESG needs margin > 0, got {self.margin}")

    @property
    def scale(self) -> float:
        return 1.0

    @property
    def family(self) -> str:
        return "pesg"


LossSpec = Union[PairwiseLossSpec, CompositeLossSpec, PesgSpec]

PAIRWISE_KINDS = tuple(k.value for k in PairwiseKind)
COMPOSITE_KINDS = tuple(k.value for k in CompositeKind)
ALL_KINDS = PAIRWISE_KINDS + COMPOSITE_KINDS + ("PESG",)

_MARGIN = {"PSQ", "PSH", "PH", "PBH", "CSQ", "CSH", "CH", "PESG"}
_SCALE = {"PL", "PSM", "PBH", "CL"}


def uses_margin(kind: str) -> bool:
    return kind in _MARGIN


def uses_scale(kind: str) -> bool:
    return kind in _SCALE


def make_loss(kind: str, margin: float = 1.0, scale: float = 1.0) -> LossSpec:
    kind = str(kind).upper()
    if kind in PAIRWISE_KINDS:
        return PairwiseLossSpec(PairwiseKind(kind), margin, scale)
    if kind in COMPOSITE_KINDS:
        return CompositeLossSpec(CompositeKind(kind), margin, scale)
    if kind == "PESG":
        return PesgSpec(margin)
    raise ValueError(f"unknown loss kind {kind!r}; expected one of {', '.join(ALL_KINDS)}")


def exact_objective_and_grads(spec, pos_scores, neg_scores, a=0.0, b=0.0):
    """Batch objective and its exact gradient for any of the ten losses.

    Returns ``(value, grad_pos, grad_neg, grad_a, grad_b)``; the (a, b) entries
    are 0 for pairwise losses. Composite outer derivatives use ``d = A - B``.
    """
    if isinstance(spec, PairwiseLossSpec):
        value = batch_pairwise_loss(spec, pos_scores, neg_scores)
        gp, gn = batch_pairwise_score_grad(spec, pos_scores, neg_scores)
        return value, gp, gn, 0.0, 0.0
    if isinstance(spec, CompositeLossSpec):
        comp = batch_components(pos_scores, neg_scores, a, b)
        value = comp.h_plus + comp.h_minus + surrogate_value(spec, comp.gap)
        return (value, *composite_grads(spec, pos_scores, neg_scores, a, b, comp.gap))
    raise TypeError(f"no exact objective for {type(spec).__name__}")


__all__ = [
    "ALL_KINDS",
    "BatchComponents",
    "COMPOSITE_KINDS",
    "CompositeKind",
    "CompositeLossSpec",
    "LossSpec",
    "PAIRWISE_KINDS",
    "PairwiseKind",
    "PairwiseLossSpec",
    "PesgSpec",
    "batch_components",
    "batch_pairwise_loss",
    "batch_pairwise_score_grad",
    "composite_grads",
    "composite_objective",
    "exact_objective_and_grads",
    "make_loss",
    "minmax_objective",
    "minmax_score_grads",
    "optimal_alpha",
    "pair_loss",
    "pair_loss_grad",
    "surrogate_grad",
    "surrogate_value",
    "uses_margin",
    "uses_scale",
]
