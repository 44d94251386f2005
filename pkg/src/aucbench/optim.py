"""Update rules for AUROC training.

All three styles (SGD, Momentum, Adam) share one direction rule; the
composite-loss optimizers add a moving-average estimate ``d`` of the class
mean-score gap, and PESG performs projected primal-dual steps on the min-max
objective. Parameters are flat float64 vectors.

Averaging conventions follow the printed algorithms: ``v <- (1-beta) v + beta g``
(so ``beta=0.1`` is classical momentum 0.9), no Adam bias correction.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import EmptyClass, EmptyStage, ShapeMismatch
from .losses.composite import minmax_score_grads

__all__ = [
    "OptimizerStyle",
    "OptimizerConfig",
    "OptimizerState",
    "schedule_lr",
    "apply_regularizers",
    "direction",
    "sgd_update",
    "update_d",
    "pesg_step",
    "accumulate_stage",
    "end_stage",
]


class OptimizerStyle(str, enum.Enum):
    SGD = "SGD"
    MOMENTUM = "Momentum"
    ADAM = "Adam"

    @classmethod
    def parse(cls, value) -> "OptimizerStyle":
        if isinstance(value, cls):
            return value
        for member in cls:
            if member.value.lower() == str(value).lower():
                return member
        raise ValueError(f"unknown optimizer style {value!r}")


@dataclass(frozen=True)
class OptimizerConfig:
    style: OptimizerStyle = OptimizerStyle.MOMENTUM
    base_lr: float = 0.1
    momentum_beta: float = 0.1
    adam_beta: float = 0.001
    adam_floor: float = 1e-8
    composite_d_beta: float = 0.9
    weight_decay: float = 0.0
    cer_gamma: float = 0.0
    lr_drop_epochs: Sequence[int] = (30, 40)
    lr_drop_factor: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "style", OptimizerStyle.parse(self.style))
        object.__setattr__(self, "lr_drop_epochs", tuple(int(e) for e in self.lr_drop_epochs))
        if not self.base_lr > 0:
            raise ValueError("base_lr must be positive")
        if not 0 < self.momentum_beta <= 1:
            raise ValueError("momentum_beta must lie in (0, 1]")
        if not 0 < self.adam_beta < 1:
            raise ValueError("adam_beta must lie in (0, 1)")
        if not self.adam_floor > 0:
            raise ValueError("adam_floor must be positive")
        if not 0 < self.composite_d_beta <= 1:
            raise ValueError("composite_d_beta must lie in (0, 1]")
        if self.weight_decay < 0 or self.cer_gamma < 0:
            raise ValueError("weight_decay and cer_gamma must be non-negative")
        if not self.lr_drop_factor > 0:
            raise ValueError("lr_drop_factor must be positive")
        drops = self.lr_drop_epochs
        if any(e < 0 for e in drops) or any(b <= a for a, b in zip(drops, drops[1:])):
            raise ValueError(f"lr_drop_epochs must be non-negative and strictly increasing, got {drops}")


@dataclass
class OptimizerState:
    """Mutable optimizer buffers. ``v``/``u`` are allocated on the first ``direction`` call."""

    v: Optional[np.ndarray] = None
    u: Optional[np.ndarray] = None
    d: float = 0.0
    alpha: float = 0.0
    step_count: int = 0
    stage_sum: Optional[np.ndarray] = None
    stage_len: int = 0
    w_bar_prev: Optional[np.ndarray] = None
    stages_closed: int = field(default=0)

    @classmethod
    def for_params(cls, w) -> "OptimizerState":
        """Fresh state whose previous-stage average is the initial parameters."""
        w = np.asarray(w, dtype=np.float64)
        return cls(stage_sum=np.zeros_like(w), w_bar_prev=w.copy())


def schedule_lr(config: OptimizerConfig, epoch: int) -> float:
    """Staged schedule: divide by ``lr_drop_factor`` once per drop epoch reached."""
    if epoch < 0:
        raise ValueError("epoch must be non-negative")
    drops = sum(1 for e in config.lr_drop_epochs if epoch >= e)
    return config.base_lr / config.lr_drop_factor**drops


def _check_shapes(*arrays):
    shape = arrays[0].shape
    for arr in arrays[1:]:
        if arr.shape != shape:
            raise ShapeMismatch(f"shape {arr.shape} does not match {shape}")


def apply_regularizers(grad, w, w_bar_prev, weight_decay: float, cer_gamma: float):
    """Add the gradients of ``wd/2 |w|^2`` and ``gamma |w - w_bar_prev|^2``."""
    grad = np.asarray(grad, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    w_bar_prev = np.asarray(w_bar_prev, dtype=np.float64)
    _check_shapes(grad, w, w_bar_prev)
    out = grad.copy()
    if weight_decay:
        out += weight_decay * w
    if cer_gamma:
        out += 2.0 * cer_gamma * (w - w_bar_prev)
    return out


def direction(state: OptimizerState, config: OptimizerConfig, grad):
    """Turn a stochastic gradient into an update direction, mutating ``state``."""
    grad = np.asarray(grad, dtype=np.float64)
    state.step_count += 1
    if config.style is OptimizerStyle.SGD:
        return grad
    if state.v is None:
        state.v = np.zeros_like(grad)
    _check_shapes(state.v, grad)
    beta = config.momentum_beta
    state.v = (1.0 - beta) * state.v + beta * grad
    if config.style is OptimizerStyle.MOMENTUM:
        return state.v
    if state.u is None:
        state.u = np.zeros_like(grad)
    beta2 = config.adam_beta
    state.u = (1.0 - beta2) * state.u + beta2 * grad * grad
    return state.v / np.sqrt(state.u + config.adam_floor)


def sgd_update(params, g, lr: float):
    params = np.asarray(params, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    _check_shapes(params, g)
    return params - lr * g


def update_d(state: OptimizerState, a_mean: float, b_mean: float, beta0: float) -> float:
    """Moving-average estimate of the class mean-score gap ``A - B``."""
    if not 0 < beta0 <= 1:
        raise ValueError("beta0 must lie in (0, 1]")
    state.d = (1.0 - beta0) * state.d + beta0 * (a_mean - b_mean)
    return state.d


def pesg_step(
    state: OptimizerState,
    config: OptimizerConfig,
    w,
    pos_scores,
    neg_scores,
    backprop: Callable[[np.ndarray, np.ndarray], np.ndarray],
    a: float,
    b: float,
    margin: float,
    lr: float,
):
    """One primal-dual step on the min-max margin objective.

    Descent on ``(w, a, b)`` with ``alpha`` held fixed, then projected ascent
    ``alpha <- max(0, alpha + lr * (c + B - A - alpha))``. ``backprop`` maps
    (positive score grads, negative score grads) to a gradient in ``w``.
    Weight decay and CER act on ``w`` only. Returns ``(w, a, b, alpha)``.
    """
    pos = np.asarray(pos_scores, dtype=np.float64).ravel()
    neg = np.asarray(neg_scores, dtype=np.float64).ravel()
    if pos.size == 0 or neg.size == 0:
        raise EmptyClass("PESG step needs both classes in the batch")
    alpha = state.alpha
    grad_pos, grad_neg, grad_a, grad_b = minmax_score_grads(pos, neg, a, b, alpha)
    grad_w = backprop(grad_pos, grad_neg)
    w_bar_prev = state.w_bar_prev if state.w_bar_prev is not None else w
    grad_w = apply_regularizers(grad_w, w, w_bar_prev, config.weight_decay, config.cer_gamma)
    state.step_count += 1

    gap_term = margin + neg.mean() - pos.mean()
    new_w = sgd_update(w, grad_w, lr)
    new_a = a - lr * grad_a
    new_b = b - lr * grad_b
    state.alpha = max(alpha + lr * (gap_term - alpha), 0.0)
    return new_w, new_a, new_b, state.alpha


def accumulate_stage(state: OptimizerState, w) -> None:
    w = np.asarray(w, dtype=np.float64)
    if state.stage_sum is None:
        state.stage_sum = np.zeros_like(w)
    state.stage_sum += w
    state.stage_len += 1


def end_stage(state: OptimizerState) -> OptimizerState:
    """Close a constant-lr stage: its uniform iterate average becomes ``w_bar_prev``."""
    if state.stage_len == 0:
        raise EmptyStage("no iterates accumulated in the current stage")
    state.w_bar_prev = state.stage_sum / state.stage_len
    state.stage_sum = np.zeros_like(state.stage_sum)
    state.stage_len = 0
    state.stages_closed += 1
    return state
