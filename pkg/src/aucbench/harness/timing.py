"""Wall-clock comparison of pairwise vs composite training iterations."""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from ..data import SamplerConfig, sample_batch, synth_gaussian
from ..losses import make_loss
from ..model import Mlp
from ..optim import OptimizerConfig
from .trial import Learner

__all__ = ["TimingRow", "time_iterations", "DEFAULT_PAIRS"]

DEFAULT_PAIRS: Tuple[Tuple[str, str], ...] = (("PSQ", "CSQ"), ("PSH", "CSH"))


@dataclass(frozen=True)
class TimingRow:
    loss: str
    ms: Tuple[float, ...]  # one entry per repeat

    @property
    def mean(self) -> float:
        return float(np.mean(self.ms))

    @property
    def std(self) -> float:
        return float(np.std(self.ms))

    @property
    def display(self) -> str:
        return f"{self.mean:.3f}({self.std:.3f})"


def time_iterations(
    pairs: Sequence[Tuple[str, str]] = DEFAULT_PAIRS,
    batch_size: int = 64,
    repeats: int = 20,
    iterations: int = 40,
    dim: int = 10,
    hidden: Sequence[int] = (32, 32),
    spr: float = 0.5,
    margin: float = 1.0,
    seed: int = 0,
) -> Dict[str, TimingRow]:
    """Milliseconds per ``iterations`` full training steps, ``repeats`` times per loss.

    Every loss sees the same pre-drawn batches and starts from the same
    initial network, so only the loss/gradient path differs. Losses are
    interleaved within each repeat to spread machine noise evenly.
    """
    data = synth_gaussian(4 * batch_size * 8, dim, 0.1, 1.0, seed)
    sampler = SamplerConfig(batch_size, spr, seed)
    rng = np.random.default_rng(seed)
    batches = []
    for _ in range(iterations):
        pos, neg = sample_batch(data, sampler, rng)
        batches.append((data.X[pos], data.X[neg]))
    base = Mlp.init([dim, *hidden, 1], "none", seed=seed)
    opt = OptimizerConfig(style="Momentum", base_lr=1e-3)
    kinds = [k for pair in pairs for k in pair]
    kinds = list(dict.fromkeys(kinds))

    def one_run(kind):
        learner = Learner(base.clone(), make_loss(kind, margin=margin), opt)
        tick = time.perf_counter()
        for X_pos, X_neg in batches:
            learner.step(X_pos, X_neg, 1e-3)
        return 1000.0 * (time.perf_counter() - tick)

    for kind in kinds:  # warm-up
        one_run(kind)
    times: Dict[str, List[float]] = {k: [] for k in kinds}
    for _ in range(repeats):
        for kind in kinds:
            times[kind].append(one_run(kind))
    return {k: TimingRow(k, tuple(v)) for k, v in times.items()}
