"""Single training runs: sampler -> model -> loss -> optimizer -> AUROC."""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from ..data import BatchSampler, Dataset, SamplerConfig, holdout_split, kfold_split, make_imbalanced
from ..errors import ConfigError, DegenerateBatch, DivergedLoss, NonFiniteScore
from ..losses import (
    CompositeLossSpec,
    PairwiseLossSpec,
    PesgSpec,
    batch_components,
    batch_pairwise_loss,
    batch_pairwise_score_grad,
    composite_grads,
    minmax_objective,
    surrogate_value,
)
from ..metrics import auroc
from ..model import Mlp
from ..optim import (
    OptimizerConfig,
    OptimizerState,
    accumulate_stage,
    apply_regularizers,
    direction,
    end_stage,
    pesg_step,
    schedule_lr,
    sgd_update,
    update_d,
)
from .config import ExperimentConfig, resolve_dataset

__all__ = ["Learner", "TrialResult", "prepare_data", "run_trial", "train_trial"]


class Learner:
    """Model, auxiliary variables and optimizer state for one training run.

    Composite losses and PESG carry two extra scalars ``(a, b)``, the class
    score centers; the direction rule treats them as two more coordinates
    while weight decay and CER act on the network weights only.
    """

    def __init__(self, model: Mlp, loss, config: OptimizerConfig):
        self.model = model
        self.loss = loss
        self.config = config
        self.ab = np.zeros(2)
        self.state = OptimizerState.for_params(model.params)

    def step(self, X_pos, X_neg, lr: float) -> float:
        """One stochastic update on a (positives, negatives) batch; returns the batch objective."""
        n_pos = len(X_pos)
        scores, cache = self.model.forward(np.vstack([X_pos, X_neg]), "train")
        pos, neg = scores[:n_pos], scores[n_pos:]
        w = self.model.params
        a, b = self.ab
        cfg, state = self.config, self.state

        if isinstance(self.loss, PesgSpec):
            value = minmax_objective(pos, neg, a, b, state.alpha, self.loss.margin)

            def backprop(grad_pos, grad_neg):
                return self.model.backward(cache, np.concatenate([grad_pos, grad_neg]))

            w, a, b, _ = pesg_step(state, cfg, w, pos, neg, backprop, a, b, self.loss.margin, lr)
            self.model.params = w
            self.ab = np.array([a, b])
        elif isinstance(self.loss, PairwiseLossSpec):
            value = batch_pairwise_loss(self.loss, pos, neg)
            grad_pos, grad_neg = batch_pairwise_score_grad(self.loss, pos, neg)
            grad = self.model.backward(cache, np.concatenate([grad_pos, grad_neg]))
            grad = apply_regularizers(grad, w, state.w_bar_prev, cfg.weight_decay, cfg.cer_gamma)
            self.model.params = sgd_update(w, direction(state, cfg, grad), lr)
        elif isinstance(self.loss, CompositeLossSpec):
            comp = batch_components(pos, neg, a, b)
            value = comp.h_plus + comp.h_minus + surrogate_value(self.loss, comp.gap)
            update_d(state, comp.a_mean, comp.b_mean, cfg.composite_d_beta)
            grad_pos, grad_neg, grad_a, grad_b = composite_grads(self.loss, pos, neg, a, b, state.d)
            grad = self.model.backward(cache, np.concatenate([grad_pos, grad_neg]))
            grad = apply_regularizers(grad, w, state.w_bar_prev, cfg.weight_decay, cfg.cer_gamma)
            full = np.concatenate([grad, [grad_a, grad_b]])
            theta = sgd_update(np.concatenate([w, self.ab]), direction(state, cfg, full), lr)
            self.model.params = theta[:-2]
            self.ab = theta[-2:]
        else:
            raise TypeError(f"unsupported loss spec {self.loss!r}")
        accumulate_stage(state, self.model.params)
        return value

    def finite(self) -> bool:
        return bool(np.all(np.isfinite(self.model.params)) and np.all(np.isfinite(self.ab)))


@dataclass
class TrialResult:
    loss: str
    margin: float
    scale: float
    lr: float
    fold: int
    seed: int
    train_loss: List[float] = field(default_factory=list)
    train_auroc: List[float] = field(default_factory=list)
    val_auroc: List[float] = field(default_factory=list)
    test_auroc: List[float] = field(default_factory=list)
    diverged: bool = False
    failure: str = ""
    stages_closed: int = 0
    # Wall clock, so excluded from anything that must be reproducible.
    ms_per_40_iterations: float = 0.0

    @property
    def best_epoch(self) -> int:
        if not self.val_auroc:
            raise ValueError("trial recorded no epochs")
        return int(np.argmax(self.val_auroc))

    @property
    def best_val_auroc(self) -> float:
        return self.val_auroc[self.best_epoch]

    @property
    def test_at_best(self) -> float:
        return self.test_auroc[self.best_epoch]

    @property
    def final_test_auroc(self) -> float:
        return self.test_auroc[-1]

    def to_dict(self, include_timing: bool = True) -> dict:
        out = asdict(self)
        if not include_timing:
            out.pop("ms_per_40_iterations")
        if self.val_auroc and not self.diverged:
            out["best_epoch"] = self.best_epoch
        return out


def prepare_data(config: ExperimentConfig, dataset: Dataset, test: Optional[Dataset] = None) -> Tuple[Dataset, Dataset]:
    """Split off the test set (unless given) and apply the training imbalance, if any."""
    dcfg = config.dataset
    if test is None and dcfg.test_source:
        test = resolve_dataset(dcfg.test_source, dcfg.label_column)
    if test is None:
        train_idx, test_idx = holdout_split(dataset, dcfg.test_fraction, dcfg.split_seed)
        trainval = dataset.subset(train_idx, name=f"{dataset.name}-train")
        test = dataset.subset(test_idx, name=f"{dataset.name}-test")
    else:
        trainval = dataset
    if test.n_features != trainval.n_features:
        raise ConfigError(f"test set has {test.n_features} features, training set {trainval.n_features}")
    if dcfg.target_pr is not None:
        trainval = make_imbalanced(trainval, dcfg.target_pr, dcfg.split_seed)
    return trainval, test


def run_trial(
    config: ExperimentConfig,
    dataset: Dataset,
    fold: int,
    seed: int,
    test: Optional[Dataset] = None,
    raise_on_divergence: bool = False,
    prepared: bool = False,
) -> TrialResult:
    """Train on all CV folds but ``fold``, evaluating val/test AUROC after every epoch.

    A non-finite loss or parameter ends the trial early with ``diverged=True``
    (or raises ``DivergedLoss`` when ``raise_on_divergence`` is set). Set
    ``prepared`` when ``dataset``/``test`` already came from ``prepare_data``.
    """
    return train_trial(config, dataset, fold, seed, test, raise_on_divergence, prepared)[0]


def train_trial(
    config: ExperimentConfig,
    dataset: Dataset,
    fold: int,
    seed: int,
    test: Optional[Dataset] = None,
    raise_on_divergence: bool = False,
    prepared: bool = False,
) -> Tuple[TrialResult, Mlp]:
    """``run_trial`` that also hands back the network as it stood when training stopped."""
    if not 0 <= fold < config.cv_folds:
        raise ConfigError(f"fold {fold} outside 0..{config.cv_folds - 1}")
    if prepared:
        if test is None:
            raise ConfigError("prepared=True needs an explicit test set")
        trainval = dataset
    else:
        trainval, test = prepare_data(config, dataset, test)
    train_idx, val_idx = kfold_split(trainval, config.cv_folds, config.dataset.split_seed)[fold]

    loss = config.loss.spec()
    opt = config.optimizer
    init_seq, sample_seq = np.random.SeedSequence([seed, fold, config.sampler.seed]).spawn(2)
    model = Mlp.init(config.model.layer_dims(trainval.n_features), config.model.head_norm, seed=init_seq)
    learner = Learner(model, loss, opt)
    sampler_cfg: SamplerConfig = config.sampler
    sampler = BatchSampler(trainval, sampler_cfg, pool=train_idx, rng=np.random.default_rng(sample_seq))
    n_iter = sampler.iterations_per_epoch()

    kind = getattr(loss.kind, "value", loss.kind)
    result = TrialResult(kind, loss.margin, loss.scale, opt.base_lr, fold, seed)
    X, y = trainval.X, trainval.y
    drops = set(opt.lr_drop_epochs)
    train_seconds, iterations = 0.0, 0

    for epoch in range(config.epochs):
        if epoch in drops and epoch > 0:
            end_stage(learner.state)
        lr = schedule_lr(opt, epoch)
        total = 0.0
        tick = time.perf_counter()
        for it in range(n_iter):
            pos_idx, neg_idx = sampler()
            try:
                with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                    value = learner.step(X[pos_idx], X[neg_idx], lr)
            except DegenerateBatch as exc:
                return _fail(result, learner, DivergedLoss(epoch, it, str(exc)), raise_on_divergence)
            if not (np.isfinite(value) and learner.finite()):
                return _fail(result, learner, DivergedLoss(epoch, it), raise_on_divergence)
            total += value
        train_seconds += time.perf_counter() - tick
        iterations += n_iter
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                result.train_auroc.append(auroc(model.raw_scores(X[train_idx]), y[train_idx]))
                result.val_auroc.append(auroc(model.raw_scores(X[val_idx]), y[val_idx]))
                result.test_auroc.append(auroc(model.raw_scores(test.X), test.y))
        except NonFiniteScore as exc:
            return _fail(result, learner, DivergedLoss(epoch, n_iter, str(exc)), raise_on_divergence)
        result.train_loss.append(total / n_iter)

    result.stages_closed = learner.state.stages_closed
    result.ms_per_40_iterations = 1000.0 * 40.0 * train_seconds / max(iterations, 1)
    return result, model


def _fail(result: TrialResult, learner: Learner, exc: DivergedLoss, raise_it: bool):
    if raise_it:
        raise exc
    result.diverged = True
    result.failure = str(exc)
    result.stages_closed = learner.state.stages_closed
    # Keep the per-epoch lists aligned.
    n = min(len(result.val_auroc), len(result.test_auroc), len(result.train_auroc), len(result.train_loss))
    for name in ("train_loss", "train_auroc", "val_auroc", "test_auroc"):
        del getattr(result, name)[n:]
    return result, learner.model
