"""Datasets with +1/-1 labels, splitting, and class-aware mini-batch sampling."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np

from .errors import (
    BadParams,
    DataIOError,
    EmptyClass,
    ParseError,
    SingleClass,
    TargetTooHigh,
    TooFewSamples,
)

__all__ = [
    "ORIGIN",
    "Dataset",
    "SamplerConfig",
    "BatchSampler",
    "load_csv",
    "make_imbalanced",
    "synth_gaussian",
    "kfold_split",
    "holdout_split",
    "sample_batch",
    "spr_quota",
]

ORIGIN = "origin"


@dataclass(frozen=True, eq=False)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    name: str = "dataset"

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y)
        if X.ndim != 2:
            raise BadParams(f"X must be 2-d, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise BadParams(f"{X.shape[0]} rows but labels of shape {y.shape}")
        if not np.all((y == 1) | (y == -1)):
            raise BadParams("labels must be +1 or -1")
        y = y.astype(np.int64)
        if not (np.any(y == 1) and np.any(y == -1)):
            raise SingleClass(f"{self.name}: both classes must be present")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    def __len__(self) -> int:
        return self.y.size

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def pos_indices(self) -> np.ndarray:
        return np.flatnonzero(self.y == 1)

    @property
    def neg_indices(self) -> np.ndarray:
        return np.flatnonzero(self.y == -1)

    @property
    def n_pos(self) -> int:
        return int(np.count_nonzero(self.y == 1))

    @property
    def n_neg(self) -> int:
        return len(self) - self.n_pos

    @property
    def positive_ratio(self) -> float:
        return self.n_pos / len(self)

    def subset(self, indices, name=None) -> "Dataset":
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(self.X[indices], self.y[indices], name or self.name)


def _parse_label(text: str):
    value = float(text)
    if value in (1.0, -1.0, 0.0):
        return int(value)
    raise ValueError(f"label {text!r} is not one of +1, -1, 0, 1")


def load_csv(path, label_column: str = "label", name=None) -> Dataset:
    """Read a header-first, comma-separated UTF-8 file.

    Labels may be encoded as {+1, -1} or {1, 0}; every other column is a
    numeric feature, kept in file order.
    """
    path = Path(path)
    try:
        handle = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise DataIOError(f"cannot open {path}: {exc}") from exc
    with handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(1, None, "file is empty") from None
        header = [h.strip() for h in header]
        if label_column not in header:
            raise ParseError(1, label_column, "label column missing from header")
        label_at = header.index(label_column)
        feature_cols = [i for i in range(len(header)) if i != label_at]
        rows, labels = [], []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(line_no, None, f"expected {len(header)} cells, found {len(row)}")
            try:
                labels.append(_parse_label(row[label_at].strip()))
            except ValueError as exc:
                raise ParseError(line_no, label_column, str(exc)) from None
            values = []
            for i in feature_cols:
                cell = row[i].strip()
                try:
                    value = float(cell)
                except ValueError:
                    raise ParseError(line_no, header[i], f"non-numeric cell {cell!r}") from None
                if not math.isfinite(value):
                    raise ParseError(line_no, header[i], f"non-finite cell {cell!r}")
                values.append(value)
            rows.append(values)
    if not rows:
        raise SingleClass(f"{path}: no data rows")
    raw = np.asarray(labels)
    encodings = set(raw.tolist())
    if {0, -1} <= encodings:
        raise ParseError(1, label_column, "labels mix the {1,0} and {+1,-1} encodings")
    y = np.where(raw == 1, 1, -1)
    if np.all(y == y[0]):
        raise SingleClass(f"{path}: all labels are {int(y[0]):+d}")
    X = np.asarray(rows, dtype=np.float64).reshape(len(rows), len(feature_cols))
    return Dataset(X, y, name or path.stem)


def make_imbalanced(ds: Dataset, target_pr: float, seed) -> Dataset:
    """Drop positives uniformly at random until the positive ratio is ``target_pr``.

    All negatives are kept; the positive count is rounded to the nearest
    integer (at least one).
    """
    if not 0 < target_pr < ds.positive_ratio:
        raise TargetTooHigh(f"target ratio {target_pr} must be in (0, {ds.positive_ratio})")
    keep = max(1, int(round(target_pr * ds.n_neg / (1.0 - target_pr))))
    keep = min(keep, ds.n_pos)
    rng = np.random.default_rng(seed)
    kept_pos = np.sort(rng.choice(ds.pos_indices, size=keep, replace=False))
    indices = np.sort(np.concatenate([kept_pos, ds.neg_indices]))
    return ds.subset(indices, name=f"{ds.name}-pr{target_pr:g}")


def synth_gaussian(n: int, dim: int, pr: float, separation: float, seed, name=None) -> Dataset:
    """Two unit-covariance Gaussian blobs at ``+separation * e1`` and ``-separation * e1``."""
    if n < 4 or dim < 1 or not 0 < pr < 1:
        raise BadParams(f"need n >= 4, dim >= 1, 0 < pr < 1; got n={n}, dim={dim}, pr={pr}")
    n_pos = min(max(int(round(n * pr)), 1), n - 1)
    n_neg = n - n_pos
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, dim))
    X[:n_pos, 0] += separation
    X[n_pos:, 0] -= separation
    y = np.concatenate([np.ones(n_pos, dtype=np.int64), -np.ones(n_neg, dtype=np.int64)])
    order = rng.permutation(n)
    return Dataset(X[order], y[order], name or f"synth-n{n}-d{dim}-pr{pr:g}-sep{separation:g}")


def _stratified_assign(ds: Dataset, k: int, seed) -> np.ndarray:
    """Fold id per row; every class is spread over folds as evenly as possible."""
    rng = np.random.default_rng(seed)
    fold_of = np.empty(len(ds), dtype=np.int64)
    offset = 0
    for members in (ds.pos_indices, ds.neg_indices):
        shuffled = rng.permutation(members)
        # Rotate the starting fold so remainders do not all pile onto fold 0.
        fold_of[shuffled] = (np.arange(shuffled.size) + offset) % k
        offset += shuffled.size
    return fold_of


def kfold_split(ds: Dataset, k: int, seed) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Stratified k-fold split as a list of (train_indices, val_indices)."""
    if k < 2:
        raise TooFewSamples(f"k must be >= 2, got {k}")
    if ds.n_pos < k or ds.n_neg < k:
        raise TooFewSamples(f"each class needs >= {k} members; have {ds.n_pos} pos, {ds.n_neg} neg")
    fold_of = _stratified_assign(ds, k, seed)
    return [(np.flatnonzero(fold_of != f), np.flatnonzero(fold_of == f)) for f in range(k)]


def holdout_split(ds: Dataset, test_fraction: float, seed) -> Tuple[np.ndarray, np.ndarray]:
    """Stratified (train_indices, test_indices) with ``test_fraction`` of each class held out."""
    if not 0 < test_fraction < 1:
        raise BadParams(f"test_fraction must be in (0, 1), got {test_fraction}")
    rng = np.random.default_rng(seed)
    train, test = [], []
    for members in (ds.pos_indices, ds.neg_indices):
        shuffled = rng.permutation(members)
        n_test = int(round(test_fraction * shuffled.size))
        n_test = min(max(n_test, 1), shuffled.size - 1)
        if n_test < 1:
            raise TooFewSamples("each class needs >= 2 members for a holdout split")
        test.append(shuffled[:n_test])
        train.append(shuffled[n_test:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


@dataclass(frozen=True)
class SamplerConfig:
    """Mini-batch size and sampling positive rate (``"origin"`` = plain random sampling)."""

    batch_size: int = 64
    spr: Union[str, float] = ORIGIN
    seed: int = 0

    def __post_init__(self):
        if int(self.batch_size) != self.batch_size or self.batch_size < 2:
            raise BadParams(f"batch_size must be an integer >= 2, got {self.batch_size}")
        object.__setattr__(self, "batch_size", int(self.batch_size))
        if isinstance(self.spr, str):
            if self.spr.lower() != ORIGIN:
                raise BadParams(f"spr must be 'origin' or a rate in (0, 1), got {self.spr!r}")
            object.__setattr__(self, "spr", ORIGIN)
        elif not 0 < float(self.spr) < 1:
            raise BadParams(f"spr must lie in (0, 1), got {self.spr}")
        else:
            object.__setattr__(self, "spr", float(self.spr))

    @property
    def is_origin(self) -> bool:
        return self.spr == ORIGIN


def spr_quota(spr: float, batch_size: int) -> int:
    """Positives per batch: nearest integer to ``spr * batch_size``, clamped to [1, batch_size - 1]."""
    n_pos = int(math.floor(spr * batch_size + 0.5))
    return min(max(n_pos, 1), batch_size - 1)


def _draw(rng, pool, count):
    return rng.choice(pool, size=count, replace=pool.size < count)


def sample_batch(ds: Dataset, cfg: SamplerConfig, rng: np.random.Generator, pool=None):
    """Draw one mini-batch and return (pos_indices, neg_indices) into ``ds``.

    ``pool`` restricts sampling to a subset of rows (e.g. a training fold).
    With an explicit SPR the class counts are fixed by ``spr_quota``. With
    ``origin`` sampling the batch is drawn uniformly; a batch missing a class
    is redrawn once and then repaired by swapping one row for a random member
    of the missing class.
    """
    pool = np.arange(len(ds)) if pool is None else np.asarray(pool, dtype=np.int64)
    labels = ds.y[pool]
    pos_pool, neg_pool = pool[labels == 1], pool[labels == -1]
    if pos_pool.size == 0 or neg_pool.size == 0:
        raise EmptyClass("sampling pool lacks one class")
    B = cfg.batch_size
    if not cfg.is_origin:
        n_pos = spr_quota(cfg.spr, B)
        return _draw(rng, pos_pool, n_pos), _draw(rng, neg_pool, B - n_pos)

    for _ in range(2):
        batch = _draw(rng, pool, B)
        is_pos = ds.y[batch] == 1
        if 0 < is_pos.sum() < B:
            return batch[is_pos], batch[~is_pos]
    missing_pos = not is_pos.any()
    slot = rng.integers(B)
    batch[slot] = rng.choice(pos_pool if missing_pos else neg_pool)
    is_pos = ds.y[batch] == 1
    return batch[is_pos], batch[~is_pos]


class BatchSampler:
    """Owns a private generator so batch sequences are reproducible per seed."""

    def __init__(self, ds: Dataset, cfg: SamplerConfig, pool=None, rng=None):
        self.ds = ds
        self.cfg = cfg
        self.pool = None if pool is None else np.asarray(pool, dtype=np.int64)
        self.rng = rng if rng is not None else np.random.default_rng(cfg.seed)

    def __call__(self):
        return sample_batch(self.ds, self.cfg, self.rng, self.pool)

    def iterations_per_epoch(self) -> int:
        n = len(self.ds) if self.pool is None else self.pool.size
        return math.ceil(n / self.cfg.batch_size)
