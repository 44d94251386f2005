"""Hyperparameter sweeps, validation-based selection and mean(std) tables."""
from __future__ import annotations

import csv
import io
import itertools
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..data import Dataset
from ..errors import DataIOError, EmptyResults
from ..losses import uses_margin, uses_scale
from .config import DEFAULT_SCALE_GRID, ExperimentConfig, default_margin_grid
from .trial import TrialResult, prepare_data, run_trial

__all__ = [
    "HyperPoint",
    "Selection",
    "SweepCell",
    "SweepTable",
    "hyper_grid",
    "select_by_validation",
    "run_sweep",
    "emit_results",
    "format_cell",
]


@dataclass(frozen=True, order=True)
class HyperPoint:
    """Loss/optimizer hyperparameters; the field order is the tie-break order."""

    margin: float
    scale: float
    lr: float

    def label(self) -> str:
        return f"margin={self.margin:g},scale={self.scale:g},lr={self.lr:g}"


@dataclass(frozen=True)
class Selection:
    hyper: HyperPoint
    epoch: int
    val_auroc: float
    trials: Tuple[TrialResult, ...]


def hyper_grid(config: ExperimentConfig, kind: str) -> List[HyperPoint]:
    grids = config.grids
    margins = grids.margin or default_margin_grid(config.model.head_norm)
    scales = grids.scale or DEFAULT_SCALE_GRID
    lrs = grids.lr or (config.optimizer.base_lr,)
    if not uses_margin(kind):
        margins = (config.loss.margin,)
    if not uses_scale(kind):
        scales = (config.loss.scale,)
    return sorted(HyperPoint(m, s, lr) for m, s, lr in itertools.product(margins, scales, lrs))


def select_by_validation(groups: Mapping[HyperPoint, Sequence[TrialResult]]) -> Selection:
    """Pick the hyperparameters and stopping epoch with the best mean validation AUROC.

    Each group's validation curves are averaged over its non-diverged trials;
    the group's score is the maximum of that mean curve. Ties go to the
    smaller margin, then smaller scale, then lower learning rate.
    """
    best = None
    for hyper in sorted(groups):
        trials = [t for t in groups[hyper] if not t.diverged]
        if not trials:
            continue
        curve = np.mean([t.val_auroc for t in trials], axis=0)
        epoch = int(np.argmax(curve))
        score = float(curve[epoch])
        if best is None or score > best.val_auroc:
            best = Selection(hyper, epoch, score, tuple(trials))
    if best is None:
        raise EmptyResults("no completed trials to select from")
    return best


@dataclass(frozen=True)
class SweepCell:
    loss: str
    setting: str
    mean: Optional[float]
    std: Optional[float]
    n: int
    failures: int
    hyper: Optional[HyperPoint] = None
    epoch: Optional[int] = None
    val_auroc: Optional[float] = None

    @property
    def display(self) -> str:
        if self.mean is None:
            return "NA"
        return format_cell(self.mean, self.std)


def format_cell(mean: float, std: float) -> str:
    return f"{mean:.3f}({std:.3f})"


@dataclass
class SweepTable:
    cells: List[SweepCell] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.cells)

    def cell(self, loss: str, setting: str) -> SweepCell:
        for c in self.cells:
            if c.loss == loss and c.setting == setting:
                return c
        raise KeyError((loss, setting))

    @property
    def total_trials(self) -> int:
        return sum(c.n + c.failures for c in self.cells)

    @property
    def total_failures(self) -> int:
        return sum(c.failures for c in self.cells)


def aggregate(loss: str, setting: str, groups: Mapping[HyperPoint, Sequence[TrialResult]]) -> SweepCell:
    failures = sum(t.diverged for trials in groups.values() for t in trials)
    try:
        sel = select_by_validation(groups)
    except EmptyResults:
        return SweepCell(loss, setting, None, None, 0, failures)
    tests = np.array([t.test_auroc[sel.epoch] for t in sel.trials])
    # Population std: a single trial gives 0, not NaN.
    return SweepCell(loss, setting, float(tests.mean()), float(tests.std()), tests.size, failures,
                     sel.hyper, sel.epoch, sel.val_auroc)


def _trial_task(args):
    config, trainval, test, fold, seed = args
    return run_trial(config, trainval, fold, seed, test=test, prepared=True)


def _run_groups(config: ExperimentConfig, kind: str, trainval, test, jobs: int) -> Dict[HyperPoint, List[TrialResult]]:
    tasks, keys = [], []
    for hyper in hyper_grid(config, kind):
        cfg = config.with_override("loss", type(config.loss)(kind, hyper.margin, hyper.scale))
        cfg = cfg.with_override("optimizer.base_lr", hyper.lr)
        for fold in range(config.cv_folds):
            for seed in config.seeds:
                tasks.append((cfg, trainval, test, fold, seed))
                keys.append(hyper)
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_trial_task, tasks))
    else:
        results = [_trial_task(t) for t in tasks]
    groups: Dict[HyperPoint, List[TrialResult]] = {}
    for key, res in zip(keys, results):
        groups.setdefault(key, []).append(res)
    return groups


def _setting_label(overrides: Sequence[Tuple[str, object]]) -> str:
    if not overrides:
        return "base"
    return ";".join(f"{name}={value}" for name, value in overrides)


def _apply(config: ExperimentConfig, overrides) -> ExperimentConfig:
    for name, value in overrides:
        config = config.with_override(name, value)
    return config


def run_sweep(config: ExperimentConfig, dataset: Dataset, test: Optional[Dataset] = None, jobs: int = 1) -> SweepTable:
    """Run every (loss, setting, hyperparameter, fold, seed) trial and tabulate.

    ``grid`` mode crosses all sweep axes. ``sequential`` mode varies one axis
    at a time in the configured order, pinning each finished axis to its best
    value by validation AUROC (per loss) before moving to the next.
    """
    trainval, test = prepare_data(config, dataset, test)
    axes = config.sweep.axes
    table = SweepTable()
    for kind in config.loss_kinds:
        if config.sweep.mode == "grid" or not axes:
            combos = itertools.product(*[[(a.name, v) for v in a.values] for a in axes])
            for overrides in combos:
                cfg = _apply(config, overrides)
                groups = _run_groups(cfg, kind, trainval, test, jobs)
                table.cells.append(aggregate(kind, _setting_label(overrides), groups))
            continue
        pinned: List[Tuple[str, object]] = []
        for axis in axes:
            best_value, best_val = axis.values[0], -np.inf
            for value in axis.values:
                overrides = pinned + [(axis.name, value)]
                groups = _run_groups(_apply(config, overrides), kind, trainval, test, jobs)
                cell = aggregate(kind, _setting_label([(axis.name, value)]), groups)
                table.cells.append(cell)
                if cell.val_auroc is not None and cell.val_auroc > best_val:
                    best_value, best_val = value, cell.val_auroc
            pinned.append((axis.name, best_value))
    return table


CSV_HEADER = ["loss", "setting", "mean", "std", "n", "failures", "display",
              "margin", "scale", "lr", "epoch", "val_auroc"]


def _num(x) -> str:
    return "" if x is None else f"{x:.6f}"


def _table_rows(table: SweepTable):
    for c in table.cells:
        h = c.hyper
        yield c, {
            "mean": _num(c.mean),
            "std": _num(c.std),
            "margin": _num(h.margin) if h else "",
            "scale": _num(h.scale) if h else "",
            "lr": f"{h.lr:.6g}" if h else "",
            "epoch": "" if c.epoch is None else str(c.epoch),
            "val_auroc": _num(c.val_auroc),
        }


def render_csv(table: SweepTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for c, f in _table_rows(table):
        writer.writerow([c.loss, c.setting, f["mean"], f["std"], c.n, c.failures, c.display,
                         f["margin"], f["scale"], f["lr"], f["epoch"], f["val_auroc"]])
    return buf.getvalue()


def render_json(table: SweepTable) -> str:
    nested: Dict[str, Dict[str, dict]] = {}
    for c, f in _table_rows(table):
        nested.setdefault(c.loss, {})[c.setting] = {
            "mean": None if c.mean is None else round(c.mean, 6),
            "std": None if c.std is None else round(c.std, 6),
            "n": c.n,
            "failures": c.failures,
            "display": c.display,
            "selected": None if c.hyper is None else {
                "margin": c.hyper.margin,
                "scale": c.hyper.scale,
                "lr": c.hyper.lr,
                "epoch": c.epoch,
                "val_auroc": round(c.val_auroc, 6),
            },
        }
    return json.dumps(nested, indent=2) + "\n"


def emit_results(table: SweepTable, path, format: str = "csv") -> None:
    """Write the table as CSV or nested JSON; identical tables give identical bytes."""
    if format == "csv":
        text = render_csv(table)
    elif format == "json":
        text = render_json(table)
    else:
        raise ValueError(f"format must be 'csv' or 'json', got {format!r}")
    try:
        Path(path).write_bytes(text.encode("utf-8"))
    except OSError as exc:
        raise DataIOError(f"cannot write {path}: {exc}") from exc
