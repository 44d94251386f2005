"""Experiment wiring: configs, trials, sweeps, timing and the CLI."""
from .config import ExperimentConfig, load_config, resolve_dataset
from .sweep import HyperPoint, SweepTable, emit_results, run_sweep, select_by_validation
from .timing import time_iterations
from .trial import Learner, TrialResult, prepare_data, run_trial, train_trial

__all__ = [
    "ExperimentConfig",
    "HyperPoint",
    "Learner",
    "SweepTable",
    "TrialResult",
    "emit_results",
    "load_config",
    "prepare_data",
    "resolve_dataset",
    "run_sweep",
    "run_trial",
    "select_by_validation",
    "time_iterations",
    "train_trial",
]
