"""Experiment configuration, loaded from JSON.

Every field has a default, so ``{}`` is a valid (if small) config. See the
README for the schema.
"""
from __future__ import annotations

import dataclasses
import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from ..data import Dataset, SamplerConfig, load_csv, synth_gaussian
from ..errors import BadParams, ConfigError
from ..losses import ALL_KINDS, make_loss
from ..model import HeadNorm
from ..optim import OptimizerConfig

__all__ = [
    "DatasetConfig",
    "LossConfig",
    "ModelConfig",
    "GridConfig",
    "SweepAxis",
    "SweepConfig",
    "ExperimentConfig",
    "load_config",
    "resolve_dataset",
    "default_margin_grid",
    "DEFAULT_SCALE_GRID",
]

UNBOUNDED_MARGIN_GRID = (0.1, 1.0, 10.0)
BOUNDED_MARGIN_GRID = (0.1, 0.5, 1.0)
DEFAULT_SCALE_GRID = (0.1, 1.0, 10.0)


def default_margin_grid(head_norm) -> Tuple[float, ...]:
    """Margins to tune: smaller when the output head keeps scores within magnitude 1."""
    return BOUNDED_MARGIN_GRID if HeadNorm.parse(head_norm).bounded else UNBOUNDED_MARGIN_GRID


@dataclass(frozen=True)
class DatasetConfig:
    source: str = "synth:n=2000,dim=10,pr=0.1,sep=3,seed=0"
    label_column: str = "label"
    test_source: Optional[str] = None
    test_fraction: float = 0.2
    split_seed: int = 0
    # Subsample training positives down to this ratio after the test holdout.
    target_pr: Optional[float] = None


@dataclass(frozen=True)
class LossConfig:
    kind: str = "CSQ"
    margin: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        kind = str(self.kind).upper()
        if kind not in ALL_KINDS:
            raise ConfigError(f"unknown loss kind {self.kind!r}; expected one of {', '.join(ALL_KINDS)}")
        object.__setattr__(self, "kind", kind)

    def spec(self):
        return make_loss(self.kind, self.margin, self.scale)


@dataclass(frozen=True)
class ModelConfig:
    hidden: Tuple[int, ...] = (32, 32)
    head_norm: str = "none"

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        try:
            object.__setattr__(self, "head_norm", HeadNorm.parse(self.head_norm).value)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def layer_dims(self, n_features: int) -> List[int]:
        return [n_features, *self.hidden, 1]


@dataclass(frozen=True)
class GridConfig:
    """Hyperparameter grids; ``None`` picks the defaults for the loss and head."""

    margin: Optional[Tuple[float, ...]] = None
    scale: Optional[Tuple[float, ...]] = None
    lr: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        for name in ("margin", "scale", "lr"):
            values = getattr(self, name)
            if values is None:
                continue
            values = tuple(float(v) for v in values)
            if not values:
                raise ConfigError(f"grids.{name} must be non-empty")
            if any(not v > 0 for v in values):
                raise ConfigError(f"grids.{name} values must be positive")
            object.__setattr__(self, name, values)


@dataclass(frozen=True)
class SweepAxis:
    name: str
    values: Tuple[Any, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        if not self.values:
            raise ConfigError(f"sweep axis {self.name!r} has no values")


@dataclass(frozen=True)
class SweepConfig:
    """``grid`` crosses all axes; ``sequential`` tunes one axis at a time, pinning earlier winners."""

    mode: str = "grid"
    axes: Tuple[SweepAxis, ...] = ()

    def __post_init__(self):
        if self.mode not in ("grid", "sequential"):
            raise ConfigError(f"sweep.mode must be 'grid' or 'sequential', got {self.mode!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    losses: Tuple[str, ...] = ()
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    epochs: int = 50
    seeds: Tuple[int, ...] = (0,)
    cv_folds: int = 5
    grids: GridConfig = field(default_factory=GridConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)

    def __post_init__(self):
        if int(self.epochs) < 1:
            raise ConfigError("epochs must be >= 1")
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        if int(self.cv_folds) < 2:
            raise ConfigError("cv_folds must be >= 2")
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        losses = tuple(LossConfig(k).kind for k in self.losses)
        object.__setattr__(self, "losses", losses)

    @property
    def loss_kinds(self) -> Tuple[str, ...]:
        return self.losses or (self.loss.kind,)

    def with_override(self, path: str, value) -> "ExperimentConfig":
        """Copy with one dotted field replaced, e.g. ``("sampler.spr", 0.5)``."""
        return _replace_path(self, path.split("."), value, path)

    def to_dict(self) -> Dict[str, Any]:
        return _to_plain(self)

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "ExperimentConfig":
        if not isinstance(payload, dict):
            raise ConfigError("config must be a JSON object")
        try:
            sweep = payload.get("sweep", {})
            axes = tuple(SweepAxis(a["name"], a["values"]) for a in sweep.get("axes", ()))
            kwargs = {
                "dataset": _build(DatasetConfig, payload.get("dataset", {}), "dataset"),
                "loss": _build(LossConfig, payload.get("loss", {}), "loss"),
                "optimizer": _build(OptimizerConfig, payload.get("optimizer", {}), "optimizer"),
                "sampler": _build(SamplerConfig, payload.get("sampler", {}), "sampler"),
                "model": _build(ModelConfig, payload.get("model", {}), "model"),
                "grids": _build(GridConfig, payload.get("grids", {}), "grids"),
                "sweep": SweepConfig(sweep.get("mode", "grid"), axes),
            }
            unknown = set(payload) - {f.name for f in dataclasses.fields(cls)}
            if unknown:
                raise ConfigError(f"unknown config keys: {sorted(unknown)}")
            for name in ("losses", "epochs", "seeds", "cv_folds"):
                if name in payload:
                    kwargs[name] = payload[name]
            config = cls(**kwargs)
            for axis in config.sweep.axes:
                for value in axis.values:
                    config.with_override(axis.name, value)
            return config
        except ConfigError:
            raise
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(f"invalid config: {exc}") from exc


def _build(cls, payload, where):
    if not isinstance(payload, dict):
        raise ConfigError(f"{where} must be an object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(payload) - names
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    try:
        return cls(**payload)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _replace_path(obj, parts, value, full):
    if not dataclasses.is_dataclass(obj):
        raise ConfigError(f"cannot override {full!r}")
    names = {f.name for f in dataclasses.fields(obj)}
    head = parts[0]
    if head not in names:
        raise ConfigError(f"unknown config field {full!r}")
    if len(parts) > 1:
        value = _replace_path(getattr(obj, head), parts[1:], value, full)
    try:
        return dataclasses.replace(obj, **{head: value})
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value {value!r} for {full!r}: {exc}") from exc


def _to_plain(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, (list, tuple)):
        return [_to_plain(v) for v in obj]
    if isinstance(obj, enum.Enum):
        return obj.value
    return obj


def load_config(path) -> ExperimentConfig:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return ExperimentConfig.from_dict(payload)


_SYNTH_KEYS = {"n": int, "dim": int, "pr": float, "sep": float, "seed": int}


def resolve_dataset(source: str, label_column: str = "label") -> Dataset:
    """Load ``synth:n=..,dim=..,pr=..,sep=..,seed=..`` or a CSV path."""
    if source.startswith("synth:"):
        params = {"n": 2000, "dim": 10, "pr": 0.1, "sep": 3.0, "seed": 0}
        body = source[len("synth:") :]
        for item in filter(None, body.split(",")):
            key, _, raw = item.partition("=")
            key = key.strip()
            if key not in _SYNTH_KEYS:
                raise BadParams(f"unknown synthetic dataset key {key!r}")
            try:
                params[key] = _SYNTH_KEYS[key](raw)
            except ValueError:
                raise BadParams(f"bad value {raw!r} for synthetic key {key!r}") from None
        return synth_gaussian(params["n"], params["dim"], params["pr"], params["sep"], params["seed"], name=source)
    return load_csv(source, label_column)
