"""Small fully-connected scorer with hand-written backprop.

The network maps features to one raw score per row through affine layers and
ReLUs. An optional output head then normalizes the batch of raw scores: an
elementwise sigmoid, a batch-coupled l1/l2 rescaling, or batch
standardization. All parameters live in a single flat float64 vector so that
optimizers can treat the model as one array.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Sequence

import numpy as np
from scipy.special import expit

from .errors import BadArchitecture, CacheMismatch, DegenerateBatch, ShapeMismatch

__all__ = ["HeadNorm", "ForwardCache", "Mlp", "CHECKPOINT_FORMAT"]

CHECKPOINT_FORMAT = "aucbench-mlp"
CHECKPOINT_VERSION = 1
_NORM_FLOOR = 1e-12


class HeadNorm(str, enum.Enum):
    NONE = "none"
    SIGMOID = "sigmoid"
    L1 = "l1"
    L2 = "l2"
    BATCHNORM = "batchnorm"

    @classmethod
    def parse(cls, value) -> "HeadNorm":
        if isinstance(value, cls):
            return value
        if value is None:
            return cls.NONE
        key = str(value).lower().replace("_", "").replace("-", "")
        aliases = {"l1score": "l1", "l2score": "l2", "bn": "batchnorm"}
        key = aliases.get(key, key)
        for member in cls:
            if member.value == key:
                return member
        raise ValueError(f"unknown head normalization {value!r}")

    @property
    def bounded(self) -> bool:
        """Whether the head squashes scores to magnitude <= 1."""
        return self in (HeadNorm.SIGMOID, HeadNorm.L1, HeadNorm.L2)


@dataclass
class ForwardCache:
    model_token: int
    mode: str
    inputs: List[np.ndarray]  # input to each affine layer
    pre_acts: List[np.ndarray]  # output of each affine layer
    raw: np.ndarray
    scores: np.ndarray
    extras: dict = field(default_factory=dict)


class Mlp:
    """ReLU network ``layer_dims[0] -> ... -> 1`` with a score normalization head."""

    def __init__(
        self,
        layer_dims: Sequence[int],
        head_norm="none",
        params=None,
        bn_epsilon: float = 1e-5,
        bn_momentum: float = 0.1,
    ):
        dims = [int(d) for d in layer_dims]
        if len(dims) < 2 or any(d < 1 for d in dims):
            raise BadArchitecture(f"need at least input and output dims, all >= 1; got {dims}")
        if dims[-1] != 1:
            raise BadArchitecture(f"last layer must produce one score, got {dims[-1]}")
        if not bn_epsilon > 0 or not 0 < bn_momentum < 1:
            raise BadArchitecture("bn_epsilon must be > 0 and bn_momentum in (0, 1)")
        self.layer_dims = dims
        self.head_norm = HeadNorm.parse(head_norm)
        self.bn_epsilon = float(bn_epsilon)
        self.bn_momentum = float(bn_momentum)
        self.bn_running_mean = 0.0
        self.bn_running_var = 1.0

        self._shapes = []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            self._shapes.append(((fan_out, fan_in), (fan_out,)))
        n_params = sum(r * c + r for (r, c), _ in self._shapes)
        if params is None:
            params = np.zeros(n_params)
        params = np.array(params, dtype=np.float64)
        if params.shape != (n_params,):
            raise ShapeMismatch(f"expected {n_params} parameters, got shape {params.shape}")
        self.params = params

    @classmethod
    def init(cls, layer_dims, head_norm="none", seed=0, **kwargs) -> "Mlp":
        """Glorot-uniform weights, zero biases; deterministic in ``seed``."""
        model = cls(layer_dims, head_norm, **kwargs)
        rng = np.random.default_rng(seed)
        for weight, _ in model.layers():
            fan_out, fan_in = weight.shape
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            weight[...] = rng.uniform(-bound, bound, size=weight.shape)
        return model

    @property
    def params(self) -> np.ndarray:
        return self._params

    @params.setter
    def params(self, value) -> None:
        value = np.asarray(value, dtype=np.float64)
        if hasattr(self, "_params") and value.shape != self._params.shape:
            raise ShapeMismatch(f"expected shape {self._params.shape}, got {value.shape}")
        # Copy so the layer views below never alias caller-owned memory.
        self._params = np.array(value, dtype=np.float64)
        self._views = self._make_views(self._params)

    @property
    def n_params(self) -> int:
        return self._params.size

    def _make_views(self, flat):
        views, offset = [], 0
        for (rows, cols), _ in self._shapes:
            w = flat[offset : offset + rows * cols].reshape(rows, cols)
            offset += rows * cols
            b = flat[offset : offset + rows]
            offset += rows
            views.append((w, b))
        return views

    def layers(self):
        """(weight, bias) views into the flat parameter vector, input side first."""
        return list(self._views)

    def raw_scores(self, X) -> np.ndarray:
        """Un-normalized scores; read-only and safe to call concurrently."""
        h = self._check_input(X)
        last = len(self._views) - 1
        for i, (w, b) in enumerate(self._views):
            h = h @ w.T + b
            if i < last:
                h = np.maximum(h, 0.0)
        return h[:, 0]

    def _check_input(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.layer_dims[0]:
            raise ShapeMismatch(f"expected (n, {self.layer_dims[0]}) inputs, got {X.shape}")
        if X.shape[0] == 0:
            raise ShapeMismatch("empty batch")
        return X

    def forward(self, X, mode: str = "train"):
        """Return ``(scores, cache)``.

        In ``train`` mode the batchnorm head standardizes with batch statistics
        and updates its running estimates; ``eval`` uses the running estimates.
        l1/l2 heads always normalize over the given batch.
        """
        if mode not in ("train", "eval"):
            raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
        h = self._check_input(X)
        inputs, pre_acts = [], []
        last = len(self._views) - 1
        for i, (w, b) in enumerate(self._views):
            inputs.append(h)
            z = h @ w.T + b
            pre_acts.append(z)
            h = np.maximum(z, 0.0) if i < last else z
        raw = h[:, 0].copy()
        scores, extras = self._head_forward(raw, mode)
        cache = ForwardCache(id(self), mode, inputs, pre_acts, raw, scores, extras)
        return scores, cache

    def _head_forward(self, raw, mode):
        norm = self.head_norm
        if norm is HeadNorm.NONE:
            return raw.copy(), {}
        if norm is HeadNorm.SIGMOID:
            return expit(raw), {}
        if norm in (HeadNorm.L1, HeadNorm.L2):
            total = np.abs(raw).sum() if norm is HeadNorm.L1 else np.sqrt(raw @ raw)
            if total < _NORM_FLOOR:
                raise DegenerateBatch(f"{norm.value} norm of raw scores is {total:.3g}")
            return raw / total, {"norm": total}
        if mode == "train":
            mean = raw.mean()
            var = raw.var()
            n = raw.size
            unbiased = var * n / (n - 1) if n > 1 else var
            m = self.bn_momentum
            self.bn_running_mean = (1 - m) * self.bn_running_mean + m * mean
            self.bn_running_var = (1 - m) * self.bn_running_var + m * unbiased
        else:
            mean, var = self.bn_running_mean, self.bn_running_var
        inv_std = 1.0 / np.sqrt(var + self.bn_epsilon)
        scores = (raw - mean) * inv_std
        return scores, {"inv_std": inv_std}

    def _head_backward(self, cache: ForwardCache, dz):
        norm = self.head_norm
        z, raw = cache.scores, cache.raw
        if norm is HeadNorm.NONE:
            return dz
        if norm is HeadNorm.SIGMOID:
            return dz * z * (1.0 - z)
        if norm is HeadNorm.L2:
            total = cache.extras["norm"]
            return (dz - z * (z @ dz)) / total
        if norm is HeadNorm.L1:
            total = cache.extras["norm"]
            return dz / total - np.sign(raw) * (raw @ dz) / total**2
        inv_std = cache.extras["inv_std"]
        if cache.mode == "eval":
            return dz * inv_std
        return inv_std * (dz - dz.mean() - z * (dz @ z) / z.size)

    def backward(self, cache: ForwardCache, dL_dz) -> np.ndarray:
        """Gradient of a loss w.r.t. the flat parameters, given dL/dscores."""
        if cache.model_token != id(self):
            raise CacheMismatch("cache was produced by a different model")
        dz = np.asarray(dL_dz, dtype=np.float64).ravel()
        if dz.shape != cache.scores.shape:
            raise CacheMismatch(f"got {dz.size} score gradients for a batch of {cache.scores.size}")
        delta = self._head_backward(cache, dz)[:, None]
        grads = []
        for i in range(len(self._views) - 1, -1, -1):
            w, _ = self._views[i]
            grads.append((delta.T @ cache.inputs[i], delta.sum(axis=0)))
            if i > 0:
                delta = (delta @ w) * (cache.pre_acts[i - 1] > 0)
        flat = []
        for gw, gb in reversed(grads):
            flat.append(gw.ravel())
            flat.append(gb)
        return np.concatenate(flat)

    def clone(self) -> "Mlp":
        other = Mlp(self.layer_dims, self.head_norm, self._params, self.bn_epsilon, self.bn_momentum)
        other.bn_running_mean = self.bn_running_mean
        other.bn_running_var = self.bn_running_var
        return other

    def to_dict(self) -> dict:
        layers = []
        for w, b in self._views:
            layers.append({"shape": list(w.shape), "weight": w.ravel().tolist(), "bias": b.tolist()})
        return {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "layer_dims": self.layer_dims,
            "head_norm": self.head_norm.value,
            "bn": {
                "epsilon": self.bn_epsilon,
                "momentum": self.bn_momentum,
                "running_mean": self.bn_running_mean,
                "running_var": self.bn_running_var,
            },
            "layers": layers,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "Mlp":
        if payload.get("format") != CHECKPOINT_FORMAT:
            raise ValueError("not an aucbench model checkpoint")
        if payload.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {payload.get('version')}")
        bn = payload["bn"]
        model = cls(payload["layer_dims"], payload["head_norm"], bn_epsilon=bn["epsilon"], bn_momentum=bn["momentum"])
        flat = []
        for (w, _), layer in zip(model.layers(), payload["layers"]):
            if list(w.shape) != list(layer["shape"]):
                raise ShapeMismatch(f"checkpoint layer shape {layer['shape']} != {list(w.shape)}")
            flat.extend(layer["weight"])
            flat.extend(layer["bias"])
        model.params = np.array(flat, dtype=np.float64)
        model.bn_running_mean = float(bn["running_mean"])
        model.bn_running_var = float(bn["running_var"])
        return model

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Mlp":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
