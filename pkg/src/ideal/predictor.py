"""Predictor contract and the built-in feedforward network.

Any object with ``fit(X, Y)`` and ``predict(X) -> (P, m) array`` can drive the
engine. :class:`MLP` is the default: a small dense network trained by
full-batch Adam, with inputs mapped to [-1, 1] from the training data and
regression targets standardized on the current labels.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Optional, Protocol

import numpy as np

from . import kernels

HIDDEN_CODES = {"logistic": 0, "relu": 1, "tanh": 2}
OUTPUT_CODES = {"linear": 0, "logistic": 1}
STD_FLOOR = 1e-8


class Predictor(Protocol):
    def fit(self, X: np.ndarray, Y: np.ndarray) -> None: ...

    def predict(self, X: np.ndarray) -> np.ndarray: ...


@dataclass
class MlpConfig:
    hidden: tuple = (5, 5)
    activation: str = "logistic"
    output: str = "linear"
    l2_penalty: float = 1e-2
    max_epochs: int = 3000
    learning_rate: float = 0.01
    tol: float = 1e-7
    warm_start: bool = False
    input_half_width: float = 2.0   # inputs are mapped onto [-w, w]

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if not self.hidden or min(self.hidden) < 1:
            raise ValueError("need at least one hidden layer of positive width")
        if self.activation not in HIDDEN_CODES:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.output not in OUTPUT_CODES:
            raise ValueError(f"unknown output {self.output!r}")
        if self.l2_penalty < 0:
            raise ValueError("l2_penalty must be nonnegative")
        if not self.input_half_width > 0:
            raise ValueError("input_half_width must be positive")

    @classmethod
    def regression(cls, **kw):
        kw.setdefault("hidden", (5, 5))
        return cls(output="linear", **kw)

    @classmethod
    def classification(cls, **kw):
        kw.setdefault("hidden", (10, 10))
        kw.setdefault("warm_start", True)
        return cls(output="logistic", **kw)


@dataclass
class TargetScaler:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, Y) -> "TargetScaler":
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        return cls(Y.mean(axis=0), np.maximum(Y.std(axis=0), STD_FLOOR))

    @classmethod
    def identity(cls, m: int) -> "TargetScaler":
        return cls(np.zeros(m), np.ones(m))

    def transform(self, Y):
        return (np.asarray(Y, dtype=float) - self.mean) / self.std

    def inverse(self, Ys):
        return np.asarray(Ys, dtype=float) * self.std + self.mean


def scale_targets(scaler: TargetScaler, y):
    return scaler.transform(y)


def unscale_prediction(scaler: TargetScaler, y_scaled):
    return scaler.inverse(y_scaled)


def layer_sizes(n_in: int, hidden, n_out: int) -> np.ndarray:
    return np.array([n_in, *hidden, n_out], dtype=np.int64)


def n_params(sizes) -> int:
    return int(sum(sizes[i] * sizes[i + 1] + sizes[i + 1] for i in range(len(sizes) - 1)))


def init_params(sizes, rng: np.random.Generator) -> np.ndarray:
    """Glorot-uniform weights and biases."""
    parts = []
    for i in range(len(sizes) - 1):
        fi, fo = int(sizes[i]), int(sizes[i + 1])
        bound = np.sqrt(6.0 / (fi + fo))
        parts.append(rng.uniform(-bound, bound, fi * fo))
        parts.append(rng.uniform(-bound, bound, fo))
    return np.concatenate(parts)


class MLP:
    """Dense network with the engine's predictor interface.

    With ``warm_start`` off every ``fit`` draws fresh initial weights from
    ``rng``; with it on, training resumes from the previous parameters.
    """

    def __init__(self, config: Optional[MlpConfig] = None, rng=None):
        self.config = config or MlpConfig()
        self.rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        self.sizes: Optional[np.ndarray] = None
        self.theta: Optional[np.ndarray] = None
        self.x_center: Optional[np.ndarray] = None
        self.x_gain: Optional[np.ndarray] = None
        self.scaler: Optional[TargetScaler] = None
        self.loss_trace: np.ndarray = np.empty(0)

    @property
    def is_classifier(self) -> bool:
        return self.config.output == "logistic"

    def _inputs(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, self.sizes[0])
        if X.shape[1] != self.sizes[0]:
            raise ValueError(f"expected {self.sizes[0]} features, got {X.shape[1]}")
        return np.ascontiguousarray((X - self.x_center) * self.x_gain)

    def fit(self, X, Y) -> "MLP":
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[0] == 0:
            raise ValueError("no labeled samples")
        Y = np.asarray(Y, dtype=float).reshape(X.shape[0], -1)
        cfg = self.config
        sizes = layer_sizes(X.shape[1], cfg.hidden, Y.shape[1])
        lo, hi = X.min(axis=0), X.max(axis=0)
        width = hi - lo
        gain = np.zeros_like(width)
        np.divide(2.0 * cfg.input_half_width, width, out=gain, where=width > 0)
        self.x_center, self.x_gain = (hi + lo) / 2.0, gain

        if self.is_classifier:
            self.scaler = TargetScaler.identity(Y.shape[1])
        else:
            self.scaler = TargetScaler.fit(Y)
        Ys = np.ascontiguousarray(self.scaler.transform(Y))

        reuse = (cfg.warm_start and self.theta is not None
                 and self.sizes is not None and np.array_equal(self.sizes, sizes))
        self.sizes = sizes
        theta0 = self.theta if reuse else init_params(sizes, self.rng)
        self.theta, self.loss_trace = kernels.adam_fit(
            np.ascontiguousarray(theta0), sizes, self._inputs(X), Ys,
            HIDDEN_CODES[cfg.activation], OUTPUT_CODES[cfg.output],
            float(cfg.l2_penalty), float(cfg.learning_rate), int(cfg.max_epochs),
            float(cfg.tol))
        return self

    def predict(self, X) -> np.ndarray:
        if self.theta is None:
            raise RuntimeError("predict called before fit")
        return mlp_forward(self, X)

    def loss_and_grad(self, X, Y, theta=None):
        """Training objective at ``theta`` on already-fitted input/target maps."""
        Ys = np.ascontiguousarray(self.scaler.transform(np.asarray(Y, dtype=float)))
        return kernels.mlp_loss_grad(
            np.ascontiguousarray(self.theta if theta is None else theta), self.sizes,
            self._inputs(X), Ys, HIDDEN_CODES[self.config.activation],
            OUTPUT_CODES[self.config.output], float(self.config.l2_penalty))

    # -- checkpoints

    def to_dict(self) -> dict:
        if self.theta is None:
            raise RuntimeError("nothing to save before fit")
        return {
            "format": "ideal-mlp/1",
            "layer_sizes": [int(s) for s in self.sizes],
            "activation": self.config.activation,
            "output": self.config.output,
            "config": {k: (list(v) if isinstance(v, tuple) else v)
                       for k, v in asdict(self.config).items()},
            "weights": _split_layers(self.theta, self.sizes),
            "input_center": self.x_center.tolist(),
            "input_gain": self.x_gain.tolist(),
            "target_mean": self.scaler.mean.tolist(),
            "target_std": self.scaler.std.tolist(),
        }

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def from_dict(cls, doc: dict) -> "MLP":
        if doc.get("format") != "ideal-mlp/1":
            raise ValueError("not an ideal-mlp/1 checkpoint")
        cfg = MlpConfig(**doc["config"])
        model = cls(cfg)
        model.sizes = np.array(doc["layer_sizes"], dtype=np.int64)
        parts = []
        for layer in doc["weights"]:
            parts.append(np.asarray(layer["W"], dtype=float).ravel())
            parts.append(np.asarray(layer["b"], dtype=float))
        model.theta = np.concatenate(parts)
        if model.theta.size != n_params(model.sizes):
            raise ValueError("weight count does not match layer sizes")
        model.x_center = np.asarray(doc["input_center"], dtype=float)
        model.x_gain = np.asarray(doc["input_gain"], dtype=float)
        model.scaler = TargetScaler(np.asarray(doc["target_mean"], dtype=float),
                                    np.asarray(doc["target_std"], dtype=float))
        return model

    @classmethod
    def load(cls, path) -> "MLP":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _split_layers(theta, sizes) -> list:
    out, off = [], 0
    for i in range(len(sizes) - 1):
        fi, fo = int(sizes[i]), int(sizes[i + 1])
        out.append({"W": theta[off:off + fi * fo].reshape(fi, fo).tolist(),
                    "b": theta[off + fi * fo:off + fi * fo + fo].tolist()})
        off += fi * fo + fo
    return out


def mlp_forward(model: MLP, X) -> np.ndarray:
    out = kernels.mlp_forward(
        np.ascontiguousarray(model.theta), model.sizes, model._inputs(X),
        HIDDEN_CODES[model.config.activation], OUTPUT_CODES[model.config.output])
    return model.scaler.inverse(out)


def mlp_fit(config: MlpConfig, X, Y, previous: Optional[MLP] = None, rng=None) -> MLP:
    if previous is not None and config.warm_start:
        model = previous
        model.config = config
    else:
        model = MLP(config, rng)
    return model.fit(X, Y)
