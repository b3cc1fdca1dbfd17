"""Inverse distance weighting: weights, coefficients, variance and distance.

The batch entry point :func:`idw_terms` is what the engine uses; the
single-point functions mirror it for direct use and testing.
"""

from __future__ import annotations

import enum
import math

import numpy as np

from . import kernels
from .core import LearnerState, ScalingTransform

DEFAULT_EPS = 1e-12


class WeightKind(enum.Enum):
    BASIC = "basic"
    EXPONENTIAL = "exponential"


def idw_weight(kind: WeightKind, d2: float) -> float:
    if d2 <= 0:
        raise ValueError("weight undefined at zero distance")
    if kind is WeightKind.BASIC:
        return 1.0 / d2
    return math.exp(-d2) / d2


def _as_rows(t: ScalingTransform, X) -> np.ndarray:
    X = np.asarray(X, dtype=float).reshape(-1, t.center.size)
    return np.ascontiguousarray(t(X))


def idw_coefficients(t: ScalingTransform, x, samples, kind=WeightKind.EXPONENTIAL,
                     eps: float = DEFAULT_EPS) -> np.ndarray:
    """Normalized weights v_k(x) over ``samples``; they sum to one.

    A point within ``eps`` (squared, scaled) of a sample gets the indicator
    of the first such sample. If every exponential weight underflows the
    basic weights are used instead.
    """
    S = _as_rows(t, samples)
    if S.shape[0] == 0:
        raise ValueError("no samples")
    u = t(np.asarray(x, dtype=float).ravel())
    if u.shape[0] != S.shape[1]:
        raise ValueError("dimension mismatch")
    d2 = ((S - u) ** 2).sum(axis=1)
    hit = np.nonzero(d2 <= eps)[0]
    v = np.zeros(S.shape[0])
    if hit.size:
        v[hit[0]] = 1.0
        return v
    w = 1.0 / d2
    if kind is WeightKind.EXPONENTIAL:
        we = np.exp(-d2) * w
        if we.sum() > 0.0:
            w = we
    return w / w.sum()


def idw_terms(Cs, Ss, feasible, Y, Yhat, kind=WeightKind.EXPONENTIAL, eps=DEFAULT_EPS):
    """Batch IDW variance and distance on already scaled coordinates.

    The coefficients are normalized over every queried sample while the
    variance only sums the feasible ones, so candidates close to known
    infeasible points get little variance.

    ``Cs`` (P, n) candidates, ``Ss`` (N, n) all queried samples, ``feasible``
    (N,) bool, ``Y`` (N, m) targets (ignored where infeasible), ``Yhat``
    (P, m) predictions at the candidates. Returns ``s2`` (P, m), ``z`` (P,).
    """
    Y = np.where(np.isfinite(Y), Y, 0.0)
    return kernels.idw_terms(
        np.ascontiguousarray(Cs, dtype=float),
        np.ascontiguousarray(Ss, dtype=float),
        np.ascontiguousarray(feasible, dtype=np.bool_),
        np.ascontiguousarray(Y, dtype=float),
        np.ascontiguousarray(Yhat, dtype=float),
        kind is WeightKind.EXPONENTIAL,
        float(eps),
    )


def idw_variance(t: ScalingTransform, x, state: LearnerState, prediction,
                 kind=WeightKind.EXPONENTIAL, eps: float = DEFAULT_EPS) -> np.ndarray:
    if state.n_feasible == 0:
        raise ValueError("no labeled samples")
    yhat = np.asarray(prediction, dtype=float).reshape(1, -1)
    s2, _ = idw_terms(_as_rows(t, x), _as_rows(t, state.X), state.feasible_mask,
                      state.Y, yhat, kind, eps)
    return s2[0]


def idw_distance(t: ScalingTransform, x, samples, kind=WeightKind.EXPONENTIAL,
                 eps: float = DEFAULT_EPS) -> float:
    """Exploration term in [0, 1]: 0 on a sample, tending to 1 far away."""
    S = _as_rows(t, samples)
    if S.shape[0] == 0:
        raise ValueError("no samples")
    dummy = np.zeros((1, 1))
    _, z = idw_terms(_as_rows(t, x), S, np.zeros(S.shape[0], dtype=bool),
                     np.zeros((S.shape[0], 1)), dummy, kind, eps)
    return float(z[0])
