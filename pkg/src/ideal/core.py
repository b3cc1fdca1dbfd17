"""Problem description, learner bookkeeping and the feature scaling map."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

REGRESSION = "regression"
CLASSIFICATION = "classification"

# An oracle maps a feature vector to its target vector, or to None when the
# vector turns out not to be queryable (outside the unknown feasible set).
Oracle = Callable[[np.ndarray], Optional[np.ndarray]]


class EmptyPoolError(ValueError):
    pass


@dataclass(frozen=True)
class Bounds:
    x_min: np.ndarray
    x_max: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.x_min, dtype=float).ravel()
        hi = np.asarray(self.x_max, dtype=float).ravel()
        if lo.shape != hi.shape:
            raise ValueError("x_min and x_max differ in length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("bounds must be finite")
        if np.any(lo > hi):
            raise ValueError("x_min must not exceed x_max")
        object.__setattr__(self, "x_min", lo)
        object.__setattr__(self, "x_max", hi)

    @property
    def dim(self) -> int:
        return self.x_min.size

    @property
    def degenerate(self) -> np.ndarray:
        return self.x_max == self.x_min

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.x_min) and np.all(x <= self.x_max))


class ScalingTransform:
    """Affine map sending ``x_min`` to -1 and ``x_max`` to +1 per feature.

    Constant features (``x_min == x_max``) map to 0 and therefore drop out of
    every distance; so do features so narrow that ``2 / width`` overflows.
    """

    def __init__(self, bounds: Bounds):
        self.bounds = bounds
        width = bounds.x_max - bounds.x_min
        self.center = (bounds.x_max + bounds.x_min) / 2.0
        gain = np.zeros_like(width)
        with np.errstate(over="ignore"):
            np.divide(2.0, width, out=gain, where=width > 0)
        gain[~np.isfinite(gain)] = 0.0
        self.gain = gain

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.gain * (x - self.center)

    def inverse(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        half = (self.bounds.x_max - self.bounds.x_min) / 2.0
        return self.center + half * u


def scale(t: ScalingTransform, x) -> np.ndarray:
    return t(x)


def scaled_sq_distance(t: ScalingTransform, x, xk) -> float:
    x = np.asarray(x, dtype=float)
    xk = np.asarray(xk, dtype=float)
    if x.shape != xk.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {xk.shape}")
    d = t(xk) - t(x)
    return float(np.dot(d, d))


def dedup_rows(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Drop exact duplicate rows, keeping first occurrences in order.

    Returns the unique rows and the original indices they came from.
    """
    _, first = np.unique(X, axis=0, return_index=True)
    keep = np.sort(first)
    return X[keep], keep


@dataclass
class Problem:
    """What may be queried, and the shape of the answers.

    Exactly one of ``pool`` (pool-based sampling) or ``box`` (population
    based sampling) is set. ``known_constraint`` applies to population mode:
    it returns the constraint values g(x) and a point is admissible when all
    of them are <= 0.
    """

    n_targets: int
    kind: str = REGRESSION
    pool: Optional[np.ndarray] = None
    box: Optional[Bounds] = None
    known_constraint: Optional[Callable[[np.ndarray], object]] = None
    pool_origin: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in (REGRESSION, CLASSIFICATION):
            raise ValueError(f"unknown target kind {self.kind!r}")
        if (self.pool is None) == (self.box is None):
            raise ValueError("give exactly one of pool or box")
        if self.pool is not None:
            pool = np.atleast_2d(np.asarray(self.pool, dtype=float))
            if pool.shape[0] == 0:
                raise EmptyPoolError("empty pool")
            if not np.all(np.isfinite(pool)):
                raise ValueError("pool contains non-finite values")
            pool, origin = dedup_rows(pool)
            self.pool = pool
            self.pool_origin = origin

    @classmethod
    def from_pool(cls, pool, n_targets=1, kind=REGRESSION):
        return cls(n_targets=n_targets, kind=kind, pool=pool)

    @classmethod
    def from_box(cls, x_min, x_max, n_targets=1, kind=REGRESSION, known_constraint=None):
        return cls(n_targets=n_targets, kind=kind, box=Bounds(x_min, x_max),
                   known_constraint=known_constraint)

    @property
    def is_pool(self) -> bool:
        return self.pool is not None

    @property
    def dim(self) -> int:
        return self.pool.shape[1] if self.is_pool else self.box.dim

    def admissible(self, x) -> bool:
        if self.known_constraint is None:
            return True
        g = np.asarray(self.known_constraint(np.asarray(x, dtype=float)), dtype=float)
        return bool(np.all(g <= 0.0))


def compute_bounds(problem: Problem) -> Bounds:
    if problem.is_pool:
        if problem.pool.shape[0] == 0:
            raise EmptyPoolError("empty pool")
        return Bounds(problem.pool.min(axis=0), problem.pool.max(axis=0))
    return problem.box


@dataclass
class LearnerState:
    """Everything queried so far.

    ``X`` and ``Y`` grow by one row per oracle call; rows of ``Y`` for
    infeasible queries are NaN. ``feasible`` holds the indices into ``X`` with
    a defined target and ``consumed`` the pool indices already spent.
    """

    dim: int
    n_targets: int
    X: np.ndarray = None
    Y: np.ndarray = None
    feasible: list = field(default_factory=list)
    consumed: list = field(default_factory=list)
    pool_index: list = field(default_factory=list)

    def __post_init__(self):
        if self.X is None:
            self.X = np.empty((0, self.dim))
        if self.Y is None:
            self.Y = np.empty((0, self.n_targets))
        self._consumed_set = set(self.consumed)

    @property
    def query_count(self) -> int:
        return self.X.shape[0]

    @property
    def n_feasible(self) -> int:
        return len(self.feasible)

    @property
    def n_infeasible(self) -> int:
        return self.query_count - self.n_feasible

    @property
    def feasible_mask(self) -> np.ndarray:
        mask = np.zeros(self.query_count, dtype=bool)
        mask[self.feasible] = True
        return mask

    def labeled(self) -> tuple[np.ndarray, np.ndarray]:
        return self.X[self.feasible], self.Y[self.feasible]

    def is_consumed(self, j: int) -> bool:
        return j in self._consumed_set

    def record(self, x, y, pool_index: Optional[int] = None) -> bool:
        """Append one oracle answer; ``y`` is None for an infeasible query."""
        x = np.asarray(x, dtype=float).reshape(1, self.dim)
        if y is None:
            row = np.full((1, self.n_targets), np.nan)
        else:
            row = np.asarray(y, dtype=float).reshape(1, self.n_targets)
            if not np.all(np.isfinite(row)):
                raise ValueError("oracle returned non-finite target")
        k = self.query_count
        self.X = np.vstack([self.X, x])
        self.Y = np.vstack([self.Y, row])
        if y is not None:
            self.feasible.append(k)
        self.pool_index.append(pool_index)
        if pool_index is not None:
            if pool_index in self._consumed_set:
                raise ValueError(f"pool index {pool_index} queried twice")
            self.consumed.append(pool_index)
            self._consumed_set.add(pool_index)
        return y is not None
