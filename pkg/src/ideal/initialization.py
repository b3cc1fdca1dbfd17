"""Initial designs collected before any model exists."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import Bounds, LearnerState, Oracle, Problem, ScalingTransform, compute_bounds

MAX_EMPTY_ROUNDS = 1000


@dataclass
class InitResult:
    state: LearnerState
    success: bool

    @property
    def n_init_total(self) -> int:
        return self.state.query_count


def lhs_sample(bounds: Bounds, count: int, rng: np.random.Generator) -> np.ndarray:
    """Latin hypercube design: one point per stratum in every coordinate."""
    if count < 1:
        raise ValueError("count must be positive")
    n = bounds.dim
    u = np.empty((count, n))
    for j in range(n):
        u[:, j] = (rng.permutation(count) + rng.random(count)) / count
    return bounds.x_min + u * (bounds.x_max - bounds.x_min)


def lhs_init(problem: Problem, oracle: Oracle, n_init: int, n_max: int,
             rng: np.random.Generator, state: LearnerState | None = None) -> InitResult:
    """Query LHS points until ``n_init`` feasible answers or the budget runs out.

    Points violating the known constraint are dropped without spending
    budget; each round draws a fresh design of ``n_init`` points.
    """
    if n_init > n_max:
        raise ValueError("n_init exceeds n_max")
    bounds = compute_bounds(problem)
    if state is None:
        state = LearnerState(problem.dim, problem.n_targets)
    idle = 0
    while state.n_feasible < n_init and state.query_count < n_max:
        queried = False
        for x in lhs_sample(bounds, n_init, rng):
            if state.n_feasible >= n_init or state.query_count >= n_max:
                break
            if not problem.admissible(x):
                continue
            state.record(x, oracle(x))
            queried = True
        idle = 0 if queried else idle + 1
        if idle >= MAX_EMPTY_ROUNDS:
            break
    return InitResult(state, state.n_feasible >= n_init)


def _plusplus_seeds(X, K, rng):
    M = X.shape[0]
    centers = np.empty((K, X.shape[1]))
    centers[0] = X[rng.integers(M)]
    closest = kernels.min_sq_dist(X, centers[:1])
    for c in range(1, K):
        total = closest.sum()
        if total <= 0.0:
            j = int(np.argmax(closest))
        else:
            j = int(np.searchsorted(np.cumsum(closest), rng.random() * total, side="right"))
            j = min(j, M - 1)
        centers[c] = X[j]
        closest = np.minimum(closest, kernels.min_sq_dist(X, centers[c:c + 1]))
    return centers


def kmeans(points, K: int, rng: np.random.Generator, max_iter: int = 300) -> np.ndarray:
    """Lloyd's algorithm from k-means++ seeds.

    Stops when assignments no longer change. An empty cluster is re-seeded
    at the point farthest from its current centroid. Ties go to the lowest
    centroid index.
    """
    X = np.ascontiguousarray(np.atleast_2d(np.asarray(points, dtype=float)))
    n_distinct = np.unique(X, axis=0).shape[0]
    if K < 1 or K > n_distinct:
        raise ValueError(f"K={K} needs 1 <= K <= {n_distinct} distinct points")
    centers = _plusplus_seeds(X, K, rng)
    labels = None
    for _ in range(max_iter):
        d2 = kernels.sq_dists(X, centers)
        new = np.argmin(d2, axis=1)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for c in range(K):
            members = labels == c
            if members.any():
                centers[c] = X[members].mean(axis=0)
            else:
                far = int(np.argmax(d2[np.arange(X.shape[0]), labels]))
                centers[c] = X[far]
                labels[far] = c
                d2[far] = 0.0
    return centers


def pool_init(problem: Problem, oracle: Oracle, n_init: int, n_max: int,
              rng: np.random.Generator, state: LearnerState | None = None) -> InitResult:
    """Query the pool points nearest to K-means centroids of the scaled pool.

    Infeasible picks are replaced by re-running K-means on the unconsumed
    points with K equal to the shortfall.
    """
    if n_init > n_max:
        raise ValueError("n_init exceeds n_max")
    pool = problem.pool
    if n_init > pool.shape[0]:
        raise ValueError("n_init exceeds pool size")
    scaled = np.ascontiguousarray(ScalingTransform(compute_bounds(problem))(pool))
    if state is None:
        state = LearnerState(problem.dim, problem.n_targets)
    while state.n_feasible < n_init and state.query_count < n_max:
        free = np.array([j for j in range(pool.shape[0]) if not state.is_consumed(j)])
        if free.size == 0:
            break
        K = min(n_init - state.n_feasible, np.unique(scaled[free], axis=0).shape[0])
        centers = kmeans(scaled[free], K, rng)
        d2 = kernels.sq_dists(centers, scaled[free])
        taken = np.zeros(free.size, dtype=bool)
        for c in range(K):
            row = np.where(taken, np.inf, d2[c])
            pick = int(np.argmin(row))
            taken[pick] = True
            if state.query_count >= n_max:
                break
            j = int(free[pick])
            state.record(pool[j], oracle(pool[j]), pool_index=j)
    return InitResult(state, state.n_feasible >= n_init)
