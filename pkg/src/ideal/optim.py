"""Global-best particle swarm maximization over a box."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Bounds


@dataclass
class PsoConfig:
    swarm_size: int = 30
    iterations: int = 200
    inertia: float = 0.729
    cognitive: float = 1.494
    social: float = 1.494
    velocity_clamp: float = 0.5  # fraction of the box width

    def __post_init__(self):
        if self.swarm_size < 2:
            raise ValueError("swarm_size must be at least 2")
        if min(self.inertia, self.cognitive, self.social, self.velocity_clamp) <= 0:
            raise ValueError("PSO coefficients must be positive")


def _evaluate(f, X):
    vals = np.asarray(f(X), dtype=float).reshape(X.shape[0])
    return np.where(np.isfinite(vals), vals, -np.inf)


def pso_maximize(f, bounds: Bounds, config: PsoConfig | None = None,
                 rng: np.random.Generator | None = None):
    """Maximize ``f`` over ``bounds``.

    ``f`` takes a (P, n) array of positions and returns P values; non-finite
    values count as -inf. Particles leaving the box are clamped to the face
    and their velocity component reversed. Returns ``(x_best, f_best, history)``
    where ``history`` is the global best value after each iteration.
    """
    config = config or PsoConfig()
    rng = rng if rng is not None else np.random.default_rng()
    lo, hi = bounds.x_min, bounds.x_max
    width = hi - lo
    vmax = config.velocity_clamp * width
    P, n = config.swarm_size, bounds.dim

    X = lo + rng.random((P, n)) * width
    V = (rng.random((P, n)) * 2.0 - 1.0) * vmax
    vals = _evaluate(f, X)
    pbest, pbest_val = X.copy(), vals.copy()
    g = int(np.argmax(pbest_val))
    gbest, gbest_val = pbest[g].copy(), pbest_val[g]
    history = np.empty(config.iterations)

    for it in range(config.iterations):
        r1 = rng.random((P, n))
        r2 = rng.random((P, n))
        V = (config.inertia * V + config.cognitive * r1 * (pbest - X)
             + config.social * r2 * (gbest - X))
        V = np.clip(V, -vmax, vmax)
        X = X + V
        out = (X < lo) | (X > hi)
        X = np.clip(X, lo, hi)
        V = np.where(out, -V, V)
        vals = _evaluate(f, X)
        better = vals > pbest_val
        pbest[better] = X[better]
        pbest_val[better] = vals[better]
        g = int(np.argmax(pbest_val))
        if pbest_val[g] > gbest_val:
            gbest, gbest_val = pbest[g].copy(), pbest_val[g]
        history[it] = gbest_val
    return gbest, float(gbest_val), history
