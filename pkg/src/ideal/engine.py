"""Query selection and the active-learning loop.

Three strategies share the same initial design and retraining cadence:

* ``ideal``  maximizes the IDW acquisition
  ``a(x) = (1 + omega * rho(x)) * sum_i c_i(x) * (s2_i(x) + delta * z(x))``
* ``greedy`` maximizes the minimum scaled distance to the queried points
* ``random`` draws uniformly from the free pool or the box
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import kernels
from .core import (Bounds, LearnerState, Oracle, Problem, ScalingTransform,
                   compute_bounds)
from .density import DensityTable, compute_density
from .idw import DEFAULT_EPS, WeightKind, idw_terms
from .initialization import lhs_init, pool_init
from .optim import PsoConfig, pso_maximize

log = logging.getLogger(__name__)

STRATEGIES = ("ideal", "greedy", "random")


class PoolExhaustedError(RuntimeError):
    pass


class NoAdmissiblePointError(RuntimeError):
    pass


@dataclass
class AcquisitionConfig:
    delta: float = 0.0
    omega: float = 0.0
    # c_i(x): maps (P, n) raw features to (P, m) nonnegative weights; None is 1
    target_weights: Optional[Callable[[np.ndarray], np.ndarray]] = None
    weight_kind: WeightKind = WeightKind.EXPONENTIAL
    eps: float = DEFAULT_EPS

    def __post_init__(self):
        if self.delta < 0 or self.omega < 0:
            raise ValueError("delta and omega must be nonnegative")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if isinstance(self.weight_kind, str):
            self.weight_kind = WeightKind(self.weight_kind)


@dataclass
class EngineConfig:
    n_init: int
    n_max: int
    batch: int = 1
    strategy: str = "ideal"
    enum_limit: int = 20000
    k_nn: Optional[int] = None
    pso: PsoConfig = field(default_factory=PsoConfig)

    def __post_init__(self):
        if self.n_init < 1 or self.n_init > self.n_max:
            raise ValueError("need 1 <= n_init <= n_max")
        if self.batch < 1:
            raise ValueError("batch period must be at least 1")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")


@dataclass
class QueryRecord:
    query: int                    # 1-based position in the query sequence
    x: np.ndarray
    feasible: bool
    pool_index: Optional[int]
    phase: str                    # "init" or "select"
    metric: Optional[float] = None


@dataclass
class QueryTrace:
    records: list = field(default_factory=list)
    curve: list = field(default_factory=list)   # (query_count, metric) per retrain


@dataclass
class RunResult:
    success: bool
    predictor: object
    state: LearnerState
    trace: QueryTrace
    n_init_total: int

    @property
    def failed(self) -> bool:
        return not self.success


# ------------------------------------------------------------- acquisition


def acquisition_values(cfg: AcquisitionConfig, X, state: LearnerState, predictor,
                       t: ScalingTransform, rho=None) -> np.ndarray:
    """Acquisition at the rows of ``X`` (raw features).

    ``rho`` gives the density at each row; None means 1 (population mode).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if state.n_feasible == 0:
        raise ValueError("no labeled samples")
    Yhat = np.asarray(predictor.predict(X), dtype=float).reshape(X.shape[0], -1)
    s2, z = idw_terms(t(X), t(state.X), state.feasible_mask, state.Y, Yhat,
                      cfg.weight_kind, cfg.eps)
    terms = s2 + cfg.delta * z[:, None]
    if cfg.target_weights is not None:
        c = np.broadcast_to(np.asarray(cfg.target_weights(X), dtype=float), terms.shape)
        terms = c * terms
    total = terms.sum(axis=1)
    if cfg.omega:
        r = np.ones(X.shape[0]) if rho is None else np.asarray(rho, dtype=float)
        total = (1.0 + cfg.omega * r) * total
    return total


def acquisition(cfg: AcquisitionConfig, x, state: LearnerState, predictor,
                t: ScalingTransform, rho: Optional[float] = None) -> float:
    x = np.asarray(x, dtype=float).reshape(1, -1)
    r = None if rho is None else np.array([rho])
    return float(acquisition_values(cfg, x, state, predictor, t, r)[0])


# --------------------------------------------------------------- selection


def free_indices(state: LearnerState, M: int) -> np.ndarray:
    if not state.consumed:
        return np.arange(M)
    mask = np.ones(M, dtype=bool)
    mask[state.consumed] = False
    return np.nonzero(mask)[0]


def _nearest_free(point_scaled, scaled_pool, free) -> int:
    d2 = ((scaled_pool[free] - point_scaled) ** 2).sum(axis=1)
    return int(free[int(np.argmin(d2))])


def select_next_pool(cfg: AcquisitionConfig, state: LearnerState, predictor,
                     pool: np.ndarray, t: ScalingTransform,
                     density: Optional[DensityTable] = None, enum_limit: int = 20000,
                     rng=None, pso: Optional[PsoConfig] = None) -> int:
    """Pool index maximizing the acquisition, lowest index on ties.

    Pools larger than ``enum_limit`` are handled by maximizing over the
    pool's bounding box with PSO and taking the nearest free pool point.
    """
    free = free_indices(state, pool.shape[0])
    if free.size == 0:
        raise PoolExhaustedError("pool exhausted")
    if pool.shape[0] <= enum_limit:
        rho = None if density is None else density.rho[free]
        vals = acquisition_values(cfg, pool[free], state, predictor, t, rho)
        return int(free[int(np.argmax(vals))])
    x_star, _, _ = pso_maximize(
        lambda X: acquisition_values(cfg, X, state, predictor, t),
        t.bounds, pso, rng)
    return _nearest_free(t(x_star), t(pool), free)


def _admissible_mask(problem: Optional[Problem], X) -> np.ndarray:
    if problem is None or problem.known_constraint is None:
        return np.ones(X.shape[0], dtype=bool)
    return np.array([problem.admissible(x) for x in X])


def select_next_population(cfg: AcquisitionConfig, state: LearnerState, predictor,
                           problem: Problem, t: ScalingTransform, rng=None,
                           pso: Optional[PsoConfig] = None) -> np.ndarray:
    def objective(X):
        vals = acquisition_values(cfg, X, state, predictor, t)
        return np.where(_admissible_mask(problem, X), vals, -np.inf)

    x, best, _ = pso_maximize(objective, compute_bounds(problem), pso, rng)
    if not np.isfinite(best):
        raise NoAdmissiblePointError("PSO found no point satisfying the known constraints")
    return x


def select_next_greedy(state: LearnerState, t: ScalingTransform,
                       pool: Optional[np.ndarray] = None, problem: Optional[Problem] = None,
                       rng=None, pso: Optional[PsoConfig] = None):
    """Candidate farthest (in scaled squared distance) from every queried point.

    Pool mode returns a pool index, population mode a feature vector.
    """
    S = np.ascontiguousarray(t(state.X))
    if pool is not None:
        free = free_indices(state, pool.shape[0])
        if free.size == 0:
            raise PoolExhaustedError("pool exhausted")
        dmin = kernels.min_sq_dist(np.ascontiguousarray(t(pool[free])), S)
        return int(free[int(np.argmax(dmin))])

    def objective(X):
        vals = kernels.min_sq_dist(np.ascontiguousarray(t(X)), S)
        return np.where(_admissible_mask(problem, X), vals, -np.inf)

    x, best, _ = pso_maximize(objective, compute_bounds(problem), pso, rng)
    if not np.isfinite(best):
        raise NoAdmissiblePointError("PSO found no point satisfying the known constraints")
    return x


def select_next_random(rng: np.random.Generator, state: LearnerState,
                       pool: Optional[np.ndarray] = None, problem: Optional[Problem] = None,
                       max_tries: int = 10000):
    if pool is not None:
        free = free_indices(state, pool.shape[0])
        if free.size == 0:
            raise PoolExhaustedError("pool exhausted")
        return int(free[rng.integers(free.size)])
    box = compute_bounds(problem)
    for _ in range(max_tries):
        x = box.x_min + rng.random(box.dim) * (box.x_max - box.x_min)
        if problem.admissible(x):
            return x
    raise NoAdmissiblePointError("no admissible random point found")


# -------------------------------------------------------------------- loop


def run(problem: Problem, oracle: Oracle, predictor, engine: EngineConfig,
        acq: Optional[AcquisitionConfig] = None, rng=None,
        evaluate: Optional[Callable[[object, LearnerState], float]] = None) -> RunResult:
    """Run one active-learning session.

    ``predictor`` is refit on the labeled data whenever ``engine.batch``
    new feasible answers have arrived (and once more at the end if needed).
    ``evaluate(predictor, state)`` is called after every refit and its value stored
    on the trace. If the initial design cannot be completed within the
    budget, the result has ``success=False`` and no predictor.
    """
    acq = acq or AcquisitionConfig()
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    init_rng, select_rng = rng.spawn(2)
    bounds = compute_bounds(problem)
    t = ScalingTransform(bounds)
    trace = QueryTrace()

    if problem.is_pool:
        init = pool_init(problem, oracle, engine.n_init, engine.n_max, init_rng)
    else:
        init = lhs_init(problem, oracle, engine.n_init, engine.n_max, init_rng)
    state = init.state
    fmask = state.feasible_mask
    for k in range(state.query_count):
        trace.records.append(QueryRecord(k + 1, state.X[k].copy(), bool(fmask[k]),
                                         state.pool_index[k], "init"))
    if not init.success:
        log.info("initialization failed after %d queries", state.query_count)
        return RunResult(False, None, state, trace, state.query_count)
    n_init_total = state.query_count

    density = None
    if problem.is_pool and engine.strategy == "ideal" and acq.omega > 0:
        density = compute_density(t, problem.pool, engine.k_nn)

    def refit():
        X, Y = state.labeled()
        predictor.fit(X, Y)
        if evaluate is not None:
            value = float(evaluate(predictor, state))
            trace.curve.append((state.query_count, value))
            trace.records[-1].metric = value

    refit()
    pending = 0
    while state.query_count < engine.n_max:
        if problem.is_pool and len(state.consumed) >= problem.pool.shape[0]:
            break
        pool_index = None
        if problem.is_pool:
            if engine.strategy == "ideal":
                pool_index = select_next_pool(acq, state, predictor, problem.pool, t,
                                              density, engine.enum_limit, select_rng,
                                              engine.pso)
            elif engine.strategy == "greedy":
                pool_index = select_next_greedy(state, t, pool=problem.pool)
            else:
                pool_index = select_next_random(select_rng, state, pool=problem.pool)
            x = problem.pool[pool_index]
        else:
            if engine.strategy == "ideal":
                x = select_next_population(acq, state, predictor, problem, t,
                                           select_rng, engine.pso)
            elif engine.strategy == "greedy":
                x = select_next_greedy(state, t, problem=problem, rng=select_rng,
                                       pso=engine.pso)
            else:
                x = select_next_random(select_rng, state, problem=problem)
        ok = state.record(x, oracle(x), pool_index=pool_index)
        trace.records.append(QueryRecord(state.query_count, np.array(x, dtype=float),
                                         ok, pool_index, "select"))
        if ok:
            pending += 1
            if pending >= engine.batch:
                refit()
                pending = 0
    if pending:
        refit()
    return RunResult(True, predictor, state, trace, n_init_total)
