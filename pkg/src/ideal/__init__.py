"""Active learning by inverse-distance-weighted acquisition.

The engine picks which feature vectors to label next for a predictor, from a
finite pool or a bounded box, scoring candidates by an IDW estimate of the
prediction variance, an exploration term and (for pools) point density.
"""

from .core import (CLASSIFICATION, REGRESSION, Bounds, EmptyPoolError, LearnerState,
                   Problem, ScalingTransform, compute_bounds, scale, scaled_sq_distance)
from .density import DensityTable, compute_density
from .engine import (STRATEGIES, AcquisitionConfig, EngineConfig, RunResult, acquisition,
                     acquisition_values, run, select_next_greedy, select_next_pool,
                     select_next_population, select_next_random)
from .idw import WeightKind, idw_coefficients, idw_distance, idw_variance, idw_weight
from .initialization import kmeans, lhs_init, lhs_sample, pool_init
from .kernels import USE_NUMBA
from .optim import PsoConfig, pso_maximize
from .predictor import MLP, MlpConfig, TargetScaler

__version__ = "0.1.0"

__all__ = [
    "CLASSIFICATION", "REGRESSION", "Bounds", "EmptyPoolError", "LearnerState", "Problem",
    "ScalingTransform", "compute_bounds", "scale", "scaled_sq_distance",
    "DensityTable", "compute_density",
    "STRATEGIES", "AcquisitionConfig", "EngineConfig", "RunResult", "acquisition",
    "acquisition_values", "run", "select_next_greedy", "select_next_pool",
    "select_next_population", "select_next_random",
    "WeightKind", "idw_coefficients", "idw_distance", "idw_variance", "idw_weight",
    "kmeans", "lhs_init", "lhs_sample", "pool_init",
    "USE_NUMBA", "PsoConfig", "pso_maximize", "MLP", "MlpConfig", "TargetScaler",
]
