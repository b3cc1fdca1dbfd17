"""Representativeness weights for pool points."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import ScalingTransform


@dataclass(frozen=True)
class DensityTable:
    rho: np.ndarray
    k_nn: int


def compute_density(t: ScalingTransform, pool, k_nn: int | None = None) -> DensityTable:
    """Density of each pool point from the mean distance to its ``k_nn``
    nearest neighbours, normalized so the densest point gets 1.

    ``k_nn`` defaults to the feature dimension. Evaluated in log space since
    ``d**n`` leaves the float range for moderate ``n``.
    """
    pool = np.atleast_2d(np.asarray(pool, dtype=float))
    M, n = pool.shape
    if k_nn is None:
        k_nn = n
    if k_nn < 1:
        raise ValueError("k_nn must be positive")
    if M <= k_nn:
        raise ValueError(f"pool of {M} points needs more than k_nn={k_nn} entries")
    d = kernels.knn_mean_dist(np.ascontiguousarray(t(pool)), int(k_nn))
    if np.any(d <= 0.0):
        raise ValueError("duplicate pool points give zero neighbour distance")
    logd = np.log(d)
    rho = np.exp(n * (logd.min() - logd))
    return DensityTable(rho=rho, k_nn=int(k_nn))
