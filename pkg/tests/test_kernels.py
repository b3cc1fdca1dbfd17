"""The numba kernels and their numpy fallbacks must agree."""

import os
import subprocess
import sys

import numpy as np
import pytest

from ideal import kernels
from ideal.predictor import init_params, layer_sizes

pytestmark = pytest.mark.skipif(kernels.numba is None, reason="numba not installed")


@pytest.fixture
def rng():
    return np.random.default_rng(11)


def test_sq_dists(rng):
    A, B = rng.normal(size=(30, 3)), rng.normal(size=(7, 3))
    np.testing.assert_allclose(kernels.sq_dists_nb(A, B), kernels.sq_dists_np(A, B), rtol=1e-13)


def test_min_sq_dist(rng):
    A, B = rng.normal(size=(30, 3)), rng.normal(size=(7, 3))
    np.testing.assert_allclose(kernels.min_sq_dist_nb(A, B), kernels.min_sq_dist_np(A, B),
                               rtol=1e-13)


@pytest.mark.parametrize("k", [1, 3, 39])
def test_knn_mean_dist(rng, k):
    X = rng.normal(size=(40, 2))
    np.testing.assert_allclose(kernels.knn_mean_dist_nb(X, k), kernels.knn_mean_dist_np(X, k),
                               rtol=1e-12)


@pytest.mark.parametrize("exponential", [True, False])
def test_idw_terms(rng, exponential):
    S = rng.uniform(-1, 1, (15, 2))
    C = np.vstack([rng.uniform(-1, 1, (50, 2)), S[:3]])
    feas = rng.random(15) < 0.6
    Y = rng.normal(size=(15, 2))
    Yhat = rng.normal(size=(C.shape[0], 2))
    a = kernels.idw_terms_np(C, S, feas, Y, Yhat, exponential, 1e-12)
    b = kernels.idw_terms_nb(C, S, feas, Y, Yhat, exponential, 1e-12)
    for x, y in zip(a, b):
        np.testing.assert_allclose(x, y, rtol=1e-12, atol=1e-15)


@pytest.mark.parametrize("hidden,output", [(0, 0), (1, 0), (2, 1)])
def test_mlp_kernels(rng, hidden, output):
    sizes = layer_sizes(3, (6, 4), 2)
    theta = init_params(sizes, rng)
    X = rng.normal(size=(20, 3))
    Y = rng.random((20, 2)) if output else rng.normal(size=(20, 2))
    np.testing.assert_allclose(kernels.mlp_forward_nb(theta, sizes, X, hidden, output),
                               kernels.mlp_forward_np(theta, sizes, X, hidden, output),
                               rtol=1e-12)
    la, ga = kernels.mlp_loss_grad_np(theta, sizes, X, Y, hidden, output, 0.1)
    lb, gb = kernels.mlp_loss_grad_nb(theta, sizes, X, Y, hidden, output, 0.1)
    assert la == pytest.approx(lb, rel=1e-12)
    np.testing.assert_allclose(ga, gb, rtol=1e-10, atol=1e-14)


def test_adam_fit_short_run_agrees(rng):
    # a few hundred steps stay within rounding of each other
    sizes = layer_sizes(1, (5, 5), 1)
    theta = init_params(sizes, rng)
    X = np.linspace(-1, 1, 12)[:, None]
    Y = np.sin(3 * X)
    ta, la = kernels.adam_fit_np(theta, sizes, X, Y, 0, 0, 1e-2, 0.01, 300, 0.0)
    tb, lb = kernels.adam_fit_nb(theta, sizes, X, Y, 0, 0, 1e-2, 0.01, 300, 0.0)
    assert la.shape == lb.shape
    np.testing.assert_allclose(ta, tb, rtol=1e-7, atol=1e-9)
    np.testing.assert_allclose(la, lb, rtol=1e-9)


def test_env_flag_selects_numpy():
    code = "from ideal import kernels; print(kernels.USE_NUMBA, kernels.idw_terms.__name__)"
    out = {}
    for flag in ("1", "0"):
        env = dict(os.environ, IDEAL_DISABLE_NUMBA=flag)
        out[flag] = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                                   text=True, check=True).stdout.split()
    assert out["1"] == ["False", "idw_terms_np"]
    assert out["0"][0] == "True"
