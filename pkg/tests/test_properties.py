"""Property-based checks of the invariants."""

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ideal import kernels
from ideal.bench import median_curve
from ideal.core import (Bounds, LearnerState, Problem, ScalingTransform, compute_bounds, scale,
                        scaled_sq_distance)
from ideal.density import compute_density
from ideal.engine import (AcquisitionConfig, EngineConfig, acquisition_values, run,
                          select_next_greedy, select_next_pool, select_next_random)
from ideal.idw import WeightKind, idw_coefficients, idw_terms
from ideal.initialization import lhs_sample
from ideal.optim import PsoConfig, pso_maximize
from ideal.predictor import MLP, MlpConfig, TargetScaler, init_params, layer_sizes

SETTINGS = settings(max_examples=40, deadline=None,
                    suppress_health_check=[HealthCheck.too_slow])
coord = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


@st.composite
def point_sets(draw, min_n=1, max_n=4, min_rows=1, max_rows=12):
    n = draw(st.integers(min_n, max_n))
    rows = draw(st.integers(min_rows, max_rows))
    pts = draw(arrays(float, (rows, n), elements=st.floats(-1, 1, allow_nan=False)))
    return pts


@st.composite
def idw_case(draw):
    S = draw(point_sets(min_rows=1, max_rows=10))
    n = S.shape[1]
    C = draw(arrays(float, (draw(st.integers(1, 8)), n), elements=st.floats(-1.5, 1.5)))
    feas = np.array(draw(st.lists(st.booleans(), min_size=S.shape[0], max_size=S.shape[0])))
    m = draw(st.integers(1, 3))
    Y = draw(arrays(float, (S.shape[0], m), elements=st.floats(-10, 10)))
    Yhat = draw(arrays(float, (C.shape[0], m), elements=st.floats(-10, 10)))
    kind = draw(st.sampled_from(list(WeightKind)))
    return C, S, feas, Y, Yhat, kind


# ---------------------------------------------------------------- scaling


@SETTINGS
@given(st.data())
def test_scale_is_affine(data):
    n = data.draw(st.integers(1, 4))
    lo = np.array(data.draw(st.lists(coord, min_size=n, max_size=n)))
    width = np.array(data.draw(st.lists(st.floats(1e-2, 1e3), min_size=n, max_size=n)))
    t = ScalingTransform(Bounds(lo, lo + width))
    x = lo + width * np.array(data.draw(st.lists(st.floats(0, 1), min_size=n, max_size=n)))
    y = lo + width * np.array(data.draw(st.lists(st.floats(0, 1), min_size=n, max_size=n)))
    a = data.draw(st.floats(-2, 2))
    np.testing.assert_allclose(scale(t, a * x + (1 - a) * y),
                               a * scale(t, x) + (1 - a) * scale(t, y), atol=1e-9)
    assert np.all(np.abs(scale(t, x)) <= 1 + 1e-12)
    d = scaled_sq_distance(t, x, y)
    assert d >= 0 and d == pytest.approx(scaled_sq_distance(t, y, x), rel=1e-12, abs=1e-15)


@SETTINGS
@given(point_sets(min_rows=2), st.data())
def test_distance_invariant_under_affine_rescaling(pool, data):
    n = pool.shape[1]
    gain = np.array(data.draw(st.lists(st.floats(1e-2, 1e2), min_size=n, max_size=n)))
    shift = np.array(data.draw(st.lists(st.floats(-1e2, 1e2), min_size=n, max_size=n)))
    moved = pool * gain + shift
    # widths must survive the shift in floating point
    assume(np.all(np.ptp(pool, axis=0) * gain > 1e-6 * (np.abs(moved).max(axis=0) + 1)))
    t = ScalingTransform(Bounds(pool.min(0), pool.max(0)))
    t2 = ScalingTransform(Bounds(moved.min(0), moved.max(0)))
    for i in range(min(4, pool.shape[0])):
        for j in range(pool.shape[0]):
            assert scaled_sq_distance(t2, moved[i], moved[j]) == pytest.approx(
                scaled_sq_distance(t, pool[i], pool[j]), abs=1e-9)


# -------------------------------------------------------------------- IDW


@SETTINGS
@given(idw_case())
def test_idw_terms_ranges(case):
    C, S, feas, Y, Yhat, kind = case
    s2, z = idw_terms(C, S, feas, Y, Yhat, kind)
    assert np.all(s2 >= 0)
    assert np.all((z >= 0) & (z <= 1))
    d2 = ((C[:, None] - S[None]) ** 2).sum(-1)
    on = (d2 <= 1e-12).any(axis=1)
    assert np.all(z[on] == 0)
    # strictly positive away from samples (where the weights are not huge)
    away = d2.min(axis=1) > 1e-6
    assert np.all(z[away] > 0)


@SETTINGS
@given(idw_case())
def test_idw_zero_at_samples_and_interpolation(case):
    _, S, feas, Y, _, kind = case
    # predict exactly the stored targets at each sample
    s2, z = idw_terms(S, S, feas, Y, Y, kind)
    np.testing.assert_array_equal(z, 0.0)
    d2 = ((S[:, None] - S[None]) ** 2).sum(-1)
    for k in range(S.shape[0]):
        j = int(np.argmax(d2[k] <= 1e-12))   # first coincident sample
        if feas[j] and np.array_equal(Y[j], Y[k]):
            np.testing.assert_array_equal(s2[k], 0.0)


@SETTINGS
@given(point_sets(min_rows=1), st.data())
def test_coefficients_sum_to_one(S, data):
    n = S.shape[1]
    x = np.array(data.draw(st.lists(st.floats(-2, 2), min_size=n, max_size=n)))
    kind = data.draw(st.sampled_from(list(WeightKind)))
    t = ScalingTransform(Bounds(-np.ones(n), np.ones(n)))
    v = idw_coefficients(t, x, S, kind)
    assert v.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all((v >= 0) & (v <= 1))


@SETTINGS
@given(idw_case(), st.data())
def test_adding_a_sample_never_increases_z(case, data):
    C, S, feas, Y, Yhat, kind = case
    extra = np.array(data.draw(st.lists(st.floats(-1, 1), min_size=S.shape[1],
                                        max_size=S.shape[1])))
    _, z1 = idw_terms(C, S, feas, Y, Yhat, kind)
    _, z2 = idw_terms(C, np.vstack([S, extra]), np.append(feas, False),
                      np.vstack([Y, np.zeros((1, Y.shape[1]))]), Yhat, kind)
    assert np.all(z2 <= z1 + 1e-15)


# ---------------------------------------------------------------- density


@SETTINGS
@given(point_sets(min_rows=3, max_rows=30), st.data())
def test_density_range_and_permutation(pool, data):
    pool = np.unique(pool, axis=0)
    if pool.shape[0] < 3:
        return
    t = ScalingTransform(Bounds(pool.min(0), pool.max(0)))
    u = t(pool)
    if np.unique(u, axis=0).shape[0] < u.shape[0]:
        return   # degenerate coordinates can merge distinct points
    k = data.draw(st.integers(1, pool.shape[0] - 1))
    rho = compute_density(t, pool, k).rho
    assert np.all((rho > 0) & (rho <= 1)) and rho.max() == 1.0
    perm = np.random.default_rng(0).permutation(pool.shape[0])
    np.testing.assert_allclose(compute_density(t, pool[perm], k).rho, rho[perm], rtol=1e-12)


# ---------------------------------------------------------------- engine


@st.composite
def pool_states(draw, max_pool=1000):
    M = draw(st.integers(5, max_pool))
    n = draw(st.integers(1, 3))
    seed = draw(st.integers(0, 2 ** 32 - 1))
    rng = np.random.default_rng(seed)
    pool = rng.uniform(-1, 1, (M, n)) * rng.uniform(0.1, 10, n)
    q = draw(st.integers(1, min(6, M - 1)))
    idx = rng.choice(M, q, replace=False)
    state = LearnerState(dim=n, n_targets=1)
    for j in idx:
        y = None if rng.random() < 0.2 else np.array([np.sin(pool[j].sum())])
        state.record(pool[j], y, int(j))
    if state.n_feasible == 0:
        state.record(pool[[j for j in range(M) if j not in idx][0]], np.array([0.0]),
                     [j for j in range(M) if j not in idx][0])
    return pool, state, seed


class Smooth:
    def fit(self, X, Y):
        pass

    def predict(self, X):
        X = np.atleast_2d(X)
        return np.cos(X.sum(axis=1, keepdims=True))


@settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(pool_states(), st.floats(0, 5), st.floats(0, 1))
def test_enumeration_matches_brute_force(case, delta, omega):
    pool, state, _ = case
    t = ScalingTransform(Bounds(pool.min(0), pool.max(0)))
    cfg = AcquisitionConfig(delta=delta, omega=omega)
    rho = np.ones(pool.shape[0])
    j = select_next_pool(cfg, state, Smooth(), pool, t)
    vals = acquisition_values(cfg, pool, state, Smooth(), t, rho)
    free = [k for k in range(pool.shape[0]) if k not in state.consumed]
    best = max(free, key=lambda k: (vals[k], -k))
    assert j == best


@settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(pool_states())
def test_greedy_matches_brute_force(case):
    pool, state, seed = case
    t = ScalingTransform(Bounds(pool.min(0), pool.max(0)))
    u, S = t(pool), t(state.X)
    free = [k for k in range(pool.shape[0]) if k not in state.consumed]
    score = {k: min(float(((u[k] - s) ** 2).sum()) for s in S) for k in free}
    best = max(free, key=lambda k: (score[k], -k))
    assert select_next_greedy(state, t, pool=pool) == best
    r = select_next_random(np.random.default_rng(seed), state, pool=pool)
    assert r in free


def _dyadic_pool(rng, M, n):
    return np.unique(rng.integers(-256, 257, (M, n)) / 64.0, axis=0)


@settings(max_examples=6, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(0, 1000), st.sampled_from(["ideal", "greedy", "random"]),
       st.lists(st.integers(-3, 3), min_size=2, max_size=2),
       st.lists(st.integers(-16, 16), min_size=2, max_size=2))
def test_scaling_argmax_invariance(seed, strategy, log2_gain, shift8):
    rng = np.random.default_rng(seed)
    pool = _dyadic_pool(rng, 120, 2)
    gain = 2.0 ** np.array(log2_gain)
    moved = pool * gain + np.array(shift8) / 8.0
    targets = np.sin(pool[:, 0]) + pool[:, 1] ** 2
    lookup = {}
    for p, q, y in zip(pool, moved, targets):
        lookup[p.tobytes()] = y
        lookup[q.tobytes()] = y

    def oracle(x):
        return np.array([lookup[np.asarray(x, dtype=float).tobytes()]])

    def go(P):
        model = MLP(MlpConfig(hidden=(4,), max_epochs=150), seed)
        eng = EngineConfig(4, 12, strategy=strategy)
        res = run(Problem.from_pool(P), oracle, model, eng,
                  AcquisitionConfig(delta=1.0, omega=0.5), rng=seed)
        return res.state.pool_index

    assert go(pool) == go(moved)


# -------------------------------------------------------------------- MLP


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 3), st.lists(st.integers(1, 4), min_size=1, max_size=3),
       st.integers(1, 3), st.sampled_from([(0, 0), (0, 1), (2, 0), (2, 1)]),
       st.floats(0, 1), st.integers(0, 2 ** 32 - 1))
def test_gradient_finite_differences(n_in, hidden, n_out, codes, alpha, seed):
    rng = np.random.default_rng(seed)
    sizes = layer_sizes(n_in, hidden, n_out)
    theta = init_params(sizes, rng)
    X = rng.normal(size=(7, n_in))
    Y = rng.random((7, n_out)) if codes[1] else rng.normal(size=(7, n_out))
    _, g = kernels.mlp_loss_grad(theta, sizes, X, Y, codes[0], codes[1], alpha)
    h = 1e-6
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = h
        fd = (kernels.mlp_loss_grad(theta + e, sizes, X, Y, *codes, alpha)[0]
              - kernels.mlp_loss_grad(theta - e, sizes, X, Y, *codes, alpha)[0]) / (2 * h)
        assert abs(g[i] - fd) <= 1e-4 * max(abs(fd), 1e-3)


@SETTINGS
@given(arrays(float, (6, 2), elements=st.floats(-1e4, 1e4)))
def test_target_scaler_round_trip(Y):
    sc = TargetScaler.fit(Y)
    np.testing.assert_allclose(sc.inverse(sc.transform(Y)), Y, atol=1e-9 * max(1, np.abs(Y).max()))


# ---------------------------------------------------------- init and PSO


@SETTINGS
@given(st.integers(1, 40), st.integers(1, 4), st.integers(0, 2 ** 32 - 1))
def test_lhs_marginal_stratification(count, n, seed):
    rng = np.random.default_rng(seed)
    lo = rng.uniform(-5, 5, n)
    hi = lo + rng.uniform(0.5, 5, n)
    X = lhs_sample(Bounds(lo, hi), count, rng)
    bins = np.floor((X - lo) / (hi - lo) * count).astype(int)
    for j in range(n):
        np.testing.assert_array_equal(np.sort(bins[:, j]), np.arange(count))


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2 ** 32 - 1))
def test_pso_stays_in_box_and_improves(n, seed):
    rng = np.random.default_rng(seed)
    lo = rng.uniform(-3, 0, n)
    b = Bounds(lo, lo + rng.uniform(0.1, 3, n))
    c = rng.normal(size=n) * 3
    x, fb, hist = pso_maximize(lambda X: -np.abs(X - c).sum(axis=1) + np.sin(7 * X).sum(axis=1),
                               b, PsoConfig(iterations=40), rng)
    assert b.contains(x) and np.all(np.diff(hist) >= 0) and fb == hist[-1]


# ------------------------------------------------------------------ bench


@SETTINGS
@given(st.lists(st.lists(st.tuples(st.integers(1, 6), st.floats(0, 10)), min_size=1,
                         max_size=5), min_size=1, max_size=6), st.randoms())
def test_median_curve_permutation_invariant(curves, rnd):
    curves = [sorted(dict(c).items()) for c in curves]
    shuffled = list(curves)
    rnd.shuffle(shuffled)
    assert median_curve(curves) == median_curve(shuffled)
