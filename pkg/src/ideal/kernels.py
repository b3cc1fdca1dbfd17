"""Numeric hot loops.

Every kernel exists twice: a vectorized numpy version (``*_np``) and a
loop version compiled with numba (``*_nb``). The public names bound at the
bottom of the module point at the numba variants unless numba is missing or
the environment variable ``IDEAL_DISABLE_NUMBA`` is set to a truthy value.

All geometry kernels take coordinates that are already scaled to [-1, 1].
"""

import math
import os

import numpy as np

try:
    import numba
    import numba.extending
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

_FLAG = os.environ.get("IDEAL_DISABLE_NUMBA", "").strip().lower()
USE_NUMBA = numba is not None and _FLAG not in ("1", "true", "yes", "on")

TWO_OVER_PI = 2.0 / math.pi


def _jit(fn):
    if numba is None:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


def _jitable(fn):
    # plain function from Python, inlined when called from compiled code
    if numba is None:
        return fn
    return numba.extending.register_jitable(fn)


# ---------------------------------------------------------------- geometry


def sq_dists_np(A, B):
    diff = A[:, None, :] - B[None, :, :]
    return np.einsum("pkn,pkn->pk", diff, diff)


def _sq_dists_loops(A, B):
    P, n = A.shape
    N = B.shape[0]
    out = np.empty((P, N))
    for p in range(P):
        for k in range(N):
            acc = 0.0
            for j in range(n):
                d = A[p, j] - B[k, j]
                acc += d * d
            out[p, k] = acc
    return out


def min_sq_dist_np(C, S):
    return sq_dists_np(C, S).min(axis=1)


def _min_sq_dist_loops(C, S):
    P, n = C.shape
    N = S.shape[0]
    out = np.empty(P)
    for p in range(P):
        best = np.inf
        for k in range(N):
            acc = 0.0
            for j in range(n):
                d = C[p, j] - S[k, j]
                acc += d * d
            if acc < best:
                best = acc
        out[p] = best
    return out


def knn_mean_dist_np(X, k):
    d2 = sq_dists_np(X, X)
    np.fill_diagonal(d2, np.inf)
    nearest = np.partition(d2, k - 1, axis=1)[:, :k]
    return np.sqrt(nearest).mean(axis=1)


def _knn_mean_dist_loops(X, k):
    M, n = X.shape
    out = np.empty(M)
    row = np.empty(M)
    for p in range(M):
        for q in range(M):
            acc = 0.0
            for j in range(n):
                d = X[p, j] - X[q, j]
                acc += d * d
            row[q] = acc
        row[p] = np.inf
        if k >= M - 1:
            # every other point is a neighbour, no selection needed
            acc = 0.0
            for q in range(M):
                if q != p:
                    acc += math.sqrt(row[q])
            out[p] = acc / (M - 1)
        else:
            out[p] = np.sqrt(np.partition(row, k - 1)[:k]).mean()
    return out


# --------------------------------------------------------------------- IDW


def idw_terms_np(C, S, feasible, Y, Yhat, exponential, eps):
    """IDW variance (P, m) and IDW distance (P,) for candidates ``C``.

    ``S`` holds every queried sample; ``feasible`` flags the rows of ``S``
    whose targets ``Y`` are defined (other rows of ``Y`` are ignored). The
    coefficients v_k are normalized over all samples and the variance sums
    them over the feasible ones only, so s2 fades out next to infeasible
    queries.
    """
    P = C.shape[0]
    m = Yhat.shape[1]
    s2 = np.zeros((P, m))
    z = np.ones(P)
    if S.shape[0] == 0:
        return s2, z
    d2 = sq_dists_np(C, S)
    hit = d2 <= eps
    safe = np.where(hit, 1.0, d2)
    basic = np.where(hit, 0.0, 1.0 / safe)
    w = np.where(hit, 0.0, np.exp(-safe) / safe) if exponential else basic

    wsum = w.sum(axis=1)
    with np.errstate(divide="ignore"):
        z = np.where(wsum > 0.0, TWO_OVER_PI * np.arctan(1.0 / wsum), 1.0)
    snap = hit.any(axis=1)
    z = np.where(snap, 0.0, z)

    fmask = feasible.astype(bool)
    if not fmask.any():
        return s2, z
    underflow = wsum <= 0.0
    if underflow.any():
        w = np.where(underflow[:, None], basic, w)
        wsum = w.sum(axis=1)
    v = np.where(snap[:, None], 0.0, w / np.where(wsum > 0.0, wsum, 1.0)[:, None])
    if snap.any():
        first = np.argmax(hit, axis=1)
        rows = np.nonzero(snap)[0]
        v[rows, first[rows]] = 1.0
    resid2 = (Y[fmask][None, :, :] - Yhat[:, None, :]) ** 2
    s2 = np.einsum("pk,pki->pi", v[:, fmask], resid2)
    return s2, z


def _idw_terms_loops(C, S, feasible, Y, Yhat, exponential, eps):
    P, n = C.shape
    N = S.shape[0]
    m = Yhat.shape[1]
    s2 = np.zeros((P, m))
    z = np.ones(P)
    if N == 0:
        return s2, z
    d2 = np.empty(N)
    for p in range(P):
        snap = -1
        for k in range(N):
            acc = 0.0
            for j in range(n):
                d = C[p, j] - S[k, j]
                acc += d * d
            d2[k] = acc
            if acc <= eps and snap < 0:
                snap = k
        if snap >= 0:
            z[p] = 0.0
            if feasible[snap]:
                for i in range(m):
                    r = Y[snap, i] - Yhat[p, i]
                    s2[p, i] = r * r
            continue
        wsum = 0.0
        bsum = 0.0
        for k in range(N):
            b = 1.0 / d2[k]
            bsum += b
            wsum += math.exp(-d2[k]) * b if exponential else b
        if wsum > 0.0:
            z[p] = TWO_OVER_PI * math.atan(1.0 / wsum)
        use_basic = wsum <= 0.0
        denom = bsum if use_basic else wsum
        for k in range(N):
            if not feasible[k]:
                continue
            w = 1.0 / d2[k]
            if exponential and not use_basic:
                w = math.exp(-d2[k]) * w
            v = w / denom
            for i in range(m):
                r = Y[k, i] - Yhat[p, i]
                s2[p, i] += v * r * r
    return s2, z


# --------------------------------------------------------------------- MLP
# Parameters live in one flat vector; layer l owns a row-major (fan_in,
# fan_out) weight block followed by its bias. Hidden activation codes:
# 0 logistic, 1 relu, 2 tanh. Output codes: 0 linear, 1 logistic.


@_jitable
def _activate(Z, code):
    if code == 0:
        return 0.5 * (1.0 + np.tanh(0.5 * Z))
    if code == 1:
        return np.maximum(Z, 0.0)
    return np.tanh(Z)


@_jitable
def _activate_deriv(A, code):
    if code == 0:
        return A * (1.0 - A)
    if code == 1:
        return (A > 0.0) * 1.0
    return 1.0 - A * A


def mlp_forward_np(theta, sizes, X, hidden, output):
    A = X
    off = 0
    L = sizes.shape[0] - 1
    for l in range(L):
        fi = sizes[l]
        fo = sizes[l + 1]
        W = theta[off:off + fi * fo].reshape((fi, fo))
        off += fi * fo
        b = theta[off:off + fo]
        off += fo
        Z = np.dot(A, W) + b
        if l < L - 1:
            A = _activate(Z, hidden)
        elif output == 1:
            A = _activate(Z, 0)
        else:
            A = Z
    return A


@_jitable
def mlp_loss_grad_np(theta, sizes, X, Y, hidden, output, alpha):
    """Mean per-sample loss plus ``alpha * |W|^2 / (2 N)``, and its gradient.

    Linear output pairs with half squared error, logistic output with binary
    cross-entropy; both give ``(out - y) / N`` at the output pre-activation.
    Biases are not penalized.
    """
    N = X.shape[0]
    L = sizes.shape[0] - 1
    offs = np.zeros(L + 1, dtype=np.int64)
    for l in range(L):
        offs[l + 1] = offs[l] + sizes[l] * sizes[l + 1] + sizes[l + 1]

    acts = [X]
    Z = X
    for l in range(L):
        fi = sizes[l]
        fo = sizes[l + 1]
        W = theta[offs[l]:offs[l] + fi * fo].reshape((fi, fo))
        b = theta[offs[l] + fi * fo:offs[l + 1]]
        Z = np.dot(acts[l], W) + b
        if l < L - 1:
            acts.append(_activate(Z, hidden))
        elif output == 1:
            acts.append(_activate(Z, 0))
        else:
            acts.append(Z)
    out = acts[L]

    if output == 1:
        # softplus(z) - y z, finite for large |z|
        loss = np.sum(np.maximum(Z, 0.0) + np.log1p(np.exp(-np.abs(Z))) - Y * Z)
    else:
        loss = 0.5 * np.sum((out - Y) ** 2)
    penalty = 0.0
    for l in range(L):
        W = theta[offs[l]:offs[l] + sizes[l] * sizes[l + 1]]
        penalty += np.dot(W, W)
    loss = (loss + 0.5 * alpha * penalty) / N

    grad = np.zeros_like(theta)
    delta = (out - Y) / N
    for l in range(L - 1, -1, -1):
        fi = sizes[l]
        fo = sizes[l + 1]
        W = theta[offs[l]:offs[l] + fi * fo].reshape((fi, fo))
        gW = np.dot(acts[l].T, delta) + (alpha / N) * W
        grad[offs[l]:offs[l] + fi * fo] = gW.ravel()
        grad[offs[l] + fi * fo:offs[l + 1]] = delta.sum(axis=0)
        if l > 0:
            delta = np.dot(delta, W.T) * _activate_deriv(acts[l], hidden)
    return loss, grad


def adam_fit_np(theta0, sizes, X, Y, hidden, output, alpha, lr, max_epochs, tol):
    """Full-batch Adam with step rejection.

    A step that raises the loss is undone, momentum is cleared and the step
    size halved, so the accepted loss sequence never increases. Stops early
    once the loss improved by less than ``tol`` (relative) over 50 accepted
    steps. Returns the parameters and the accepted loss trace.
    """
    b1 = 0.9
    b2 = 0.999
    tiny = 1e-8
    window = 50
    theta = theta0.copy()
    loss, g = mlp_loss_grad_np(theta, sizes, X, Y, hidden, output, alpha)
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    t = 0
    step = lr
    trace = np.empty(max_epochs + 1)
    trace[0] = loss
    n_acc = 1
    for _ in range(max_epochs):
        t += 1
        m_new = b1 * m + (1.0 - b1) * g
        v_new = b2 * v + (1.0 - b2) * g * g
        mhat = m_new / (1.0 - b1 ** t)
        vhat = v_new / (1.0 - b2 ** t)
        cand = theta - step * mhat / (np.sqrt(vhat) + tiny)
        c_loss, c_g = mlp_loss_grad_np(cand, sizes, X, Y, hidden, output, alpha)
        if c_loss <= loss:
            theta = cand
            loss = c_loss
            g = c_g
            m = m_new
            v = v_new
            trace[n_acc] = loss
            n_acc += 1
            if step < lr:
                step = min(lr, step * 1.5)
            if n_acc > window:
                prev = trace[n_acc - 1 - window]
                if prev - loss <= tol * max(prev, 1e-12):
                    break
        else:
            m[:] = 0.0
            t = 0
            step *= 0.5
            if step < lr * 1e-8:
                break
    return theta, trace[:n_acc].copy()


# ------------------------------------------------------------------ binding

sq_dists_nb = _jit(_sq_dists_loops)
min_sq_dist_nb = _jit(_min_sq_dist_loops)
knn_mean_dist_nb = _jit(_knn_mean_dist_loops)
idw_terms_nb = _jit(_idw_terms_loops)
mlp_forward_nb = _jit(mlp_forward_np)
mlp_loss_grad_nb = _jit(mlp_loss_grad_np)
adam_fit_nb = _jit(adam_fit_np)

if USE_NUMBA:
    sq_dists = sq_dists_nb
    min_sq_dist = min_sq_dist_nb
    knn_mean_dist = knn_mean_dist_nb
    idw_terms = idw_terms_nb
    mlp_forward = mlp_forward_nb
    mlp_loss_grad = mlp_loss_grad_nb
    adam_fit = adam_fit_nb
else:
    sq_dists = sq_dists_np
    min_sq_dist = min_sq_dist_np
    knn_mean_dist = knn_mean_dist_np
    idw_terms = idw_terms_np
    mlp_forward = mlp_forward_np
    mlp_loss_grad = mlp_loss_grad_np
    adam_fit = adam_fit_np
