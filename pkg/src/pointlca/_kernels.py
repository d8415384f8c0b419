"""Hot loops: per-point dense layers and LCA membrane dynamics.

Both kernels exist as a numba loop version and a numpy version that
accumulate in the same order (ascending input index, starting from 0.0,
bias added last), so the two backends agree bitwise.  ``dense`` and
``lca_dynamics`` dispatch on ``_accel.USE_NUMBA``.
"""
import numpy as np

from ._accel import USE_NUMBA, njit, prange


@njit(parallel=True, cache=True)
def dense_numba(X, WT, bias, relu):
    # WT is the (in_dim, out_dim) transpose so the inner loop runs over
    # contiguous outputs; each output still sums in ascending input index.
    P, I = X.shape
    O = WT.shape[1]
    out = np.zeros((P, O), dtype=np.float64)
    for p in prange(P):
        row = out[p]
        for k in range(I):
            xk = X[p, k]
            wk = WT[k]
            for o in range(O):
                row[o] += xk * wk[o]
        for o in range(O):
            v = row[o] + bias[o]
            if relu and v < 0.0:
                v = 0.0
            row[o] = v
    return out


def dense_numpy(X, W, bias, relu):
    P, I = X.shape
    acc = np.zeros((P, W.shape[0]), dtype=np.float64)
    for k in range(I):
        acc += X[:, k:k + 1] * W[:, k]
    acc += bias
    if relu:
        np.maximum(acc, 0.0, out=acc)
    return acc


@njit(parallel=True, cache=True)
def lca_dynamics_numba(b, G, rate, lam, steps, guard):
    M = b.size
    u = np.zeros(M)
    a = np.zeros(M)
    inh = np.zeros(M)
    active = np.empty(M, dtype=np.int64)
    counts = np.zeros(steps, dtype=np.int64)
    for k in range(steps):
        na = 0
        for m in range(M):
            if a[m] != 0.0:
                active[na] = m
                na += 1
        for i in prange(M):
            acc = 0.0
            for j in range(na):
                m = active[j]
                if m != i:
                    acc += G[i, m] * a[m]
            inh[i] = acc
        for i in range(M):
            u[i] = u[i] + rate * (b[i] - u[i] - inh[i])
        for i in range(M):
            v = u[i]
            if not np.isfinite(v) or abs(v) > guard:
                return u, a, counts, k + 1
        n_active = 0
        for i in range(M):
            v = u[i]
            if v >= lam:
                a[i] = v - lam
            elif v <= -lam:
                a[i] = v + lam
            else:
                a[i] = 0.0
            if a[i] != 0.0:
                n_active += 1
        counts[k] = n_active
    return u, a, counts, 0


def lca_dynamics_numpy(b, G, rate, lam, steps, guard):
    M = b.size
    u = np.zeros(M)
    a = np.zeros(M)
    counts = np.zeros(steps, dtype=np.int64)
    for k in range(steps):
        inh = np.zeros(M)
        for m in np.flatnonzero(a):
            col = G[:, m] * a[m]
            col[m] = 0.0
            inh += col
        u = u + rate * (b - u - inh)
        if not np.all(np.isfinite(u)) or np.abs(u).max() > guard:
            return u, a, counts, k + 1
        a = np.where(u >= lam, u - lam, np.where(u <= -lam, u + lam, 0.0))
        counts[k] = np.count_nonzero(a)
    return u, a, counts, 0


def dense(X, W, bias, relu):
    X = np.ascontiguousarray(X, dtype=np.float64)
    W = np.ascontiguousarray(W, dtype=np.float64)
    bias = np.ascontiguousarray(bias, dtype=np.float64)
    if USE_NUMBA:
        return dense_numba(X, np.ascontiguousarray(W.T), bias, relu)
    return dense_numpy(X, W, bias, relu)


def lca_dynamics(b, G, rate, lam, steps, guard):
    b = np.ascontiguousarray(b, dtype=np.float64)
    G = np.ascontiguousarray(G, dtype=np.float64)
    if USE_NUMBA:
        return lca_dynamics_numba(b, G, float(rate), float(lam), int(steps), float(guard))
    return lca_dynamics_numpy(b, G, float(rate), float(lam), int(steps), float(guard))
