"""Numba-jitted implementations of the numeric hot kernels.

Same contracts as `numpy_impl` (flat float64 arrays for elementwise work,
in-place optimizer updates, integer norm codes).  Loops are fused where the
numpy versions would allocate temporaries, which is where the speedup on
small training batches comes from.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def leaky_relu_fwd(x, slope):
    out = np.empty_like(x)
    for i in range(x.shape[0]):
        xi = x[i]
        out[i] = xi if xi > 0.0 else slope * xi
    return out


@njit(cache=True)
def leaky_relu_bwd(x, g, slope):
    out = np.empty_like(x)
    for i in range(x.shape[0]):
        out[i] = g[i] if x[i] > 0.0 else slope * g[i]
    return out


@njit(cache=True)
def sigmoid_fwd(x):
    out = np.empty_like(x)
    for i in range(x.shape[0]):
        xi = x[i]
        if xi >= 0.0:
            out[i] = 1.0 / (1.0 + math.exp(-xi))
        else:
            ex = math.exp(xi)
            out[i] = ex / (1.0 + ex)
    return out


@njit(cache=True)
def sigmoid_bwd(y, g):
    out = np.empty_like(y)
    for i in range(y.shape[0]):
        out[i] = g[i] * y[i] * (1.0 - y[i])
    return out


@njit(cache=True)
def tanh_fwd(x):
    out = np.empty_like(x)
    for i in range(x.shape[0]):
        out[i] = math.tanh(x[i])
    return out


@njit(cache=True)
def tanh_bwd(y, g):
    out = np.empty_like(y)
    for i in range(y.shape[0]):
        out[i] = g[i] * (1.0 - y[i] * y[i])
    return out


@njit(cache=True)
def log_clamped_fwd(x, eps):
    out = np.empty_like(x)
    for i in range(x.shape[0]):
        xi = x[i]
        out[i] = math.log(xi if xi > eps else eps)
    return out


@njit(cache=True)
def log_clamped_bwd(x, g, eps):
    out = np.empty_like(x)
    for i in range(x.shape[0]):
        out[i] = g[i] / x[i] if x[i] >= eps else 0.0
    return out


@njit(cache=True)
def abs_fwd(x):
    out = np.empty_like(x)
    for i in range(x.shape[0]):
        out[i] = abs(x[i])
    return out


@njit(cache=True)
def abs_bwd(x, g):
    out = np.empty_like(x)
    for i in range(x.shape[0]):
        xi = x[i]
        s = 1.0 if xi > 0.0 else (-1.0 if xi < 0.0 else 0.0)
        out[i] = g[i] * s
    return out


@njit(cache=True)
def pow_fwd(x, p):
    out = np.empty_like(x)
    for i in range(x.shape[0]):
        out[i] = x[i] ** p
    return out


@njit(cache=True)
def pow_bwd(x, g, p):
    out = np.empty_like(x)
    for i in range(x.shape[0]):
        out[i] = g[i] * p * x[i] ** (p - 1.0)
    return out


@njit(cache=True)
def lp_power(x, ell):
    acc = 0.0
    if ell == 1:
        for i in range(x.shape[0]):
            acc += abs(x[i])
    else:
        for i in range(x.shape[0]):
            acc += x[i] * x[i]
    return acc


@njit(cache=True)
def lp_power_grad(x, g, ell):
    out = np.empty_like(x)
    if ell == 1:
        for i in range(x.shape[0]):
            xi = x[i]
            s = 1.0 if xi > 0.0 else (-1.0 if xi < 0.0 else 0.0)
            out[i] = g * s
    else:
        for i in range(x.shape[0]):
            out[i] = g * 2.0 * x[i]
    return out


@njit(cache=True)
def row_lp_power(x, ell):
    n = x.shape[0]
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        acc = 0.0
        if ell == 1:
            for j in range(x.shape[1]):
                acc += abs(x[i, j])
        else:
            for j in range(x.shape[1]):
                acc += x[i, j] * x[i, j]
        out[i] = acc
    return out


@njit(cache=True)
def adam_update(p, g, m, v, lr, b1, b2, eps, t):
    bc1 = 1.0 - b1 ** t
    bc2 = 1.0 - b2 ** t
    for i in range(p.shape[0]):
        gi = g[i]
        m[i] = b1 * m[i] + (1.0 - b1) * gi
        v[i] = b2 * v[i] + (1.0 - b2) * (gi * gi)
        p[i] -= lr * (m[i] / bc1) / (math.sqrt(v[i] / bc2) + eps)


@njit(cache=True)
def clip_inplace(x, c):
    for i in range(x.shape[0]):
        xi = x[i]
        if xi > c:
            x[i] = c
        elif xi < -c:
            x[i] = -c


@njit(cache=True)
def _dist(a, b, i, j, norm_code):
    acc = 0.0
    if norm_code == 1:
        for k in range(a.shape[1]):
            acc += abs(a[i, k] - b[j, k])
        return acc
    for k in range(a.shape[1]):
        t = a[i, k] - b[j, k]
        acc += t * t
    return math.sqrt(acc)


@njit(cache=True)
def pairwise_dist(a, b, norm_code):
    out = np.empty((a.shape[0], b.shape[0]), dtype=np.float64)
    for i in range(a.shape[0]):
        for j in range(b.shape[0]):
            out[i, j] = _dist(a, b, i, j, norm_code)
    return out


@njit(cache=True)
def closed_form_eval(points, x_train, v_train, norm_code):
    q = points.shape[0]
    out = np.empty(q, dtype=np.float64)
    for i in range(q):
        best = -np.inf
        for j in range(x_train.shape[0]):
            val = v_train[j] - _dist(points, x_train, i, j, norm_code)
            if val > best:
                best = val
        out[i] = best
    return out


@njit(cache=True)
def lipschitz_max_excess(points, values, norm_code):
    n = points.shape[0]
    best = -np.inf
    bi = 0
    bj = 0
    for i in range(n):
        for j in range(i + 1, n):
            e = abs(values[i] - values[j]) - _dist(points, points, i, j, norm_code)
            if e > best:
                best = e
                bi = i
                bj = j
    return best, bi, bj
