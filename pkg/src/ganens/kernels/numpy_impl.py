"""Pure-numpy implementations of the numeric hot kernels.

Elementwise kernels take and return flat (1-D) float64 arrays; reshaping is
the caller's job.  `adam_update` and `clip_inplace` mutate their first
argument in place.  Norms are encoded as integers: 2 for L2, 1 for L1.

Matrix products are deliberately absent from this module: `np.matmul` is
already BLAS-backed and a hand-written kernel would only lose to it.
"""

import numpy as np


def leaky_relu_fwd(x, slope):
    return np.where(x > 0.0, x, slope * x)


def leaky_relu_bwd(x, g, slope):
    return np.where(x > 0.0, g, slope * g)


def sigmoid_fwd(x):
    # Split by sign so exp never overflows.
    out = np.empty_like(x)
    pos = x >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_bwd(y, g):
    return g * y * (1.0 - y)


def tanh_fwd(x):
    return np.tanh(x)


def tanh_bwd(y, g):
    return g * (1.0 - y * y)


def log_clamped_fwd(x, eps):
    return np.log(np.maximum(x, eps))


def log_clamped_bwd(x, g, eps):
    # The clamped region is flat, so its derivative is zero.
    return np.where(x >= eps, g / np.maximum(x, eps), 0.0)


def abs_fwd(x):
    return np.abs(x)


def abs_bwd(x, g):
    return g * np.sign(x)


def pow_fwd(x, p):
    return x ** p


def pow_bwd(x, g, p):
    return g * p * x ** (p - 1.0)


def lp_power(x, ell):
    """Sum of |x_i|^ell for ell in {1, 2}."""
    if ell == 1:
        return float(np.sum(np.abs(x)))
    return float(np.sum(x * x))


def lp_power_grad(x, g, ell):
    """Gradient of lp_power scaled by the upstream scalar g."""
    if ell == 1:
        return g * np.sign(x)
    return g * 2.0 * x


def row_lp_power(x, ell):
    """Per-row sum of |x_ij|^ell for a 2-D array."""
    if ell == 1:
        return np.sum(np.abs(x), axis=1)
    return np.sum(x * x, axis=1)


def adam_update(p, g, m, v, lr, b1, b2, eps, t):
    """One bias-corrected Adam step, in place on p, m, v."""
    m *= b1
    m += (1.0 - b1) * g
    v *= b2
    v += (1.0 - b2) * (g * g)
    bc1 = 1.0 - b1 ** t
    bc2 = 1.0 - b2 ** t
    p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


def clip_inplace(x, c):
    np.clip(x, -c, c, out=x)


def pairwise_dist(a, b, norm_code):
    """Distance matrix between rows of a (na, d) and b (nb, d)."""
    diff = a[:, None, :] - b[None, :, :]
    if norm_code == 1:
        return np.sum(np.abs(diff), axis=2)
    return np.sqrt(np.sum(diff * diff, axis=2))


def closed_form_eval(points, x_train, v_train, norm_code):
    """max_i (v_i - ||p - x_i||) for every row p of points."""
    dist = pairwise_dist(points, x_train, norm_code)
    return np.max(v_train[None, :] - dist, axis=1)


def lipschitz_max_excess(points, values, norm_code):
    """Worst violation of |f(a) - f(b)| <= ||a - b|| over all pairs.

    Returns (excess, i, j); excess <= 0 means the function is 1-Lipschitz
    on the point set.
    """
    dist = pairwise_dist(points, points, norm_code)
    excess = np.abs(values[:, None] - values[None, :]) - dist
    np.fill_diagonal(excess, -np.inf)
    flat = int(np.argmax(excess))
    i, j = divmod(flat, excess.shape[1])
    return float(excess[i, j]), i, j
