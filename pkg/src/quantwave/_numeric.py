"""Jitted scalar primitives shared by the solvers and the particle engines.

Rate curves and jump kernels are passed into jitted code as ``(kind, prm)``
pairs: an integer code plus a flat float64 parameter array. The Python-side
classes in :mod:`quantwave.kernels` own the layout of ``prm``.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

RATE_POWER = 0
RATE_TABLE = 1
RATE_BERNSTEIN = 2

JUMP_EXPONENTIAL = 0
JUMP_DETERMINISTIC = 1
JUMP_UNIFORM = 2
JUMP_TABLE = 3


# --------------------------------------------------------------------------
# rate curves
#
# power:      prm = [K]
# table:      prm = [m, nu_0..nu_{m-1}, eta_0..eta_{m-1}, H_0..H_{m-1}]
# bernstein:  prm = [K, c_0..c_K, d_1..d_{K+1}]   (d_j = sum_{k<j} c_k)
# --------------------------------------------------------------------------


@njit(cache=True)
def _table_segment(nodes, off, m, nu):
    lo = 0
    hi = m - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if nodes[off + mid] <= nu:
            lo = mid
        else:
            hi = mid
    return lo


@njit(cache=True)
def _log_binom(n, k):
    return math.lgamma(n + 1.0) - math.lgamma(k + 1.0) - math.lgamma(n - k + 1.0)


@njit(cache=True)
def _bernstein_basis(n, j, nu):
    if nu <= 0.0:
        return 1.0 if j == 0 else 0.0
    if nu >= 1.0:
        return 1.0 if j == n else 0.0
    return math.exp(_log_binom(n, j) + j * math.log(nu) + (n - j) * math.log1p(-nu))


@njit(cache=True)
def rate_eta(kind, prm, nu):
    if nu <= 0.0:
        return 1.0
    if nu >= 1.0:
        return 0.0
    if kind == RATE_POWER:
        return math.exp(prm[0] * math.log1p(-nu))
    if kind == RATE_TABLE:
        m = int(prm[0])
        i = _table_segment(prm, 1, m, nu)
        x0 = prm[1 + i]
        x1 = prm[2 + i]
        y0 = prm[1 + m + i]
        y1 = prm[2 + m + i]
        return y0 + (y1 - y0) * (nu - x0) / (x1 - x0)
    # bernstein
    K = int(prm[0])
    s = 0.0
    for k in range(K + 1):
        s += prm[1 + k] * _bernstein_basis(K, k, nu)
    return s


@njit(cache=True)
def rate_H(kind, prm, nu):
    """Antiderivative of eta from 0; constant beyond nu = 1."""
    if nu <= 0.0:
        return 0.0
    if kind == RATE_POWER:
        K = prm[0]
        if nu >= 1.0:
            return 1.0 / (K + 1.0)
        return -math.expm1((K + 1.0) * math.log1p(-nu)) / (K + 1.0)
    if kind == RATE_TABLE:
        m = int(prm[0])
        if nu >= 1.0:
            return prm[1 + 3 * m - 1]
        i = _table_segment(prm, 1, m, nu)
        x0 = prm[1 + i]
        x1 = prm[2 + i]
        y0 = prm[1 + m + i]
        y1 = prm[2 + m + i]
        d = nu - x0
        slope = (y1 - y0) / (x1 - x0)
        return prm[1 + 2 * m + i] + y0 * d + 0.5 * slope * d * d
    K = int(prm[0])
    if nu >= 1.0:
        nu = 1.0
    s = 0.0
    for j in range(1, K + 2):
        s += prm[1 + K + j] * _bernstein_basis(K + 1, j, nu)
    return s / (K + 1.0)


# --------------------------------------------------------------------------
# jump kernels
#
# exponential:    prm = [rate]
# deterministic:  prm = [size]
# uniform:        prm = [a, b]
# table:          prm = [q_0..q_{M-1}]  (quantiles at u_k = k/(M-1))
# --------------------------------------------------------------------------


@njit(cache=True)
def jump_sf(kind, prm, y):
    """Complementary CDF P(jump > y)."""
    if y < 0.0:
        return 1.0
    if kind == JUMP_EXPONENTIAL:
        return math.exp(-prm[0] * y)
    if kind == JUMP_DETERMINISTIC:
        return 1.0 if y < prm[0] else 0.0
    if kind == JUMP_UNIFORM:
        a = prm[0]
        b = prm[1]
        if y < a:
            return 1.0
        if y >= b:
            return 0.0
        return (b - y) / (b - a)
    M = prm.shape[0]
    if y < prm[0]:
        return 1.0
    if y >= prm[M - 1]:
        return 0.0
    # last k with q_k <= y
    lo = 0
    hi = M - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if prm[mid] <= y:
            lo = mid
        else:
            hi = mid
    q0 = prm[lo]
    q1 = prm[lo + 1]
    frac = (y - q0) / (q1 - q0) if q1 > q0 else 1.0
    return 1.0 - (lo + frac) / (M - 1)


@njit(cache=True)
def jump_sample(kind, prm, rng):
    if kind == JUMP_EXPONENTIAL:
        return rng.exponential(1.0 / prm[0])
    if kind == JUMP_DETERMINISTIC:
        return prm[0]
    if kind == JUMP_UNIFORM:
        return prm[0] + (prm[1] - prm[0]) * rng.random()
    M = prm.shape[0]
    u = rng.random() * (M - 1)
    k = int(u)
    if k >= M - 1:
        return prm[M - 1]
    return prm[k] + (prm[k + 1] - prm[k]) * (u - k)


@njit(cache=True)
def rate_eta_array(kind, prm, nu):
    out = np.empty(nu.shape[0])
    for i in range(nu.shape[0]):
        out[i] = rate_eta(kind, prm, nu[i])
    return out


@njit(cache=True)
def rate_H_array(kind, prm, nu):
    out = np.empty(nu.shape[0])
    for i in range(nu.shape[0]):
        out[i] = rate_H(kind, prm, nu[i])
    return out


@njit(cache=True)
def jump_sf_array(kind, prm, y):
    out = np.empty(y.shape[0])
    for i in range(y.shape[0]):
        out[i] = jump_sf(kind, prm, y[i])
    return out


@njit(cache=True)
def jump_sample_array(kind, prm, rng, size):
    out = np.empty(size)
    for i in range(size):
        out[i] = jump_sample(kind, prm, rng)
    return out
