"""Grid flux of jump mass across each node, shared by every deterministic solver.

For a CDF ``F`` on nodes ``x_j = left + j h`` the flux through ``x_j`` is

    zeta_j = mu  * [H(F_0) Jbar(j h)  + sum_{0<k<=j} (H(F_k) - H(F_{k-1})) Jbar((j-k+1/2) h)]
           + mu2 * [F_0 Jbar2(j h)    + sum_{0<k<=j} (F_k - F_{k-1})       Jbar2((j-k+1/2) h)]

Cell masses are weighted by differences of the antiderivative ``H`` of the
rate curve, which is the exact quantile average of eta over each cell (and
over the left atom). Each cell's mass is placed at its midpoint.

Exponential kernels use the O(N) recursion
``zeta_{j+1} = e^{-lam h} zeta_j + m_{j+1} e^{-lam h / 2}``; kernels with
bounded support use a convolution truncated at the support.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from . import _numeric as nm
from .kernels import JumpKernel, ModelParams


@dataclass(frozen=True)
class KernelTables:
    """Precomputed survival values of one jump stream on a grid of step h.

    ``katom[j] = Jbar(j h)`` for the left atom and ``kmid[d] = Jbar((d - 1/2) h)``
    for a cell whose right node lies d steps behind the target node
    (``kmid[0]`` is unused). Arrays are truncated where the kernel vanishes.
    """

    is_exp: bool
    decay: float
    half: float
    katom: np.ndarray
    kmid: np.ndarray


def kernel_tables(jump: JumpKernel, h: float, n: int) -> KernelTables:
    if jump.kind == "exponential":
        lam = jump.params[0]
        decay = math.exp(-lam * h)
        half = math.exp(-0.5 * lam * h)
        # only kmid[1] is needed by the incremental march
        return KernelTables(True, decay, half, np.exp(-lam * h * np.arange(n + 1)), np.array([0.0, half]))
    span = min(n, int(math.ceil(jump.support_max / h)) + 1)
    d = np.arange(span + 1, dtype=float)
    kmid = jump.sf((d - 0.5) * h)
    kmid[0] = 0.0
    katom = jump.sf(h * np.arange(span + 1, dtype=float))
    return KernelTables(False, 0.0, 0.0, katom, kmid)


@dataclass(frozen=True)
class FluxTables:
    """Everything jitted flux code needs for a model on a grid of step h."""

    mu: float
    rate_kind: int
    rate_prm: np.ndarray
    k1: KernelTables
    mu2: float
    k2: KernelTables

    def args(self):
        k1, k2 = self.k1, self.k2
        return (
            self.mu, self.rate_kind, self.rate_prm,
            k1.is_exp, k1.decay, k1.half, k1.katom, k1.kmid,
            self.mu2,
            k2.is_exp, k2.decay, k2.half, k2.katom, k2.kmid,
        )  # fmt: skip


def flux_tables(params: ModelParams, h: float, n: int) -> FluxTables:
    k1 = kernel_tables(params.jump, h, n)
    if params.mu2 > 0:
        k2 = kernel_tables(params.jump2, h, n)
    else:
        k2 = KernelTables(False, 0.0, 0.0, np.zeros(1), np.zeros(1))
    return FluxTables(params.mu, params.rate.code, params.rate.prm, k1, params.mu2, k2)


@njit(cache=True)
def _stream_flux(m, is_exp, decay, half, katom, kmid, out, scale):
    """Add ``scale * sum_k m_k * kernel`` to ``out`` for one stream."""
    n = m.shape[0] - 1
    if is_exp:
        z = m[0]
        out[0] += scale * z
        for j in range(1, n + 1):
            z = decay * z + m[j] * half
            out[j] += scale * z
        return
    span = kmid.shape[0] - 1
    for j in range(n + 1):
        s = 0.0
        if j <= span:
            s = m[0] * katom[j]
        lo = max(1, j - span + 1)
        for k in range(lo, j + 1):
            s += m[k] * kmid[j - k + 1]
        out[j] += scale * s


@njit(cache=True)
def _grid_flux(values, mu, rkind, rprm, e1, d1, h1, ka1, km1, mu2, e2, d2, h2, ka2, km2):
    n = values.shape[0] - 1
    out = np.zeros(n + 1)
    if mu > 0.0:
        m = np.empty(n + 1)
        prev = nm.rate_H(rkind, rprm, values[0])
        m[0] = prev
        for k in range(1, n + 1):
            cur = nm.rate_H(rkind, rprm, values[k])
            m[k] = cur - prev
            prev = cur
        _stream_flux(m, e1, d1, h1, ka1, km1, out, mu)
    if mu2 > 0.0:
        m = np.empty(n + 1)
        m[0] = values[0]
        for k in range(1, n + 1):
            m[k] = values[k] - values[k - 1]
        _stream_flux(m, e2, d2, h2, ka2, km2, out, mu2)
    return out


def grid_flux(values: np.ndarray, h: float, params: ModelParams, tables: FluxTables | None = None) -> np.ndarray:
    """Flux ``zeta_j`` at every node of a CDF sampled with step ``h``."""
    values = np.ascontiguousarray(values, dtype=float)
    if tables is None:
        tables = flux_tables(params, h, values.size - 1)
    return _grid_flux(values, *tables.args())


# ------------------------------------------------------------- Volterra march


@njit(cache=True)
def _base_at(j, m, is_exp, decay, prev_total, katom, kmid):
    """Flux at node j from masses m[0..j-1] (cells strictly behind the last one)."""
    if is_exp:
        return decay * prev_total
    span = kmid.shape[0] - 1
    s = 0.0
    if j <= span:
        s = m[0] * katom[j]
    lo = max(1, j - span + 1)
    for k in range(lo, j):
        s += m[k] * kmid[j - k + 1]
    return s


@njit(cache=True)
def march(p, w, h, n, n_corr, corrected, mu, rkind, rprm, e1, d1, h1, ka1, km1, mu2, e2, d2, h2, ka2, km2):
    """March ``w gamma' = zeta`` from ``gamma(left) = p`` across n cells.

    Each cell uses the trapezoid rule on zeta; with ``corrected`` it also
    subtracts the end correction ``(zeta_{j+1} - 2 zeta_j + zeta_{j-1}) / 12``
    (from the second cell on), which removes the rule's O(h^2) local error.

    Returns ``(gamma, zeta, status)`` where status is 0 on reaching the right
    end and ``j > 0`` if gamma exceeded 1 at node j (the trial atom is too big).
    """
    g = np.zeros(n + 1)
    z = np.zeros(n + 1)
    m1 = np.zeros(n + 1)
    m2 = np.zeros(n + 1)
    # per-stream totals at the previous node, for the exponential recursion
    t1 = 0.0
    t2 = 0.0
    g[0] = p
    if mu > 0.0:
        m1[0] = nm.rate_H(rkind, rprm, p)
        t1 = m1[0] * ka1[0]
    if mu2 > 0.0:
        m2[0] = p
        t2 = p * ka2[0]
    z[0] = mu * t1 + mu2 * t2
    inv_w = 1.0 / w
    for j in range(n):
        gj = g[j]
        Hj = nm.rate_H(rkind, rprm, gj) if mu > 0.0 else 0.0
        b1 = _base_at(j + 1, m1, e1, d1, t1, ka1, km1) if mu > 0.0 else 0.0
        b2 = _base_at(j + 1, m2, e2, d2, t2, ka2, km2) if mu2 > 0.0 else 0.0
        base = mu * b1 + mu2 * b2
        gs = gj + h * z[j] * inv_w
        use_corr = corrected and j > 0
        for _ in range(n_corr):
            gc = min(gs, 1.0)
            zs = base
            if mu > 0.0:
                zs += mu * (nm.rate_H(rkind, rprm, gc) - Hj) * km1[1]
            if mu2 > 0.0:
                zs += mu2 * (gc - gj) * km2[1]
            avg = 0.5 * (z[j] + zs)
            if use_corr:
                avg -= (zs - 2.0 * z[j] + z[j - 1]) / 12.0
            gs = gj + h * avg * inv_w
        if gs > 1.0 + 1e-15:
            g[j + 1] = gs
            return g, z, j + 1
        gs = min(gs, 1.0)
        g[j + 1] = gs
        s1 = 0.0
        s2 = 0.0
        if mu > 0.0:
            m1[j + 1] = nm.rate_H(rkind, rprm, gs) - Hj
            s1 = b1 + m1[j + 1] * km1[1]
            t1 = s1
        if mu2 > 0.0:
            m2[j + 1] = gs - gj
            s2 = b2 + m2[j + 1] * km2[1]
            t2 = s2
        z[j + 1] = mu * s1 + mu2 * s2
    return g, z, 0
