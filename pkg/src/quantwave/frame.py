"""Finite-frame stationary shapes: deterministic fixed point and Monte Carlo operator.

A single particle lives on ``[-B_L, B_R]``. It drifts left at speed ``w``,
sticks at ``-B_L`` and receives urges at rate ``mu``; an urge at ``x`` is
accepted with the environment's jump probability there, and the jump is cut
off at ``B_R``. A second stream (rate ``mu2``) jumps unconditionally. The
finite-frame shape is the environment that equals this particle's stationary
law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from . import _numeric as nm
from .flux import FluxTables, flux_tables, grid_flux, march
from .grid import GridCDF
from .kernels import ModelParams

FP_TOL = 1e-8
ZETA_MIN = 1e-10
GRID_TOL = 1e-6
LIPSCHITZ_SLACK = 1e-3
N_CORRECTOR = 2
_P_MIN = 2.2250738585072014e-308
_REL_BRACKET = 1e-14


class BisectionError(RuntimeError):
    """The atom-mass bisection could not meet ``gamma(B_R) = 1``."""


@dataclass(frozen=True)
class FrameSpec:
    """Frame ``[-B_L, B_R]`` with leftward speed ``w`` and grid step ``h``."""

    w: float
    B_L: float
    B_R: float
    h: float = 1e-2

    def __post_init__(self):
        if not (self.w > 0 and self.B_L > 0 and self.B_R > 0 and self.h > 0):
            raise ValueError("FrameSpec needs w, B_L, B_R, h > 0")
        width = self.B_L + self.B_R
        if self.h > width / 20:
            raise ValueError(f"h={self.h} too coarse for a frame of width {width}")
        if self.h > self.w:
            raise ValueError(f"h={self.h} exceeds w={self.w}; gamma would move more than one unit per cell")
        n = width / self.h
        if abs(n - round(n)) > 1e-6 * n:
            raise ValueError("frame width must be a multiple of h")

    @property
    def left(self) -> float:
        return -self.B_L

    @property
    def right(self) -> float:
        return self.B_R

    @property
    def n(self) -> int:
        return int(round((self.B_L + self.B_R) / self.h))

    def with_w(self, w: float) -> FrameSpec:
        return FrameSpec(w, self.B_L, self.B_R, self.h)


@dataclass(frozen=True)
class FrameSolution:
    """Fixed point on a frame.

    Attributes
    ----------
    gamma : GridCDF
        The shape, tagged with its Lipschitz bound; ``gamma.values[-1]`` is
        snapped to 1.
    p : float
        Left atom mass.
    zeta : ndarray
        Flux at the nodes, as produced by the march.
    iterations : int
        Number of marches used by the bisection.
    gamma_right_raw : float
        Marched value at ``B_R`` before snapping.
    """

    spec: FrameSpec
    gamma: GridCDF
    p: float
    zeta: np.ndarray
    iterations: int
    gamma_right_raw: float


def lipschitz_bound(params: ModelParams, w: float) -> float:
    """Slope bound ``sup zeta / w``; each stream contributes at most its rate."""
    return (params.mu * params.rate.integral + params.mu2) / w


def zeta(x, gamma: GridCDF, params: ModelParams) -> np.ndarray:
    """Flux of jump mass across ``x`` for the environment ``gamma``.

    Evaluated on gamma's grid and linearly interpolated to ``x``.
    """
    z = grid_flux(gamma.values, gamma.h, params)
    return np.interp(np.asarray(x, dtype=float), gamma.x, z)


def _march(p: float, spec: FrameSpec, tables: FluxTables, n_corr: int, corrected: bool):
    return march(p, spec.w, spec.h, spec.n, n_corr, corrected, *tables.args())


def fixed_point(
    spec: FrameSpec,
    params: ModelParams,
    fp_tol: float = FP_TOL,
    n_corr: int = N_CORRECTOR,
    corrected: bool = True,
) -> FrameSolution:
    """Finite-frame fixed point by a forward march and bisection on the atom mass.

    For a trial atom ``p`` the shape is marched from the left edge with
    ``w gamma' = zeta``. If gamma exceeds 1 anywhere the trial atom is too
    large; if it ends below 1 at ``B_R`` it is too small. The bisection runs in
    ``log p`` until the bracket is relatively ``1e-14`` wide, because in wide
    frames the endpoint value is extremely insensitive to ``p``.

    Each cell is an explicit predictor followed by ``n_corr`` trapezoid
    corrector passes. With ``corrected`` the trapezoid average gets the
    second-difference end correction, making the shape fourth-order
    consistent rather than second-order.

    Raises
    ------
    BisectionError
        If the bracket ``[tiny, 1]`` does not straddle the target or the final
        endpoint misses 1 by more than ``fp_tol``.
    """
    tables = flux_tables(params, spec.h, spec.n)
    iterations = 0

    def too_big(p):
        nonlocal iterations
        iterations += 1
        g, z, status = _march(p, spec, tables, n_corr, corrected)
        return status != 0, g, z

    big, _, _ = too_big(1.0)
    if not big:
        raise BisectionError("p = 1 does not overshoot; zero flux at the left edge?")
    big, g_lo, z_lo = too_big(_P_MIN)
    if big:
        raise BisectionError(
            f"even p={_P_MIN:g} overshoots (w={spec.w} too small for this frame and h)"
        )
    lo, hi = math.log(_P_MIN), 0.0
    while hi - lo > _REL_BRACKET:
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            # bracket is at float spacing (|log p| large)
            break
        big, g, z = too_big(math.exp(mid))
        if big:
            hi = mid
        else:
            lo, g_lo, z_lo = mid, g, z
    p = math.exp(lo)
    raw = float(g_lo[-1])
    if 1.0 - raw > fp_tol:
        raise BisectionError(f"bracket collapsed at p={p:.6g} with gamma(B_R)={raw:.12g}")
    values = g_lo.copy()
    values[-1] = 1.0
    gamma = GridCDF(spec.left, spec.right, values, lipschitz_bound(params, spec.w))
    return FrameSolution(spec, gamma, p, z_lo, iterations, raw)


@dataclass(frozen=True)
class FixedPointReport:
    """Residuals of the fixed-point characterization for a candidate shape."""

    lipschitz_excess: float
    atom: float
    right_residual: float
    flux_residual: float
    zeta_min: float
    zeta_floor: float

    @property
    def checks(self) -> dict:
        return {
            "lipschitz": self.lipschitz_excess <= LIPSCHITZ_SLACK,
            "left_atom": self.atom > 0.0,
            "right_end": self.right_residual <= FP_TOL,
            "flux": self.flux_residual <= GRID_TOL,
            "zeta_positive": self.zeta_min > 0.0 and self.zeta_min >= self.zeta_floor,
        }

    @property
    def ok(self) -> bool:
        return all(self.checks.values())


def verify_fixed_point(
    gamma: GridCDF, spec: FrameSpec, params: ModelParams, corrected: bool = True
) -> FixedPointReport:
    """Check each defining property of the finite-frame fixed point.

    The flux is recomputed from ``gamma`` directly (not taken from the
    march) and compared with the cell form of ``w gamma' = zeta`` that the
    march uses (trapezoid, end-corrected unless ``corrected`` is False) on
    every cell. The positivity floor for zeta is
    ``min(1e-10, 1e-3 min(zeta(-B_L), zeta(B_R)))``: in wide frames the flux
    at either edge is itself far below 1e-10, so only an interior dip below the
    edge values is a violation.
    """
    h = gamma.h
    v = gamma.values
    z = grid_flux(v, h, params)
    lhs = spec.w * np.diff(v) / h
    rhs = 0.5 * (z[1:] + z[:-1])
    if corrected:
        rhs[1:] -= (z[2:] - 2 * z[1:-1] + z[:-2]) / 12
    excess = gamma.lipschitz_excess(lipschitz_bound(params, spec.w))
    return FixedPointReport(
        lipschitz_excess=excess,
        atom=float(v[0]),
        right_residual=abs(float(v[-1]) - 1.0),
        flux_residual=float(np.max(np.abs(lhs - rhs))),
        zeta_min=float(z.min()),
        zeta_floor=min(ZETA_MIN, 1e-3 * float(min(z[0], z[-1]))),
    )


# ----------------------------------------------------------- Monte Carlo operator


@njit(cache=True)
def _mc_walk(gv, left, h, w, mu, rkind, rprm, jkind, jprm, mu2, j2kind, j2prm, events, burn, rng):
    n = gv.shape[0] - 1
    right = left + n * h
    p = gv[0]
    atom_eta = nm.rate_H(rkind, rprm, p) / p if p > 0.0 else 1.0
    # start/end point tallies per cell, for exact piecewise-uniform occupancy
    c_start = np.zeros(n + 1)
    s_start = np.zeros(n + 1)
    c_end = np.zeros(n + 1)
    s_end = np.zeros(n + 1)
    stuck = 0.0
    total = 0.0
    x = left
    total_rate = mu + mu2
    for e in range(events + burn):
        tau = rng.exponential(1.0 / total_rate)
        run = w * tau
        room = x - left
        if run >= room:
            x_new = left
            dt_stuck = tau - room / w
        else:
            x_new = x - run
            dt_stuck = 0.0
        if e >= burn:
            # drift segment [x_new, x] with density 1/w
            ia = min(n, max(0, int(math.ceil((x_new - left) / h))))
            ib = min(n, max(0, int(math.ceil((x - left) / h))))
            c_start[ia] += 1.0
            s_start[ia] += x_new
            c_end[ib] += 1.0
            s_end[ib] += x
            stuck += dt_stuck
            total += tau
        x = x_new
        if mu2 > 0.0 and rng.random() * total_rate >= mu:
            x = min(right, x + nm.jump_sample(j2kind, j2prm, rng))
            continue
        if x <= left:
            acc = atom_eta
        else:
            u = (x - left) / h
            i = min(n - 1, int(u))
            f = u - i
            acc = nm.rate_eta(rkind, rprm, gv[i] + (gv[i + 1] - gv[i]) * f)
        if rng.random() < acc:
            x = min(right, x + nm.jump_sample(jkind, jprm, rng))
    occ = np.empty(n + 1)
    ca = 0.0
    sa = 0.0
    cb = 0.0
    sb = 0.0
    for k in range(n + 1):
        xk = left + k * h
        ca += c_start[k]
        sa += s_start[k]
        cb += c_end[k]
        sb += s_end[k]
        occ[k] = ((xk * ca - sa) - (xk * cb - sb)) / w + stuck
    return occ / total


def apply_operator_mc(
    gamma: GridCDF,
    spec: FrameSpec,
    params: ModelParams,
    events: int,
    seed: int | np.random.Generator | None = None,
    burn: int | None = None,
) -> GridCDF:
    """Stationary law of the frame particle in environment ``gamma``, by simulation.

    The time-average occupancy is accumulated exactly: each drift segment
    contributes a uniform density ``1/w`` and the time stuck at ``-B_L`` goes
    to the atom. ``burn`` urges (default ``events // 100``) are discarded.
    ``seed`` may be an integer or an existing Generator.
    """
    rng = np.random.default_rng(seed)
    if burn is None:
        burn = events // 100
    j2 = params.jump2 if params.jump2 is not None else params.jump
    occ = _mc_walk(
        np.ascontiguousarray(gamma.values), gamma.left, gamma.h, spec.w,
        params.mu, params.rate.code, params.rate.prm,
        params.jump.code, params.jump.prm,
        params.mu2, j2.code, j2.prm,
        int(events), int(burn), rng,
    )  # fmt: skip
    occ = np.maximum.accumulate(np.clip(occ, 0.0, 1.0))
    return GridCDF(gamma.left, gamma.right, occ)
