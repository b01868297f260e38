"""Traveling-wave shapes on the line: speed tuning, frame growth and residual checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .flux import grid_flux
from .frame import FrameSolution, FrameSpec, fixed_point
from .grid import GridCDF
from .kernels import ModelParams, wave_speed

MEDIAN_TOL = 1e-4
TAIL_TOL = 1e-6
DEFAULT_FRAMES = (5.0, 10.0, 20.0, 40.0)


class BracketError(RuntimeError):
    """No speed in ``[v/64, 64 v]`` puts the target quantile at 0."""


def default_step(B: float) -> float:
    return min(1e-2, B * 1e-3)


def tune_speed(
    B: float,
    params: ModelParams,
    h: float | None = None,
    nu0: float = 0.5,
    median_tol: float = MEDIAN_TOL,
    w_hint: float | None = None,
    max_iter: int = 200,
) -> tuple[float, FrameSolution]:
    """Speed ``w_B`` whose fixed point on ``[-B, B]`` has ``gamma(0) = nu0``.

    ``gamma(0)`` increases with ``w``. A bracket is found by doubling or
    halving from ``w_hint`` (default: the model speed) and then bisected
    until ``|gamma(0) - nu0| <= median_tol``. Frames of half-width B make
    ``gamma(0)`` very steep in ``w`` (roughly like ``e^B``), so the bisection
    usually needs 20 to 45 steps.

    Raises
    ------
    BracketError
        If no bracket exists within ``[max(v/64, h), 64 v]``.
    """
    v = wave_speed(params)
    h = default_step(B) if h is None else h
    w_min = max(v / 64, h)
    w_max = 64 * v
    w0 = min(max(v if w_hint is None else w_hint, w_min), w_max)

    def at(w):
        sol = fixed_point(FrameSpec(w, B, B, h), params)
        return float(sol.gamma(0.0)) - nu0, sol

    r0, s0 = at(w0)
    if abs(r0) <= median_tol:
        return w0, s0
    lo = hi = None
    if r0 < 0:
        lo = (w0, s0)
        w = w0
        while hi is None:
            if w >= w_max:
                raise BracketError(f"gamma(0) < {nu0} up to w = {w_max:g}")
            w = min(2 * w, w_max)
            r, s = at(w)
            if abs(r) <= median_tol:
                return w, s
            if r > 0:
                hi = (w, s)
            else:
                lo = (w, s)
    else:
        hi = (w0, s0)
        w = w0
        while lo is None:
            if w <= w_min:
                raise BracketError(f"gamma(0) > {nu0} down to w = {w_min:g}")
            w = max(0.5 * w, w_min)
            r, s = at(w)
            if abs(r) <= median_tol:
                return w, s
            if r < 0:
                lo = (w, s)
            else:
                hi = (w, s)
    for _ in range(max_iter):
        w = 0.5 * (lo[0] + hi[0])
        r, s = at(w)
        if abs(r) <= median_tol:
            return w, s
        if r < 0:
            lo = (w, s)
        else:
            hi = (w, s)
        if hi[0] - lo[0] <= 4 * np.finfo(float).eps * hi[0]:
            break
    raise BracketError(f"speed bisection stalled at w = {w!r} with gamma(0) - nu0 = {r:.3g}")


@dataclass
class FrameRecord:
    B: float
    h: float
    w: float
    median_residual: float
    atom: float
    sup_change: float | None


@dataclass
class WaveSolveReport:
    """Outcome of :func:`solve_wave`.

    ``frames`` lists every frame that was solved, in order, with its tuned
    speed and the sup-norm change against the previous frame on the smaller
    frame's window. ``phi`` is the last frame's shape restricted to the
    narrowest symmetric window outside of which both tails are below
    ``tail_tol``.
    """

    frames: list = field(default_factory=list)
    phi: GridCDF | None = None
    gamma: GridCDF | None = None
    converged: bool = False
    speed: float = math.nan
    tol: float = math.nan

    @property
    def w_final(self) -> float:
        return self.frames[-1].w

    @property
    def w_residual(self) -> float:
        return abs(self.w_final - self.speed)

    @property
    def w_residual_monotone(self) -> bool:
        """Logged only: the gap ``|w_B - v|`` shrinking along the schedule."""
        gaps = [abs(r.w - self.speed) for r in self.frames]
        return all(b <= a for a, b in zip(gaps, gaps[1:]))

    def to_dict(self) -> dict:
        return {
            "speed": self.speed,
            "tol": self.tol,
            "converged": self.converged,
            "w_final": self.w_final,
            "w_residual": self.w_residual,
            "w_residual_monotone": self.w_residual_monotone,
            "frames": [vars(r) for r in self.frames],
            "phi_window": [self.phi.left, self.phi.right] if self.phi is not None else None,
        }


def extract_phi(gamma: GridCDF, tail_tol: float = TAIL_TOL) -> GridCDF:
    """Narrowest symmetric node-aligned window ``[-L, L]`` with both tails below tail_tol."""
    x = gamma.x
    v = gamma.values
    left_ok = v <= tail_tol
    right_ok = 1.0 - v <= tail_tol
    # smallest L with gamma(-L) <= tol and 1 - gamma(L) <= tol
    L_left = -x[left_ok].max() if left_ok.any() else -gamma.left
    L_right = x[right_ok].min() if right_ok.any() else gamma.right
    L = max(L_left, L_right, gamma.h)
    L = min(L, -gamma.left, gamma.right)
    return gamma.restrict(-L, L)


def solve_wave(
    frames,
    params: ModelParams,
    tol: float = 5e-3,
    h: float | None = None,
    median_tol: float = MEDIAN_TOL,
    tail_tol: float = TAIL_TOL,
) -> WaveSolveReport:
    """Wave shape from tuned finite frames of increasing half-width.

    Each frame is tuned with :func:`tune_speed`, warm-started at the previous
    frame's speed. The schedule stops once the sup change between consecutive
    shapes, measured on the smaller frame, is at most ``tol``. If the schedule
    runs out first, ``converged`` is False and the last shape is still
    returned.
    """
    frames = [float(B) for B in frames]
    if not frames or any(b <= a for a, b in zip(frames, frames[1:])):
        raise ValueError("frame schedule must be nonempty and increasing")
    report = WaveSolveReport(speed=wave_speed(params), tol=tol)
    prev = None
    w_hint = None
    for B in frames:
        hB = default_step(B) if h is None else h
        w, sol = tune_speed(B, params, hB, median_tol=median_tol, w_hint=w_hint)
        g = sol.gamma
        change = None
        if prev is not None:
            grid = prev.x
            change = float(np.max(np.abs(g(grid) - prev(grid))))
        report.frames.append(FrameRecord(B, hB, w, abs(float(g(0.0)) - 0.5), sol.p, change))
        report.gamma = g
        prev = g
        w_hint = w
        if change is not None and change <= tol:
            report.converged = True
            break
    report.phi = extract_phi(report.gamma, tail_tol)
    return report


def wave_residual(phi: GridCDF, params: ModelParams, speed: float | None = None) -> float:
    """Sup over interior nodes of ``|v phi' - zeta|`` with a central-difference ``phi'``.

    The left node's value is treated as an atom at the window's left edge,
    which is how the tail mass below the window enters the flux.
    """
    v = wave_speed(params) if speed is None else speed
    h = phi.h
    z = grid_flux(phi.values, h, params)
    lhs = v * (phi.values[2:] - phi.values[:-2]) / (2 * h)
    return float(np.max(np.abs(lhs - z[1:-1])))


@dataclass(frozen=True)
class TailMomentSeries:
    order: int
    windows: tuple
    moments: tuple

    @property
    def relative_change(self) -> float:
        a, b = self.moments[-2], self.moments[-1]
        return float(abs(b - a) / max(abs(b), 1e-300))

    @property
    def stable(self) -> bool:
        return bool(self.relative_change < 1e-2)


def tail_moment_estimate(phi: GridCDF, k: int, windows=None) -> TailMomentSeries:
    """``int |y|^k dphi`` over nested windows ``[-L, L]`` centred at 0.

    The left-edge atom counts only for windows that reach the left edge.
    Default windows are 1/4, 1/2, 3/4 and all of the largest symmetric
    window inside phi's domain.
    """
    if k < 0:
        raise ValueError("moment order must be >= 0")
    L_max = min(-phi.left, phi.right)
    if windows is None:
        windows = tuple(L_max * f for f in (0.25, 0.5, 0.75, 1.0))
    moments = tuple(float(phi.moment_abs(k, -L, L)) for L in windows)
    return TailMomentSeries(k, tuple(windows), moments)
