"""Explicit integration of the mean-field CDF dynamics and its diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .flux import FluxTables, flux_tables, grid_flux
from .grid import GridCDF
from .kernels import ModelParams, wave_speed

TAIL_TOL = 1e-6
MONO_TOL = 1e-9
SHIFT_EVERY = 1.0


class WindowOverflowError(RuntimeError):
    """More than ``tail_tol`` of the mass has left the window on the right."""


class MonotonicityError(RuntimeError):
    """A step produced a CDF that decreases by more than round-off."""


class StabilityError(MonotonicityError):
    """The time step exceeds the integrator's stability bound ``dt <= h``."""


@dataclass
class MeanFieldState:
    """CDF ``f`` at model time ``t``.

    ``max_rate`` is the largest ``|df/dt|`` seen so far, an empirical
    Lipschitz-in-time constant.
    """

    f: GridCDF
    t: float
    params: ModelParams
    max_rate: float = 0.0
    snapshots: list = field(default_factory=list, repr=False)


def rhs(f: GridCDF, params: ModelParams, tables: FluxTables | None = None) -> np.ndarray:
    """``df/dt`` at every node: minus the flux of jump mass across the node."""
    return -grid_flux(f.values, f.h, params, tables)


def pad(f: GridCDF, left: float = 0.0, right: float = 0.0) -> GridCDF:
    """Extend the window by whole cells: zeros on the left, ones on the right."""
    h = f.h
    nl = int(np.ceil(left / h - 1e-9))
    nr = int(np.ceil(right / h - 1e-9))
    v = np.concatenate([np.zeros(nl), f.values, np.ones(nr)])
    return GridCDF(f.left - nl * h, f.right + nr * h, v)


def _shift_window(values, left, h, cells, tail_tol):
    """Move the window right by up to ``cells`` nodes.

    Mass left behind is lumped into the new left atom, so the shift is cut
    short rather than lump more than ``tail_tol``.
    """
    ok = np.nonzero(values[: cells + 1] <= tail_tol)[0]
    s = int(ok.max()) if ok.size else 0
    if s == 0:
        return values, left
    return np.concatenate([values[s:], np.ones(s)]), left + s * h


def evolve(
    f0: GridCDF,
    T: float,
    params: ModelParams,
    dt: float | None = None,
    snapshot_times=(),
    moving_window: bool = True,
    tail_tol: float = TAIL_TOL,
) -> MeanFieldState:
    """Heun time stepping of the mean-field CDF on a fixed-size moving window.

    Parameters
    ----------
    f0 : GridCDF
        Initial CDF. Its window should leave room for the mass that moves
        right during the run; see :func:`pad`.
    T : float
        Duration.
    dt : float, optional
        Step, default ``h / 2``; must not exceed ``h``.
    snapshot_times : iterable of float
        Times in ``[0, T]`` at which copies of the state are kept in
        ``state.snapshots``.
    moving_window : bool
        Every unit of time, translate the window right by ``round(v / h)``
        cells (less if that would lump more than ``tail_tol`` into the left
        atom), refilling the right end with 1.

    Raises
    ------
    StabilityError
        If ``dt > h``.
    MonotonicityError
        If a step decreases the CDF by more than 1e-9 anywhere.
    WindowOverflowError
        If the right-end deficit ``1 - f(b)`` exceeds ``tail_tol``.
    """
    h = f0.h
    dt = 0.5 * h if dt is None else float(dt)
    if not dt > 0:
        raise ValueError("dt must be positive")
    if dt > h * (1 + 1e-12):
        raise StabilityError(f"dt={dt} exceeds the stability bound dt <= h={h}")
    v = wave_speed(params)
    tables = flux_tables(params, h, f0.n)
    values = np.array(f0.values, dtype=float)
    left = f0.left
    t = 0.0
    max_rate = 0.0
    times = sorted(float(s) for s in snapshot_times)
    snaps = []
    shift_cells = int(round(v * SHIFT_EVERY / h))
    next_shift = SHIFT_EVERY

    def take():
        snaps.append(MeanFieldState(GridCDF(left, left + f0.n * h, values), t, params, max_rate))

    while times and times[0] <= 0.0:
        times.pop(0)
        take()
    if T <= 0:
        return MeanFieldState(f0, 0.0, params, 0.0, snaps)

    n_steps = int(np.ceil(T / dt - 1e-9))
    dt = T / n_steps
    for step in range(1, n_steps + 1):
        k1 = -grid_flux(values, h, params, tables)
        stage = values + dt * k1
        k2 = -grid_flux(stage, h, params, tables)
        new = values + 0.5 * dt * (k1 + k2)
        max_rate = max(max_rate, float(np.max(np.abs(k1))))
        dec = float(np.min(np.diff(new)))
        if dec < -MONO_TOL:
            raise MonotonicityError(f"CDF decreases by {-dec:.3g} at t={t + dt:.6g}")
        if new.min() < -MONO_TOL or new.max() > 1 + MONO_TOL:
            raise MonotonicityError(f"CDF leaves [0, 1] at t={t + dt:.6g}")
        values = np.maximum.accumulate(np.clip(new, 0.0, 1.0))
        t = step * dt
        if 1.0 - values[-1] > tail_tol:
            raise WindowOverflowError(
                f"right-tail mass {1.0 - values[-1]:.3g} beyond x={left + f0.n * h:.6g} at t={t:.6g}"
            )
        while times and times[0] <= t + 1e-12:
            times.pop(0)
            take()
        if moving_window and t + 1e-12 >= next_shift:
            values, left = _shift_window(values, left, h, shift_cells, tail_tol)
            next_shift += SHIFT_EVERY
    f = GridCDF(left, left + f0.n * h, values)
    return MeanFieldState(f, t, params, max_rate, snaps)


def integrate(f0: GridCDF, T: float, dt: float | None, params: ModelParams, **kwargs) -> MeanFieldState:
    """State at time ``T``; see :func:`evolve` for options and errors."""
    return evolve(f0, T, params, dt, **kwargs)


def conservation_residual(f0: GridCDF, fT: GridCDF, T: float, params: ModelParams) -> float:
    """``|int (f0 - fT) dx - v T|`` by trapezoid quadrature on the union of both grids."""
    lo = min(f0.left, fT.left)
    hi = max(f0.right, fT.right)
    x = np.union1d(np.union1d(f0.x, fT.x), [lo, hi])
    moved = float(np.trapezoid(f0(x) - fT(x), x))
    return abs(moved - wave_speed(params) * T)


def l1_distance_to_wave(state: MeanFieldState, phi: GridCDF) -> float:
    """``|| f(. + v t, t) - phi ||_1`` by trapezoid quadrature."""
    v = wave_speed(state.params)
    return state.f.translate(-v * state.t).l1_distance(phi)
