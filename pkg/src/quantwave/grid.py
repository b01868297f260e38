"""Distribution functions on a uniform grid and empirical distribution functions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

GRID_TOL = 1e-9


@dataclass(frozen=True)
class GridCDF:
    """A distribution function sampled on ``left, left + h, ..., right``.

    Values are linearly interpolated between nodes. ``values[0]`` is the mass
    sitting exactly at ``left`` (the left atom); the function is 0 to the left
    of the window and 1 to the right of it. ``1 - values[-1]`` is mass that
    lies beyond the window on the right, which callers keep below their own
    tail tolerance.

    Parameters
    ----------
    left, right : float
        Window endpoints.
    values : ndarray
        Nondecreasing CDF values in [0, 1], one per grid node.
    lipschitz : float, optional
        Slope bound the function is claimed to satisfy, if any.
    """

    left: float
    right: float
    values: np.ndarray = field(repr=False)
    lipschitz: float | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("GridCDF needs at least two nodes")
        if not self.right > self.left:
            raise ValueError(f"empty window [{self.left}, {self.right}]")
        if v.min() < -GRID_TOL or v.max() > 1.0 + GRID_TOL:
            raise ValueError("CDF values outside [0, 1]")
        if np.any(np.diff(v) < -GRID_TOL):
            raise ValueError("CDF values must be nondecreasing")
        v = np.clip(v, 0.0, 1.0)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, F, left, right, h, lipschitz=None):
        n = int(round((right - left) / h))
        x = left + h * np.arange(n + 1)
        return cls(left, left + n * h, np.asarray(F(x), dtype=float), lipschitz)

    @property
    def n(self) -> int:
        """Number of cells."""
        return self.values.size - 1

    @property
    def h(self) -> float:
        return (self.right - self.left) / self.n

    @property
    def x(self) -> np.ndarray:
        return self.left + self.h * np.arange(self.n + 1)

    @property
    def atom_left(self) -> float:
        return float(self.values[0])

    @property
    def cell_masses(self) -> np.ndarray:
        return np.diff(self.values)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.interp(x, self.x, self.values)
        out = np.where(x < self.left, 0.0, out)
        return np.where(x > self.right, 1.0, out)

    def translate(self, c: float) -> GridCDF:
        """The distribution shifted right by ``c``."""
        return GridCDF(self.left + c, self.right + c, self.values, self.lipschitz)

    def quantile(self, nu: float) -> float:
        """Smallest x with F(x) >= nu."""
        v = self.values
        if nu <= v[0]:
            return self.left
        i = int(np.searchsorted(v, nu, side="left"))
        if i > self.n:
            return np.inf
        x = self.x
        dv = v[i] - v[i - 1]
        return float(x[i - 1] + self.h * (nu - v[i - 1]) / dv)

    def median(self) -> float:
        return self.quantile(0.5)

    def mean(self) -> float:
        """Mean of the distribution, counting right-tail deficit at ``right``."""
        return float(self.right - np.trapezoid(self.values, dx=self.h))

    def moment_abs(self, k: int, lo=None, hi=None) -> float:
        """``int |y|^k dF(y)`` over ``[lo, hi]`` (default: whole window)."""
        lo = self.left if lo is None else max(lo, self.left)
        hi = self.right if hi is None else min(hi, self.right)
        x = self.x
        total = 0.0
        if lo <= self.left + 1e-12:
            total += abs(self.left) ** k * self.values[0]
        # exact for piecewise-linear F: uniform density on each cell
        a = x[:-1]
        b = x[1:]
        dens = np.diff(self.values) / self.h
        ca = np.clip(a, lo, hi)
        cb = np.clip(b, lo, hi)
        total += float(np.sum(dens * _abs_power_integral(ca, cb, k)))
        return total

    def restrict(self, lo: float, hi: float) -> GridCDF:
        """Sub-window ``[lo, hi]`` snapped outward to grid nodes."""
        i0 = max(0, int(np.floor((lo - self.left) / self.h + 1e-9)))
        i1 = min(self.n, int(np.ceil((hi - self.left) / self.h - 1e-9)))
        x = self.x
        return GridCDF(float(x[i0]), float(x[i1]), self.values[i0 : i1 + 1], self.lipschitz)

    def lipschitz_excess(self, L: float) -> float:
        """Largest slope excess ``max(dF/h) - L`` over cells (negative if none)."""
        d = np.diff(self.values) / self.h
        return float(d.max() - L)

    def sup_distance(self, other, x=None) -> float:
        """Sup of |F - G| over both grids (or over ``x`` if given)."""
        if x is None:
            x = np.union1d(self.x, np.asarray(other.x))
        return float(np.max(np.abs(self(x) - other(x))))

    def l1_distance(self, other) -> float:
        lo = min(self.left, other.left)
        hi = max(self.right, other.right)
        h = min(self.h, other.h)
        n = int(np.ceil((hi - lo) / h))
        x = lo + (hi - lo) * np.arange(n + 1) / n
        x = np.union1d(x, np.union1d(self.x, other.x))
        return float(np.trapezoid(np.abs(self(x) - other(x)), x))


def _abs_power_integral(a, b, k):
    """int_a^b |y|^k dy, elementwise, for a <= b."""

    def prim(y):
        return np.sign(y) * np.abs(y) ** (k + 1) / (k + 1)

    return prim(b) - prim(a)


class EmpiricalCDF:
    """Right-continuous empirical distribution function of a finite sample."""

    def __init__(self, positions):
        p = np.sort(np.asarray(positions, dtype=float))
        if p.size == 0:
            raise ValueError("empty sample")
        self.positions = p

    @property
    def n(self) -> int:
        return self.positions.size

    def __call__(self, x):
        return np.searchsorted(self.positions, x, side="right") / self.n

    def left_limit(self, x):
        return np.searchsorted(self.positions, x, side="left") / self.n

    def lower_median(self) -> float:
        return float(self.positions[(self.n + 1) // 2 - 1])

    def mean(self) -> float:
        return float(self.positions.mean())
