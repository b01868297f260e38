"""Jump-size laws, quantile rate curves, model parameters and the exponential-case wave."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.optimize import brentq

from . import _numeric as nm
from .grid import GridCDF

MAX_MOMENT = 4


class ConfigError(ValueError):
    """A model or run configuration block is missing or malformed."""


class UnsupportedMoment(ValueError):
    pass


# ---------------------------------------------------------------- jump kernels

_JUMP_CODES = {
    "exponential": nm.JUMP_EXPONENTIAL,
    "deterministic": nm.JUMP_DETERMINISTIC,
    "uniform": nm.JUMP_UNIFORM,
    "table": nm.JUMP_TABLE,
}


@dataclass(frozen=True)
class JumpKernel:
    """Law of a nonnegative jump size.

    ``params`` depends on ``kind``: ``(rate,)`` for exponential, ``(size,)``
    for deterministic, ``(a, b)`` for uniform and the quantile table
    ``(q_0, ..., q_{M-1})`` at levels ``k/(M-1)`` for table.
    """

    kind: str
    params: tuple

    def __post_init__(self):
        if self.kind not in _JUMP_CODES:
            raise ConfigError(f"unknown jump kind {self.kind!r}")
        p = tuple(float(v) for v in self.params)
        object.__setattr__(self, "params", p)
        if self.kind == "exponential" and not (len(p) == 1 and p[0] > 0):
            raise ConfigError("exponential jump needs rate > 0")
        if self.kind == "deterministic" and not (len(p) == 1 and p[0] > 0):
            raise ConfigError("deterministic jump needs size > 0")
        if self.kind == "uniform" and not (len(p) == 2 and 0 <= p[0] < p[1]):
            raise ConfigError("uniform jump needs 0 <= a < b")
        if self.kind == "table":
            q = np.asarray(p)
            if q.size < 2 or q[0] < 0 or np.any(np.diff(q) < 0) or q[-1] <= 0:
                raise ConfigError("table jump needs >= 2 nondecreasing quantiles, not all 0")

    @classmethod
    def exponential(cls, rate: float = 1.0) -> JumpKernel:
        return cls("exponential", (rate,))

    @classmethod
    def deterministic(cls, size: float) -> JumpKernel:
        return cls("deterministic", (size,))

    @classmethod
    def uniform(cls, a: float, b: float) -> JumpKernel:
        return cls("uniform", (a, b))

    @classmethod
    def table(cls, quantiles) -> JumpKernel:
        return cls("table", tuple(quantiles))

    @property
    def code(self) -> int:
        return _JUMP_CODES[self.kind]

    @cached_property
    def prm(self) -> np.ndarray:
        return np.asarray(self.params, dtype=float)

    @property
    def support_max(self) -> float:
        """Largest possible jump (inf for exponential)."""
        if self.kind == "exponential":
            return math.inf
        return self.params[-1]

    def sf(self, y):
        """Complementary CDF ``P(Y > y)``."""
        y = np.asarray(y, dtype=float)
        out = nm.jump_sf_array(self.code, self.prm, np.atleast_1d(y).ravel())
        return out.reshape(y.shape) if y.ndim else float(out[0])

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return nm.jump_sample_array(self.code, self.prm, rng, size)

    @cached_property
    def moments(self) -> tuple:
        return tuple(self._moment(k) for k in range(1, MAX_MOMENT + 1))

    @property
    def mean(self) -> float:
        return self.moments[0]

    def _moment(self, k: int) -> float:
        p = self.params
        if self.kind == "exponential":
            return math.factorial(k) / p[0] ** k
        if self.kind == "deterministic":
            return p[0] ** k
        if self.kind == "uniform":
            a, b = p
            return (b ** (k + 1) - a ** (k + 1)) / ((k + 1) * (b - a))
        # piecewise-linear quantile function: Gauss-Legendre is exact per segment
        q = np.asarray(p)
        nodes, weights = np.polynomial.legendre.leggauss(3)
        t = 0.5 * (nodes + 1.0)
        seg = q[:-1, None] + (q[1:] - q[:-1])[:, None] * t[None, :]
        per_seg = (seg**k * (0.5 * weights)[None, :]).sum(axis=1)
        return float(per_seg.mean())

    def to_dict(self) -> dict:
        p = self.params
        if self.kind == "exponential":
            return {"kind": "exponential", "rate": p[0]}
        if self.kind == "deterministic":
            return {"kind": "deterministic", "size": p[0]}
        if self.kind == "uniform":
            return {"kind": "uniform", "a": p[0], "b": p[1]}
        return {"kind": "table", "quantiles": list(p)}

    @classmethod
    def from_dict(cls, d: dict, where: str = "jump") -> JumpKernel:
        if not isinstance(d, dict) or "kind" not in d:
            raise ConfigError(f"{where}: expected an object with a 'kind' field")
        kind = d["kind"]
        keys = {
            "exponential": ("rate",),
            "deterministic": ("size",),
            "uniform": ("a", "b"),
            "table": ("quantiles",),
        }.get(kind)
        if keys is None:
            raise ConfigError(f"{where}.kind: unknown jump kind {kind!r}")
        for key in keys:
            if key not in d:
                raise ConfigError(f"{where}.{key}: missing")
        if kind == "table":
            return cls.table(d["quantiles"])
        try:
            return cls(kind, tuple(d[k] for k in keys))
        except ConfigError as exc:
            raise ConfigError(f"{where}: {exc}") from None


def jump_moment(kernel: JumpKernel, k: int) -> float:
    """The k-th moment ``E[Y^k]`` of a jump kernel, for ``1 <= k <= 4``."""
    if not 1 <= k <= MAX_MOMENT:
        raise UnsupportedMoment(f"moment order {k} not stored (1..{MAX_MOMENT})")
    return kernel.moments[k - 1]


# ----------------------------------------------------------------- rate curves


@dataclass(frozen=True)
class RateCurve:
    """Strictly decreasing jump-acceptance curve on [0, 1] with eta(0)=1, eta(1)=0.

    Kinds are ``power`` (``(1 - nu)**K``), ``table`` (piecewise linear through
    nodes), ``smoothed`` (Bernstein polynomial of a base curve, see
    :func:`rate_smooth`) and ``bernstein`` (Bernstein polynomial with given
    coefficients, e.g. ``(1, 1, 0)`` for ``1 - nu**2``).
    """

    kind: str
    K: float = 1.0
    nu: tuple = ()
    eta: tuple = ()
    base: RateCurve | None = None
    coeffs: tuple = ()

    def __post_init__(self):
        if self.kind == "power":
            if not self.K > 0:
                raise ConfigError("power rate needs K > 0")
        elif self.kind == "table":
            nu = np.asarray(self.nu, dtype=float)
            eta = np.asarray(self.eta, dtype=float)
            if nu.size < 2 or nu.size != eta.size:
                raise ConfigError("rate table needs matching nu/eta lists of length >= 2")
            if nu[0] != 0.0 or nu[-1] != 1.0 or np.any(np.diff(nu) <= 0):
                raise ConfigError("rate table nodes must increase from 0 to 1")
            if eta[0] != 1.0 or eta[-1] != 0.0 or np.any(np.diff(eta) >= 0):
                raise ConfigError("rate table must decrease strictly from 1 to 0")
            object.__setattr__(self, "nu", tuple(nu.tolist()))
            object.__setattr__(self, "eta", tuple(eta.tolist()))
        elif self.kind == "smoothed":
            if self.base is None or int(self.K) != self.K or self.K < 1:
                raise ConfigError("smoothed rate needs a base curve and integer K >= 1")
        elif self.kind == "bernstein":
            c = np.asarray(self.coeffs, dtype=float)
            # nonincreasing coefficients from 1 to 0 give a strictly decreasing polynomial
            if c.size < 2 or c[0] != 1.0 or c[-1] != 0.0 or np.any(np.diff(c) > 0):
                raise ConfigError("bernstein coefficients must be nonincreasing from 1 to 0")
            object.__setattr__(self, "coeffs", tuple(c.tolist()))
            object.__setattr__(self, "K", float(c.size - 1))
        else:
            raise ConfigError(f"unknown rate kind {self.kind!r}")

    @classmethod
    def power(cls, K: float = 1) -> RateCurve:
        return cls("power", K=float(K))

    @classmethod
    def table(cls, nu, eta) -> RateCurve:
        return cls("table", nu=tuple(nu), eta=tuple(eta))

    @classmethod
    def bernstein(cls, coeffs) -> RateCurve:
        return cls("bernstein", coeffs=tuple(coeffs))

    @property
    def code(self) -> int:
        if self.kind == "power":
            return nm.RATE_POWER
        return nm.RATE_TABLE if self.kind == "table" else nm.RATE_BERNSTEIN

    @cached_property
    def prm(self) -> np.ndarray:
        if self.kind == "power":
            return np.array([self.K])
        if self.kind == "table":
            nu = np.asarray(self.nu)
            eta = np.asarray(self.eta)
            cum = np.concatenate([[0.0], np.cumsum(0.5 * (eta[1:] + eta[:-1]) * np.diff(nu))])
            return np.concatenate([[nu.size], nu, eta, cum])
        K = int(self.K)
        c = np.asarray(self.coeffs) if self.kind == "bernstein" else self.base(np.arange(K + 1) / K)
        d = np.cumsum(c)
        return np.concatenate([[K], c, d])

    def __call__(self, nu):
        nu = np.asarray(nu, dtype=float)
        out = nm.rate_eta_array(self.code, self.prm, np.atleast_1d(nu).ravel())
        return out.reshape(nu.shape) if nu.ndim else float(out[0])

    def antiderivative(self, nu):
        """``H(nu) = int_0^nu eta``; flat beyond 1."""
        nu = np.asarray(nu, dtype=float)
        out = nm.rate_H_array(self.code, self.prm, np.atleast_1d(nu).ravel())
        return out.reshape(nu.shape) if nu.ndim else float(out[0])

    @property
    def integral(self) -> float:
        """``int_0^1 eta``."""
        if self.kind == "power":
            return 1.0 / (self.K + 1.0)
        return float(self.antiderivative(1.0))

    def inverse(self, r: float) -> float:
        if not 0.0 <= r <= 1.0:
            raise ValueError("eta takes values in [0, 1]")
        if r == 1.0:
            return 0.0
        if r == 0.0:
            return 1.0
        if self.kind == "power":
            return 1.0 - r ** (1.0 / self.K)
        return brentq(lambda v: self(v) - r, 0.0, 1.0, xtol=1e-15)

    def to_dict(self) -> dict:
        if self.kind == "power":
            K = self.K
            return {"kind": "power", "K": int(K) if K == int(K) else K}
        if self.kind == "table":
            return {"kind": "table", "nu": list(self.nu), "eta": list(self.eta)}
        if self.kind == "bernstein":
            return {"kind": "bernstein", "coeffs": list(self.coeffs)}
        return {"kind": "smoothed", "K": int(self.K), "base": self.base.to_dict()}

    @classmethod
    def from_dict(cls, d: dict, where: str = "rate") -> RateCurve:
        if not isinstance(d, dict) or "kind" not in d:
            raise ConfigError(f"{where}: expected an object with a 'kind' field")
        kind = d["kind"]
        try:
            if kind == "power":
                if "K" not in d:
                    raise ConfigError(f"{where}.K: missing")
                return cls.power(d["K"])
            if kind == "table":
                for key in ("nu", "eta"):
                    if key not in d:
                        raise ConfigError(f"{where}.{key}: missing")
                return cls.table(d["nu"], d["eta"])
            if kind == "smoothed":
                for key in ("K", "base"):
                    if key not in d:
                        raise ConfigError(f"{where}.{key}: missing")
                return rate_smooth(cls.from_dict(d["base"], f"{where}.base"), d["K"])
            if kind == "bernstein":
                if "coeffs" not in d:
                    raise ConfigError(f"{where}.coeffs: missing")
                return cls.bernstein(d["coeffs"])
        except ConfigError as exc:
            msg = str(exc)
            raise ConfigError(msg if msg.startswith(where) else f"{where}: {msg}") from None
        raise ConfigError(f"{where}.kind: unknown rate kind {kind!r}")


def rate_smooth(base: RateCurve, K: int) -> RateCurve:
    """Bernstein smoothing of ``base`` with K + 1 sample points ``k/K``.

    This is the limit jump probability when an urged particle compares itself
    with K random others and jumps with probability ``base(k/K)``, k being the
    number of those that are behind it.
    """
    if int(K) != K or K < 1:
        raise ValueError("K must be an integer >= 1")
    return RateCurve("smoothed", K=float(K), base=base)


def eta_bar(y: float, gamma: GridCDF, rate: RateCurve) -> float:
    """Jump probability at ``y`` in environment ``gamma``.

    At a continuity point this is ``eta(gamma(y))``; at the left atom it is
    the average of eta over the atom's quantile interval ``[0, gamma(left)]``.
    """
    if abs(y - gamma.left) <= 1e-12 * max(1.0, abs(y)) and gamma.atom_left > 0.0:
        p = gamma.atom_left
        return float(rate.antiderivative(p)) / p
    return float(rate(gamma(y)))


# -------------------------------------------------------------- model params


@dataclass(frozen=True)
class ModelParams:
    """Urge rate, jump law and rate curve, plus an optional unconditional stream."""

    mu: float
    jump: JumpKernel
    rate: RateCurve
    mu2: float = 0.0
    jump2: JumpKernel | None = None

    def __post_init__(self):
        if self.mu < 0 or self.mu2 < 0 or self.mu + self.mu2 <= 0:
            raise ConfigError("need mu >= 0, mu2 >= 0 and mu + mu2 > 0")
        if self.mu2 > 0 and self.jump2 is None:
            raise ConfigError("jump2: missing (required when mu2 > 0)")

    @property
    def speed(self) -> float:
        return wave_speed(self)

    def to_dict(self) -> dict:
        d = {"jump": self.jump.to_dict(), "rate": self.rate.to_dict(), "mu": self.mu, "mu2": self.mu2}
        if self.jump2 is not None:
            d["jump2"] = self.jump2.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict, where: str = "model") -> ModelParams:
        if not isinstance(d, dict):
            raise ConfigError(f"{where}: expected an object")
        for key in ("jump", "rate"):
            if key not in d:
                raise ConfigError(f"{where}.{key}: missing")
        jump = JumpKernel.from_dict(d["jump"], f"{where}.jump")
        rate = RateCurve.from_dict(d["rate"], f"{where}.rate")
        jump2 = JumpKernel.from_dict(d["jump2"], f"{where}.jump2") if d.get("jump2") else None
        try:
            return cls(float(d.get("mu", 1.0)), jump, rate, float(d.get("mu2", 0.0)), jump2)
        except ConfigError as exc:
            raise ConfigError(f"{where}: {exc}") from None


def wave_speed(params: ModelParams) -> float:
    """Drift of the mean: ``mu m1 int eta + mu2 m2_1``."""
    v = params.mu * params.jump.mean * params.rate.integral
    if params.mu2 > 0:
        v += params.mu2 * params.jump2.mean
    return v


def closed_form_wave(K: float, c: float, left: float, right: float, h: float) -> GridCDF:
    """``1 - (1 + exp(K (x - c)))**(-1/K)`` on a grid.

    The wave shape for exponential(1) jumps, unit urge rate and
    ``eta = (1 - nu)**K``; its value at ``c`` is ``1 - 2**(-1/K)``.
    """
    return GridCDF.from_function(lambda x: closed_form_value(K, c, x), left, right, h)


def closed_form_value(K: float, c: float, x):
    z = K * (np.asarray(x, dtype=float) - c)
    return -np.expm1(-np.logaddexp(0.0, z) / K)


def closed_form_median(K: float, c: float = 0.0) -> float:
    return c + math.log(2.0**K - 1.0) / K
