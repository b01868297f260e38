"""Event-driven simulation of n particles that jump forward with rank-dependent probability.

Positions are kept in one sorted contiguous array. A rank query is O(1) when
the picked particle has distinct neighbours and a binary search over the tied
block otherwise; an accepted jump finds its new slot by binary search and
shifts the particles it overtakes by one place.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import _numeric as nm
from .grid import EmpiricalCDF, GridCDF
from .kernels import ModelParams, RateCurve

URGES, ACCEPTED, STREAM2 = 0, 1, 2


@dataclass
class EmpiricalState:
    """Sorted particle positions, their identities and the clock.

    ``ids[i]`` names the particle currently at ``positions[i]``, so
    individual trajectories can be followed across re-sorting. With
    ``track_ids=False`` the ids array is empty and moves are cheaper.
    """

    positions: np.ndarray
    t: float = 0.0
    ids: np.ndarray | None = None
    track_ids: bool = True

    def __post_init__(self):
        p = np.asarray(self.positions, dtype=float)
        if p.ndim != 1 or p.size < 1:
            raise ValueError("need a 1-d array of at least one particle position")
        order = np.argsort(p, kind="stable")
        self.positions = np.ascontiguousarray(p[order])
        if not self.track_ids:
            self.ids = np.zeros(0, dtype=np.int64)
        elif self.ids is None:
            self.ids = order.astype(np.int64)
        else:
            self.ids = np.ascontiguousarray(np.asarray(self.ids, dtype=np.int64)[order])

    @property
    def n(self) -> int:
        return self.positions.size

    @classmethod
    def colocated(cls, n: int, x: float = 0.0, track_ids: bool = True) -> EmpiricalState:
        return cls(np.full(n, float(x)), track_ids=track_ids)

    def cdf(self) -> EmpiricalCDF:
        return EmpiricalCDF(self.positions)

    def copy(self) -> EmpiricalState:
        ids = self.ids.copy() if self.track_ids else None
        return EmpiricalState(self.positions.copy(), self.t, ids, self.track_ids)


@dataclass
class EventLog:
    """Counters and snapshots of a run.

    ``displacement`` and ``displacement_sq`` are the sums of accepted jump
    sizes and of their squares; the mean position moves by
    ``displacement / n``.
    """

    n: int
    urges: int = 0
    accepted: int = 0
    stream2: int = 0
    displacement: float = 0.0
    displacement_sq: float = 0.0
    t_start: float = 0.0
    t_end: float = 0.0
    snapshot_times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list, repr=False)

    @property
    def events(self) -> int:
        return self.urges + self.stream2

    @property
    def mean_speed(self) -> float:
        """Drift of the mean position over the run."""
        return self.displacement / (self.n * (self.t_end - self.t_start))

    @property
    def mean_speed_se(self) -> float:
        """Standard error of :attr:`mean_speed`.

        The total acceptance intensity ``sum_l eta_n(l/n)`` does not depend
        on the configuration (with distinct positions), so the mean position
        is a compound Poisson process and its variance is estimated by the
        sum of squared jumps.
        """
        return math.sqrt(self.displacement_sq) / (self.n * (self.t_end - self.t_start))

    def summary(self) -> dict:
        return {
            "n": self.n,
            "urges": self.urges,
            "accepted": self.accepted,
            "stream2": self.stream2,
            "t_start": self.t_start,
            "t_end": self.t_end,
            "mean_speed": self.mean_speed,
            "mean_speed_se": self.mean_speed_se,
            "snapshot_times": list(self.snapshot_times),
        }


def eta_table(rate: RateCurve, n: int) -> np.ndarray:
    """``table[l] = eta_n(l / n)`` for ranks ``l = 0..n``."""
    return np.asarray(rate(np.arange(n + 1) / n), dtype=float)


@njit(cache=True)
def _tie_block(pos, i):
    """Half-open index range of particles sharing ``pos[i]``."""
    x = pos[i]
    n = pos.shape[0]
    lo = 0
    hi = i
    while lo < hi:
        mid = (lo + hi) // 2
        if pos[mid] < x:
            lo = mid + 1
        else:
            hi = mid
    a = lo
    lo = i + 1
    hi = n
    while lo < hi:
        mid = (lo + hi) // 2
        if pos[mid] <= x:
            lo = mid + 1
        else:
            hi = mid
    return a, lo


@njit(cache=True)
def _rank(pos, i, rng):
    n = pos.shape[0]
    x = pos[i]
    if (i == 0 or pos[i - 1] != x) and (i == n - 1 or pos[i + 1] != x):
        return i + 1
    a, b = _tie_block(pos, i)
    return a + 1 + int(rng.random() * (b - a))


@njit(cache=True)
def _move(pos, ids, i, new):
    """Move particle i to ``new >= pos[i]`` keeping the array sorted."""
    n = pos.shape[0]
    lo = i + 1
    hi = n
    while lo < hi:
        mid = (lo + hi) // 2
        if pos[mid] <= new:
            lo = mid + 1
        else:
            hi = mid
    k = lo - 1
    m = k - i
    # copying through views lets LLVM vectorize the overlapping left shift
    dst = pos[i:k]
    src = pos[i + 1 : k + 1]
    for j in range(m):
        dst[j] = src[j]
    pos[k] = new
    # ids may be empty when identities are not tracked
    if ids.shape[0] > 0:
        pid = ids[i]
        idst = ids[i:k]
        isrc = ids[i + 1 : k + 1]
        for j in range(m):
            idst[j] = isrc[j]
        ids[k] = pid


@njit(cache=True)
def _run(pos, ids, t, t_stop, max_events, mu, mu2, table, jkind, jprm, j2kind, j2prm, rng, counts, sums):
    """Advance until ``t_stop`` or ``max_events`` events; returns the new clock."""
    n = pos.shape[0]
    total = n * (mu + mu2)
    mean_wait = 1.0 / total
    done = 0
    while done < max_events:
        dt = rng.exponential(mean_wait)
        if t + dt > t_stop:
            # memoryless: the next event is redrawn on resumption
            return t_stop
        t += dt
        done += 1
        i = int(rng.random() * n)
        if i >= n:
            i = n - 1
        if mu2 > 0.0 and rng.random() * (mu + mu2) >= mu:
            size = nm.jump_sample(j2kind, j2prm, rng)
            counts[2] += 1
        else:
            counts[0] += 1
            r = _rank(pos, i, rng)
            if rng.random() >= table[r]:
                continue
            size = nm.jump_sample(jkind, jprm, rng)
            counts[1] += 1
        sums[0] += size
        sums[1] += size * size
        if size > 0.0:
            _move(pos, ids, i, pos[i] + size)
    return t


def _engine_args(params: ModelParams, eta_n: RateCurve, n: int):
    j2 = params.jump2 if params.jump2 is not None else params.jump
    return (
        params.mu, params.mu2, eta_table(eta_n, n),
        params.jump.code, params.jump.prm, j2.code, j2.prm,
    )  # fmt: skip


def quantile_of(state: EmpiricalState, index: int, rng: np.random.Generator) -> float:
    """Rank fraction ``l / n`` of the particle at sorted slot ``index``.

    Co-located particles get a rank drawn uniformly over their tied block.
    """
    if not 0 <= index < state.n:
        raise IndexError(f"particle index {index} out of range for n={state.n}")
    p = state.positions
    x = p[index]
    a = int(np.searchsorted(p, x, side="left"))
    b = int(np.searchsorted(p, x, side="right"))
    rank = a + 1 if b - a == 1 else int(rng.integers(a + 1, b + 1))
    return rank / state.n


@dataclass(frozen=True)
class StepRecord:
    index: int
    particle: int
    kind: str
    accepted: bool
    size: float


def step(state: EmpiricalState, params: ModelParams, eta_n: RateCurve, rng: np.random.Generator) -> StepRecord:
    """Apply one event in place and describe it.

    The clock advances by an exponential wait of total rate ``n (mu + mu2)``.
    A uniformly chosen particle then either gets a type-1 urge, accepted with
    probability ``eta_n(rank / n)`` and of size drawn from ``jump``, or (with
    probability ``mu2 / (mu + mu2)``) a type-2 jump of size drawn from ``jump2``.
    """
    n = state.n
    state.t += rng.exponential(1.0 / (n * (params.mu + params.mu2)))
    i = int(rng.integers(n))
    pid = int(state.ids[i]) if state.track_ids else -1
    if params.mu2 > 0 and rng.random() * (params.mu + params.mu2) >= params.mu:
        size = float(params.jump2.sample(rng, 1)[0])
        kind, accepted = "stream2", True
    else:
        nu = quantile_of(state, i, rng)
        kind = "urge"
        accepted = bool(rng.random() < float(eta_n(nu)))
        size = float(params.jump.sample(rng, 1)[0]) if accepted else 0.0
    if size > 0.0:
        _move(state.positions, state.ids, i, state.positions[i] + size)
    return StepRecord(i, pid, kind, accepted, size)


def run(
    params: ModelParams,
    state: EmpiricalState,
    T: float,
    rng: np.random.Generator,
    eta_n: RateCurve | None = None,
    snapshot_times=(),
    log: EventLog | None = None,
) -> EventLog:
    """Simulate ``state`` in place for a duration ``T``.

    ``eta_n`` defaults to the model's rate curve. Snapshots (copies of the
    empirical CDF) are taken at the requested absolute times within the run.
    Results are a deterministic function of the Generator's state.
    """
    if not T > 0:
        raise ValueError("horizon must be positive")
    eta_n = params.rate if eta_n is None else eta_n
    n = state.n
    args = _engine_args(params, eta_n, n)
    if log is None:
        log = EventLog(n, t_start=state.t)
    counts = np.zeros(3, dtype=np.int64)
    sums = np.zeros(2)
    t_end = state.t + T
    stops = sorted({float(s) for s in snapshot_times if state.t <= s <= t_end})
    big = np.iinfo(np.int64).max
    for s in stops:
        if s > state.t:
            state.t = _run(state.positions, state.ids, state.t, s, big, *args, rng, counts, sums)
        log.snapshot_times.append(s)
        log.snapshots.append(EmpiricalCDF(state.positions.copy()))
    if t_end > state.t:
        state.t = _run(state.positions, state.ids, state.t, t_end, big, *args, rng, counts, sums)
    log.urges += int(counts[URGES])
    log.accepted += int(counts[ACCEPTED])
    log.stream2 += int(counts[STREAM2])
    log.displacement += float(sums[0])
    log.displacement_sq += float(sums[1])
    log.t_end = state.t
    return log


def simulate(
    params: ModelParams,
    n: int,
    T: float,
    seed,
    eta_n: RateCurve | None = None,
    snapshot_times=(),
    initial: EmpiricalState | None = None,
    track_ids: bool = True,
) -> tuple[EventLog, EmpiricalState]:
    """Fresh run from all particles at 0 (or ``initial``), seeded."""
    if n < 1:
        raise ValueError("n must be >= 1")
    state = EmpiricalState.colocated(n, track_ids=track_ids) if initial is None else initial.copy()
    rng = np.random.default_rng(seed)
    log = run(params, state, T, rng, eta_n, snapshot_times)
    return log, state


def recenter_median(cdf: EmpiricalCDF) -> EmpiricalCDF:
    """Shift the sample so its lower median (rank ceil(n/2)) sits at 0."""
    return EmpiricalCDF(cdf.positions - cdf.lower_median())


def empirical_sup_distance(a: EmpiricalCDF, b: GridCDF) -> float:
    """Sup of ``|F_a - F_b|`` over b's nodes and a's jump points (both one-sided limits)."""
    x = a.positions
    fb = b(x)
    d_jump = max(np.max(np.abs(a(x) - fb)), np.max(np.abs(a.left_limit(x) - fb)))
    d_grid = np.max(np.abs(a(b.x) - b(b.x)))
    return float(max(d_jump, d_grid))


def pooled_snapshot(snapshots) -> EmpiricalCDF:
    """Average of several recentered empirical CDFs, as one pooled sample."""
    return EmpiricalCDF(np.concatenate([recenter_median(s).positions for s in snapshots]))


@dataclass
class StationaryResult:
    seed: object
    distance: float
    log: EventLog


def stationary_profile(
    params: ModelParams,
    n: int,
    reference: GridCDF,
    seed,
    burn_in_factor: float = 10.0,
    n_snapshots: int = 10,
    eta_n: RateCurve | None = None,
) -> StationaryResult:
    """Long-run recentered profile of n particles against a reference shape.

    Starting with all particles at 0, the system runs for a burn-in of
    ``burn_in_factor * n / v`` and then takes ``n_snapshots`` snapshots
    spaced ``n / (n_snapshots v)`` apart. The recentered snapshots are pooled
    and compared with ``reference`` in sup norm.
    """
    v = params.speed
    burn = burn_in_factor * n / v
    gap = n / (n_snapshots * v)
    times = [burn + gap * (k + 1) for k in range(n_snapshots)]
    log, _ = simulate(params, n, times[-1], seed, eta_n, times, track_ids=False)
    pooled = pooled_snapshot(log.snapshots)
    return StationaryResult(seed, empirical_sup_distance(pooled, reference), log)
