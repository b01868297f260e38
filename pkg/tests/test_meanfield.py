import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quantwave.grid import GridCDF
from quantwave.kernels import JumpKernel, ModelParams, RateCurve, closed_form_wave, wave_speed
from quantwave.meanfield import (
    MonotonicityError,
    StabilityError,
    WindowOverflowError,
    conservation_residual,
    integrate,
    l1_distance_to_wave,
    MeanFieldState,
    pad,
    rhs,
)

from conftest import exponential_power

EXP = JumpKernel.exponential(1.0)


def dirac(left=0.0, right=5.0, h=1e-2):
    return GridCDF.from_function(lambda x: np.ones_like(x), left, right, h)


def uniform01(left=-5.0, right=15.0, h=1e-2):
    return GridCDF.from_function(lambda x: np.clip(x, 0, 1), left, right, h)


# ------------------------------------------------------------------------ rhs


@pytest.mark.parametrize("curve", [RateCurve.power(1), RateCurve.power(3), RateCurve.bernstein([1, 1, 0])])
def test_rhs_dirac_atom(curve):
    p = ModelParams(1.0, EXP, curve)
    f = dirac()
    np.testing.assert_allclose(rhs(f, p), -curve.integral * np.exp(-f.x), atol=1e-14)


def test_rhs_dirac_with_empty_left_window():
    p = exponential_power(1)
    f = GridCDF.from_function(lambda x: (x >= 0).astype(float), -2.0, 5.0, 1e-2)
    r = rhs(f, p)
    x = f.x
    assert np.all(r[x < -1e-9] == 0.0)
    # the unit cell mass sits half a cell behind 0
    right = x > 1e-9
    np.testing.assert_allclose(r[right], -0.5 * np.exp(-(x[right] + 0.005)), atol=1e-12)


def test_rhs_closed_form_wave():
    p = exponential_power(1)
    phi = closed_form_wave(1, 0.0, -20, 20, 1e-2)
    dphi = phi.values * (1 - phi.values)
    assert np.max(np.abs(rhs(phi, p) + 0.5 * dphi)) <= 1e-5


def test_rhs_second_stream_only():
    p = ModelParams(0.0, EXP, RateCurve.power(1), 1.0, EXP)
    f = dirac()
    np.testing.assert_allclose(rhs(f, p), -np.exp(-f.x), atol=1e-14)


def random_cdf(seed, left=-3.0, right=12.0, h=0.05):
    rng = np.random.default_rng(seed)
    n = int(round((right - left) / h))
    inc = rng.exponential(size=n) * (rng.random(n) < 0.3)
    inc[n // 4] += 1.0
    v = np.concatenate([[0.0], np.cumsum(inc)])
    v /= v[-1]
    # push the bulk to the left so the right tail fits in the window
    k = int(0.5 * n)
    v[k:] = 1.0
    v[:k] = v[:k] / v[k - 1] if v[k - 1] > 0 else v[:k]
    return GridCDF(left, right, np.minimum(v, 1.0))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_rhs_nonpositive_and_zero_before_mass(seed):
    f = random_cdf(seed)
    r = rhs(f, exponential_power(2))
    assert np.all(r <= 0)
    first = int(np.argmax(f.values > 0))
    assert np.all(r[:first] == 0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([1.0, 2.0, 3.0]))
def test_rhs_l1_norm_is_speed(seed, K):
    f = random_cdf(seed, right=40.0)
    p = exponential_power(K)
    assert np.trapezoid(-rhs(f, p), f.x) == pytest.approx(wave_speed(p), abs=2e-3)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.1, 3.0), st.floats(0.1, 3.0))
def test_rhs_two_stream_additivity(seed, mu, mu2):
    f = random_cdf(seed)
    rate = RateCurve.power(2)
    j2 = JumpKernel.uniform(0.0, 1.5)
    both = rhs(f, ModelParams(mu, EXP, rate, mu2, j2))
    first = rhs(f, ModelParams(mu, EXP, rate))
    second = rhs(f, ModelParams(0.0, EXP, rate, mu2, j2))
    np.testing.assert_allclose(both, first + second, atol=1e-13)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.1, 1.0))
def test_one_step_preserves_monotonicity(seed, frac):
    f = random_cdf(seed)
    p = exponential_power(1)
    s = integrate(f, frac * f.h, frac * f.h, p, moving_window=False)
    assert np.all(np.diff(s.f.values) >= -1e-12)
    assert np.all(s.f.values <= f.values + 1e-12)


# ------------------------------------------------------------------ integrate


def test_integrate_zero_time():
    f0 = uniform01()
    s = integrate(f0, 0.0, 5e-3, exponential_power(1))
    assert s.f is f0 and s.t == 0.0


def test_integrate_travelling_wave_shifts():
    p = exponential_power(1)
    phi = closed_form_wave(1, 0.0, -20, 20, 1e-2)
    s = integrate(pad(phi, 0, 10), 2.0, 5e-3, p)
    inner = phi.x[200:-200]
    assert s.f.translate(-1.0).sup_distance(phi, inner) <= 1e-4


def test_integrate_mean_moves_at_speed():
    p = exponential_power(1)
    f0 = uniform01()
    s = integrate(f0, 5.0, 5e-3, p)
    assert s.f.mean() - f0.mean() == pytest.approx(2.5, abs=1e-3)


def test_integrate_time_monotone_pointwise():
    p = exponential_power(2)
    f0 = uniform01()
    s = integrate(f0, 2.0, 5e-3, p, moving_window=False)
    assert np.all(s.f.values <= f0.values + 1e-12)
    assert s.max_rate > 0


def test_stability_bound_enforced():
    with pytest.raises(StabilityError):
        integrate(uniform01(), 1.0, 0.02, exponential_power(1))
    assert issubclass(StabilityError, MonotonicityError)


def test_window_overflow():
    f0 = GridCDF.from_function(lambda x: np.clip(x, 0, 1), -1.0, 2.0, 1e-2)
    with pytest.raises(WindowOverflowError):
        integrate(f0, 5.0, 5e-3, exponential_power(1), moving_window=False)


def test_snapshots_recorded():
    s = integrate(uniform01(), 2.0, 5e-3, exponential_power(1), snapshot_times=[0.0, 1.0, 2.0])
    assert [round(x.t, 9) for x in s.snapshots] == [0.0, 1.0, 2.0]


# -------------------------------------------------------------- conservation


def test_conservation_zero_time():
    f0 = uniform01()
    assert conservation_residual(f0, f0, 0.0, exponential_power(1)) == 0.0


def test_conservation_after_integration():
    p = exponential_power(1)
    f0 = uniform01()
    s = integrate(f0, 5.0, 5e-3, p)
    assert conservation_residual(f0, s.f, 5.0, p) <= 1e-3


def test_conservation_exact_shift():
    p = exponential_power(1)
    f0 = uniform01()
    assert conservation_residual(f0, f0.translate(2.5), 5.0, p) <= 1e-12


# ------------------------------------------------------------ distance to wave


def test_l1_distance_of_shifted_wave_is_zero():
    p = exponential_power(1)
    phi = closed_form_wave(1, 0.0, -20, 20, 1e-2)
    state = MeanFieldState(phi.translate(0.5 * 3.0), 3.0, p)
    assert l1_distance_to_wave(state, phi) <= 1e-12


def test_l1_distance_decreases_from_mean_matched_start():
    p = exponential_power(1)
    phi = closed_form_wave(1, 0.0, -25, 25, 1e-2)
    m = phi.mean()
    f0 = GridCDF.from_function(lambda x: np.clip((x - m + 1.0) / 2.0, 0, 1), -25, 25, 1e-2)
    s = integrate(pad(f0, 0, 10), 6.0, 5e-3, p, snapshot_times=np.arange(0.0, 6.5, 1.0))
    d = [l1_distance_to_wave(x, phi) for x in s.snapshots]
    assert all(b <= a + 1e-4 for a, b in zip(d, d[1:]))
    assert d[-1] < 0.5 * d[0]


def test_l1_distance_from_unit_shift_tends_to_one():
    p = exponential_power(1)
    phi = closed_form_wave(1, 0.0, -25, 25, 1e-2)
    s = integrate(pad(phi.translate(1.0), 0, 10), 4.0, 5e-3, p)
    assert l1_distance_to_wave(s, phi) == pytest.approx(1.0, abs=1e-3)
