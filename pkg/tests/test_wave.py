import numpy as np
import pytest
from scipy import integrate
from scipy.stats import norm

from quantwave.acceptance import median_aligned_closed_form
from quantwave.grid import GridCDF
from quantwave.kernels import closed_form_value, closed_form_wave
from quantwave.wave import (
    BracketError,
    extract_phi,
    solve_wave,
    tail_moment_estimate,
    tune_speed,
    wave_residual,
)
from quantwave.frame import FrameSpec, fixed_point

from conftest import exponential_power


@pytest.fixture(scope="module")
def k1_wave():
    return solve_wave([5, 10, 20], exponential_power(1), tol=5e-3, h=1e-2)


# ------------------------------------------------------------------ tune_speed


def test_tune_speed_k1_b10():
    p = exponential_power(1)
    w, sol = tune_speed(10.0, p, 1e-2)
    assert abs(sol.gamma(0.0) - 0.5) <= 1e-4
    assert abs(w - 0.5) <= 0.05


def test_tune_speed_centres_closed_form():
    p = exponential_power(1)
    _, sol = tune_speed(10.0, p, 1e-2)
    g = sol.gamma
    ref = closed_form_wave(1, 0.0, -10, 10, 1e-2)
    x = g.x[(g.x > -7) & (g.x < 7)]
    assert np.max(np.abs(g(x) - ref(x))) <= 2e-2


def test_tune_speed_monotone_bracket():
    p = exponential_power(1)
    w, _ = tune_speed(10.0, p, 1e-2)
    above = fixed_point(FrameSpec(w * 1.01, 10.0, 10.0, 1e-2), p).gamma(0.0)
    below = fixed_point(FrameSpec(w * 0.99, 10.0, 10.0, 1e-2), p).gamma(0.0)
    assert above > 0.5 + 1e-3
    assert below < 0.5 - 1e-3


def test_tune_speed_other_quantile():
    p = exponential_power(2)
    _, sol = tune_speed(8.0, p, 1e-2, nu0=0.25)
    assert abs(sol.gamma(0.0) - 0.25) <= 1e-4


def test_tune_speed_bracket_failure():
    p = exponential_power(1)
    with pytest.raises(BracketError):
        # no quantile of a frame that small can sit this far from its centre
        tune_speed(0.5, p, 1e-2, nu0=0.999999)


# ------------------------------------------------------------------ solve_wave


def test_solve_wave_k1_golden(k1_wave):
    phi = k1_wave.phi
    ref = median_aligned_closed_form(phi, 1)
    assert phi.sup_distance(ref, phi.x) <= 2e-2
    assert k1_wave.converged
    assert abs(k1_wave.w_final - 0.5) <= 1e-2


def test_solve_wave_report_fields(k1_wave):
    frames = k1_wave.frames
    assert frames[0].sup_change is None
    assert all(f.sup_change is not None for f in frames[1:])
    assert all(f.median_residual <= 1e-4 for f in frames)
    d = k1_wave.to_dict()
    assert len(d["frames"]) == len(frames)
    assert isinstance(d["w_residual_monotone"], bool)


def test_solve_wave_phi_is_proper(k1_wave):
    phi = k1_wave.phi
    assert phi.values[0] <= 1e-6
    assert 1 - phi.values[-1] <= 1e-6
    assert -phi.left == pytest.approx(phi.right)


def test_solve_wave_k2_median_and_residual():
    p = exponential_power(2)
    rep = solve_wave([5, 10], p, tol=5e-2, h=1e-2)
    assert rep.phi(0.0) == pytest.approx(0.5, abs=1e-4)
    base = wave_residual(closed_form_wave(2, 0.0, rep.phi.left, rep.phi.right, 1e-2), p)
    assert wave_residual(rep.phi, p) <= 3 * base


def test_solve_wave_reports_non_convergence():
    rep = solve_wave([3, 4], exponential_power(1), tol=1e-12, h=1e-2)
    assert not rep.converged
    assert len(rep.frames) == 2
    assert rep.phi is not None


def test_solve_wave_schedule_validation():
    with pytest.raises(ValueError):
        solve_wave([10, 5], exponential_power(1))
    with pytest.raises(ValueError):
        solve_wave([], exponential_power(1))


def test_extract_phi_window():
    g = closed_form_wave(1, 0.0, -30, 30, 1e-2)
    phi = extract_phi(g, 1e-6)
    assert phi.values[0] <= 1e-6 and 1 - phi.values[-1] <= 1e-6
    # one cell narrower would break a tail bound
    L = phi.right - 1e-2
    assert closed_form_value(1, 0.0, -L) > 1e-6 or 1 - closed_form_value(1, 0.0, L) > 1e-6


# ---------------------------------------------------------------- wave_residual


def test_residual_closed_form_and_order():
    p = exponential_power(1)
    r1 = wave_residual(closed_form_wave(1, 0.0, -20, 20, 1e-3), p)
    r2 = wave_residual(closed_form_wave(1, 0.0, -20, 20, 5e-4), p)
    assert r1 <= 1e-3
    assert r1 / r2 >= 3


@pytest.mark.parametrize("c", [1.0, -2.5, 0.37])
def test_residual_shift_invariance(c):
    p = exponential_power(1)
    phi = closed_form_wave(1, 0.0, -20, 20, 1e-2)
    assert wave_residual(phi.translate(c), p) == wave_residual(phi, p)


def test_residual_closed_form_shifted_c():
    p = exponential_power(2)
    a = wave_residual(closed_form_wave(2, 0.0, -20, 20, 1e-2), p)
    b = wave_residual(closed_form_wave(2, 1.0, -19, 21, 1e-2), p)
    assert b == pytest.approx(a, rel=1e-6)


def test_residual_gaussian_negative_control():
    p = exponential_power(1)
    base = wave_residual(closed_form_wave(1, 0.0, -20, 20, 1e-2), p)
    gauss = GridCDF.from_function(lambda x: norm.cdf(x, scale=1.5), -20, 20, 1e-2)
    assert wave_residual(gauss, p) > 1e3 * base


# ---------------------------------------------------------------- tail moments


def test_tail_moment_mass():
    phi = closed_form_wave(1, 0.0, -30, 30, 1e-2)
    s = tail_moment_estimate(phi, 0)
    assert s.moments[-1] == pytest.approx(1.0, abs=1e-9)


def test_tail_moment_first_order_stabilises():
    phi = closed_form_wave(1, 0.0, -30, 30, 1e-2)
    s = tail_moment_estimate(phi, 1)
    ref, _ = integrate.quad(lambda y: abs(y) * np.exp(y) / (1 + np.exp(y)) ** 2, -60, 60, points=[0])
    assert s.stable
    assert s.moments[-1] == pytest.approx(ref, rel=1e-4)
    assert ref == pytest.approx(2 * np.log(2), rel=1e-9)


def test_tail_moment_truncation_shows_drift():
    phi = closed_form_wave(1, 0.0, -30, 30, 1e-2)
    s = tail_moment_estimate(phi, 1, windows=(2.0, 10.0))
    assert not s.stable
    assert s.moments[0] < s.moments[1]
    with pytest.raises(ValueError):
        tail_moment_estimate(phi, -1)
