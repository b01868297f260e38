import numpy as np
import pytest

from quantwave.acceptance import median_aligned_closed_form
from quantwave.frame import (
    FrameSpec,
    apply_operator_mc,
    fixed_point,
    lipschitz_bound,
    verify_fixed_point,
    zeta,
)
from quantwave.grid import GridCDF
from quantwave.kernels import JumpKernel, ModelParams, RateCurve, eta_bar

from conftest import exponential_power


@pytest.fixture(scope="module")
def k1_frame():
    spec = FrameSpec(0.5, 10.0, 10.0, 1e-2)
    return spec, fixed_point(spec, exponential_power(1))


# --------------------------------------------------------------------- FrameSpec


def test_frame_spec_validation():
    with pytest.raises(ValueError):
        FrameSpec(0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        FrameSpec(1.0, 0.1, 0.1, 0.05)
    with pytest.raises(ValueError):
        FrameSpec(1e-3, 1.0, 1.0, 1e-2)
    with pytest.raises(ValueError):
        FrameSpec(1.0, 1.0, 1.0005, 1e-2)
    assert FrameSpec(1.0, 2.0, 3.0, 0.01).n == 500


# ------------------------------------------------------------------------ zeta


@pytest.mark.parametrize("curve", [RateCurve.power(1), RateCurve.power(2), RateCurve.bernstein([1, 1, 0])])
def test_zeta_dirac(curve):
    p = ModelParams(1.0, JumpKernel.exponential(1.0), curve)
    g = GridCDF(-2.0, 3.0, np.ones(501))
    x = g.x
    np.testing.assert_allclose(zeta(x, g, p), curve.integral * np.exp(-(x + 2.0)), atol=1e-14)


def test_zeta_at_left_edge():
    p = exponential_power(2)
    g = GridCDF.from_function(lambda x: 0.3 + 0.7 * np.clip((x + 1) / 2, 0, 1), -1.0, 1.0, 0.01)
    assert zeta(-1.0, g, p) == pytest.approx(0.3 * eta_bar(-1.0, g, p.rate), abs=1e-15)


def test_zeta_long_deterministic_jump():
    p = ModelParams(1.0, JumpKernel.deterministic(10.0), RateCurve.power(1))
    g = GridCDF.from_function(lambda x: np.clip((x + 1) / 2, 0, 1), -1.0, 1.0, 0.01)
    gx = g.values
    np.testing.assert_allclose(zeta(g.x, g, p), gx - gx**2 / 2, atol=1e-14)


# ------------------------------------------------------------------ fixed_point


def test_large_speed_is_nearly_dirac():
    sol = fixed_point(FrameSpec(1e3, 1.0, 1.0, 1e-2), exponential_power(1))
    assert sol.p >= 1 - 2.0 / 1e3


@pytest.mark.parametrize("w", [1e-2, 2e-2])
def test_small_speed_concentrates_right(w):
    sol = fixed_point(FrameSpec(w, 1.0, 1.0, 1e-3), exponential_power(1))
    g = sol.gamma
    assert g(0.5) < 1e-9
    assert g(0.9) < 0.02


def test_k1_frame_matches_closed_form(k1_frame):
    _, sol = k1_frame
    g = sol.gamma
    ref = median_aligned_closed_form(g, 1)
    x = g.x[(g.x > -8) & (g.x < 8)]
    assert np.max(np.abs(g(x) - ref(x))) <= 2e-2


def test_fixed_point_characterization(k1_frame):
    spec, sol = k1_frame
    rep = verify_fixed_point(sol.gamma, spec, exponential_power(1))
    assert rep.ok, rep.checks
    assert rep.flux_residual <= 1e-6
    assert abs(sol.gamma_right_raw - 1.0) <= 1e-8


@pytest.mark.parametrize(
    "params, B",
    [
        (ModelParams(1.0, JumpKernel.uniform(0.0, 2.0), RateCurve.bernstein([1, 1, 0])), 5.0),
        # bounded jumps: 1 - gamma underflows to 0 well inside a wider frame
        (ModelParams(1.0, JumpKernel.deterministic(0.75), RateCurve.table([0, 0.5, 1], [1, 0.2, 0])), 2.0),
        (ModelParams(0.5, JumpKernel.exponential(2.0), RateCurve.power(2), 0.3, JumpKernel.uniform(0, 1)), 5.0),
    ],
    ids=["uniform", "deterministic", "two-stream"],
)
def test_fixed_point_other_models(params, B):
    spec = FrameSpec(params.speed, B, B, 1e-2)
    sol = fixed_point(spec, params)
    rep = verify_fixed_point(sol.gamma, spec, params)
    assert rep.ok, rep.checks


def test_verify_flags_missing_atom():
    p = exponential_power(1)
    spec = FrameSpec(0.5, 1.0, 1.0, 1e-2)
    g = GridCDF.from_function(lambda x: np.clip((x + 1) / 2, 0, 1), -1.0, 1.0, 1e-2)
    rep = verify_fixed_point(g, spec, p)
    assert not rep.checks["left_atom"]
    assert not rep.ok


def test_verify_flags_dirac_flux():
    p = exponential_power(1)
    spec = FrameSpec(0.5, 1.0, 1.0, 1e-2)
    g = GridCDF(-1.0, 1.0, np.ones(201))
    rep = verify_fixed_point(g, spec, p)
    assert rep.checks["left_atom"] and rep.checks["right_end"]
    assert not rep.checks["flux"]
    assert rep.flux_residual > 0.1


def test_monotone_in_speed():
    p = exponential_power(1)
    shapes = [fixed_point(FrameSpec(w, 5.0, 5.0, 1e-2), p).gamma.values for w in (0.3, 0.5, 0.8)]
    for a, b in zip(shapes, shapes[1:]):
        assert np.all(b >= a - 1e-3)


def test_monotone_in_frame_edges():
    p = exponential_power(1)
    base = fixed_point(FrameSpec(0.5, 5.0, 5.0, 1e-2), p).gamma
    wider_left = fixed_point(FrameSpec(0.5, 6.0, 5.0, 1e-2), p).gamma
    wider_right = fixed_point(FrameSpec(0.5, 5.0, 6.0, 1e-2), p).gamma
    x = base.x
    # a longer left side makes the shape stochastically smaller, a longer right side larger
    assert np.all(wider_left(x) >= base(x) - 1e-3)
    assert np.all(wider_right(x) <= base(x) + 1e-3)


@pytest.mark.parametrize("c", [0.5, -0.5])
def test_shift_equivariance(c):
    p = exponential_power(1)
    base = fixed_point(FrameSpec(0.5, 5.0, 5.0, 1e-2), p).gamma
    moved = fixed_point(FrameSpec(0.5, 5.0 - c, 5.0 + c, 1e-2), p).gamma
    assert moved.left == pytest.approx(base.left + c)
    np.testing.assert_allclose(moved.values, base.values, atol=1e-3)


def test_continuity_in_speed():
    p = exponential_power(1)
    a = fixed_point(FrameSpec(0.5, 5.0, 5.0, 1e-2), p).gamma
    b = fixed_point(FrameSpec(0.51, 5.0, 5.0, 1e-2), p).gamma
    assert a.sup_distance(b) <= 1e2 * 1e-2


def test_lipschitz_tag(k1_frame):
    spec, sol = k1_frame
    L = lipschitz_bound(exponential_power(1), spec.w)
    assert sol.gamma.lipschitz == L
    assert sol.gamma.lipschitz_excess(L) <= 1e-3


# ----------------------------------------------------------------- Monte Carlo


def test_mc_dirac_environment_renewal_atom():
    # Only the atom accepts (with the averaged probability int eta); elsewhere eta(1) = 0.
    # Renewal cycle: stuck Exp(mu int eta), then one jump min(Y, width) drifted back at speed w.
    p = exponential_power(1)
    w, width = 0.5, 4.0
    spec = FrameSpec(w, 2.0, 2.0, 1e-2)
    g = GridCDF(-2.0, 2.0, np.ones(401))
    mc = apply_operator_mc(g, spec, p, 10**6, seed=0)
    stuck = 1.0 / p.rate.integral
    drift = (1.0 - np.exp(-width)) / w
    assert mc.atom_left == pytest.approx(stuck / (stuck + drift), abs=1e-2)
    # after the atom the occupancy is linear: each excursion covers [-2, -2 + min(Y, 4)]
    assert mc.lipschitz_excess(1.0 / w) <= 1e-3


def test_mc_never_jumps_without_acceptance():
    # a nearly saturated environment with a tiny atom: jumps are essentially never accepted
    p = ModelParams(1.0, JumpKernel.exponential(1.0), RateCurve.power(50))
    spec = FrameSpec(0.5, 2.0, 2.0, 1e-2)
    g = GridCDF(-2.0, 2.0, np.ones(401))
    mc = apply_operator_mc(g, spec, p, 10**5, seed=1)
    assert mc.atom_left >= 1 - 0.1


def test_mc_reproduces_fixed_point(k1_frame):
    spec, sol = k1_frame
    mc = apply_operator_mc(sol.gamma, spec, exponential_power(1), 10**6, seed=11)
    assert mc.values[-1] == pytest.approx(1.0, abs=1e-12)
    assert mc.values[0] > 0
    assert mc.sup_distance(sol.gamma) <= 2e-2
    assert mc.lipschitz_excess(1.0 / spec.w) <= 1e-3


def test_mc_seeded_determinism(k1_frame):
    spec, sol = k1_frame
    a = apply_operator_mc(sol.gamma, spec, exponential_power(1), 10**5, seed=3)
    b = apply_operator_mc(sol.gamma, spec, exponential_power(1), 10**5, seed=3)
    np.testing.assert_array_equal(a.values, b.values)


def test_mc_second_stream_stays_in_frame():
    p = ModelParams(0.5, JumpKernel.exponential(1.0), RateCurve.power(1), 0.5, JumpKernel.deterministic(3.0))
    spec = FrameSpec(p.speed, 2.0, 2.0, 1e-2)
    sol = fixed_point(spec, p)
    mc = apply_operator_mc(sol.gamma, spec, p, 10**6, seed=5)
    assert np.all(np.diff(mc.values) >= 0)
    assert mc.values[-1] == pytest.approx(1.0, abs=1e-12)
    assert mc.sup_distance(sol.gamma) <= 2e-2
