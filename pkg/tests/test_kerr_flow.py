import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nhtrap.acceptance import null_points
from nhtrap.dynamics import flow
from nhtrap.errors import LeftChart, NoConvergence
from nhtrap.kerr.flow import (default_trapped_point, expansion_rates, hamilton_vector_field,
                              radial_potential_root, rescaled_hamilton, trapped_set_solve)
from nhtrap.kerr.metric import KerrDualMetric, KerrParams


def equatorial_radius(m, a, prograde):
    return 2 * m * (1 + np.cos(2 / 3 * np.arccos((-a if prograde else a) / m)))


def test_schwarzschild_photon_sphere():
    t = trapped_set_solve(KerrParams(1.0, 0.0))
    assert t.r == pytest.approx(3.0, abs=1e-11)
    assert max(t.residuals) < 1e-10
    assert t.as_dict()["component"] == "+"


@settings(max_examples=15, deadline=None)
@given(st.floats(0.0, 0.9), st.floats(-2.5, 2.5), st.sampled_from([1.0, -1.0, 2.0]))
def test_trapped_radius_matches_radial_potential(a, xi_phi, sigma):
    params = KerrParams(1.0, a)
    trapped = trapped_set_solve(params, sigma=sigma, xi_phi=xi_phi * sigma)
    oracle = radial_potential_root(params, sigma, xi_phi * sigma)
    assert trapped.r == pytest.approx(oracle, abs=1e-9)
    assert max(trapped.residuals) < 1e-8 * max(1, sigma ** 2)


@pytest.mark.parametrize("a", [0.1, 0.5, 0.9, 0.99])
@pytest.mark.parametrize("prograde", [True, False])
def test_equatorial_orbits(a, prograde):
    trapped = trapped_set_solve(KerrParams(1.0, a), equatorial=True, prograde=prograde)
    assert trapped.r == pytest.approx(equatorial_radius(1.0, a, prograde), abs=1e-9)
    assert trapped.point.theta == pytest.approx(np.pi / 2)


def test_mass_scaling():
    assert trapped_set_solve(KerrParams(2.5, 0.0)).r == pytest.approx(7.5, abs=1e-9)


def test_sigma_zero_rejected():
    with pytest.raises(ValueError):
        trapped_set_solve(KerrParams(1.0, 0.0), sigma=0)


def test_schwarzschild_rates():
    params = KerrParams(1.0, 0.0)
    rates = expansion_rates(params, trapped_set_solve(params))
    assert rates.nu_min == pytest.approx(6 * np.sqrt(3), rel=1e-8)
    assert rates.w_u == pytest.approx(rates.w_s, rel=1e-8)
    assert rates.ht_over_sigma == pytest.approx(6.0, abs=1e-9)
    assert not rates.bracket_flag
    # coordinate time Lyapunov exponent of the photon sphere is 1/(3 sqrt 3 m)
    per_time = rates.nu_min / (rates.conformal * rates.ht_over_sigma)
    assert per_time == pytest.approx(1 / (3 * np.sqrt(3)), rel=1e-8)
    unit = expansion_rates(params, trapped_set_solve(params), xi="unit")
    assert unit.nu_min == pytest.approx(rates.nu_min / 9, rel=1e-8)
    with pytest.raises(ValueError):
        expansion_rates(params, trapped_set_solve(params), xi="other")


def test_kerr_rates_symmetric():
    params = KerrParams(1.0, 0.5)
    rates = expansion_rates(params, default_trapped_point(params))
    assert rates.w_u == pytest.approx(rates.w_s, rel=1e-6)
    assert rates.w_u > 0


def test_rescaled_field_has_unit_time_rate():
    params = KerrParams(1.0, 0.5)
    field = rescaled_hamilton(params)
    p = null_points(params, 4)
    assert np.allclose(field.eval(np.zeros(4), p)[:, 0], 1.0)


def test_photon_orbit_stays_put():
    params = KerrParams(1.0, 0.0)
    p0 = trapped_set_solve(params).point.as_array()
    _, p1 = flow(rescaled_hamilton(params), 0.0, p0, 5.0, tol=1e-12)
    assert p1[1] == pytest.approx(3.0, abs=1e-8)
    assert p1[0] == pytest.approx(5.0)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.0, 0.9), st.integers(0, 1000))
def test_conservation_laws(a, seed):
    params = KerrParams(1.0, a)
    ev = KerrDualMetric(params, analytic=True)
    p0 = null_points(params, 4, seed)
    _, p1 = flow(hamilton_vector_field(ev), np.zeros(4), p0, 20.0, tol=1e-12)
    assert np.abs(ev.value(p1[:, :4], p1[:, 4:])).max() < 1e-9
    assert np.array_equal(p1[:, 4], p0[:, 4]) and np.array_equal(p1[:, 7], p0[:, 7])


def test_guess_outside_chart_raises():
    with pytest.raises(LeftChart):
        trapped_set_solve(KerrParams(1.0, 0.5), guess=[1.0, 0.0, 1.0])
    with pytest.raises(NoConvergence):
        trapped_set_solve(KerrParams(1.0, 0.5), equatorial=True, guess=[6.0, 0.0, -5.0],
                          max_iter=1)
