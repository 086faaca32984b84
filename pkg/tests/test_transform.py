import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nhtrap.dynamics import DiscreteMap
from nhtrap.errors import AllZero, ContractionViolated, NotHyperbolic, WindowExhausted
from nhtrap.sections import SectionGrid
from nhtrap.toy import toy_fixed_point, toy_map, toy_stationary_data
from nhtrap.transform import (FiberBundleMap, StationaryData, fit_decay_rate,
                              graph_transform_step, invariant_section, make_stable_seed,
                              stable_manifold, time_shift, uniform_t_grid, unstable_manifold,
                              verify_invariance)
from nhtrap.weights import Weight

RHO = Weight.power_law(1.0)


@pytest.fixture(scope="module")
def toy_result():
    return unstable_manifold(toy_map(RHO), toy_stationary_data(), RHO, 0.5, 1e-10)


def test_toy_matches_series(toy_result):
    sec = toy_result.section
    exact = toy_fixed_point(sec.valid_t, RHO)
    assert np.abs(sec.valid_values[..., 0] - exact[:, None]).max() < 1e-8
    assert toy_result.residual < 1e-9
    assert 0.4 < toy_result.theta < 0.6


def test_toy_rho_bound(toy_result):
    # sigma = sum 2^-j rho(t + 1 + j) <= 2 rho(t)
    assert toy_result.c_sigma <= 2.0
    assert toy_result.section.is_rho_bounded(RHO, 2.0)


def test_step_contracts_by_half():
    t = uniform_t_grid(100, 160, 1.0)
    u = np.linspace(-0.5, 0.5, 9)
    fmap = toy_map(RHO)
    exact = SectionGrid.from_function(lambda t, u: toy_fixed_point(t, RHO)[:, None], t, [u], 1)
    off = exact.with_values(exact.values + 1e-3)
    new = graph_transform_step(fmap, off)
    # the fiber halves, so an offset of 1e-3 becomes 5e-4
    gap = new.valid_values - exact.values[new.window[0]:new.window[1] + 1]
    assert np.allclose(gap, 5e-4, atol=1e-10)
    assert new.window == (0, len(t) - 2)


@settings(max_examples=10, deadline=None)
@given(st.floats(-0.4, 0.4), st.floats(-0.4, 0.4))
def test_step_is_monotone(a, b):
    # the transform preserves order of sections for this fiber-monotone map
    t = uniform_t_grid(100, 110, 1.0)
    u = np.linspace(-0.5, 0.5, 9)
    lo, hi = sorted((a, b))
    s1 = SectionGrid.from_function(lambda t, u: np.full((len(t), 1), lo), t, [u], 1)
    s2 = SectionGrid.from_function(lambda t, u: np.full((len(t), 1), hi), t, [u], 1)
    fmap = toy_map(RHO)
    assert np.all(graph_transform_step(fmap, s1).valid_values
                  <= graph_transform_step(fmap, s2).valid_values + 1e-15)


def test_time_shift():
    grid = SectionGrid.zeros(uniform_t_grid(0, 10, 0.5), [np.linspace(-1, 1, 5)], 1)
    assert time_shift(grid, -1.0) == 2
    assert time_shift(grid, 1.0) == -2
    with pytest.raises(ValueError):
        time_shift(grid, 0.75)


def test_uniform_grid_requires_divisibility():
    with pytest.raises(ValueError):
        uniform_t_grid(0, 1, 0.3)


def test_window_start_checked():
    with pytest.raises(ValueError):
        unstable_manifold(toy_map(RHO), toy_stationary_data(), RHO, 0.05, t_range=(100, 200))


def test_budget_exhaustion():
    with pytest.raises(WindowExhausted):
        unstable_manifold(toy_map(RHO), toy_stationary_data(), RHO, 0.5, 1e-12, budget=5)


def test_not_hyperbolic_stationary_map():
    flat = DiscreteMap(2, lambda t, x: x.copy())
    with pytest.raises(NotHyperbolic):
        unstable_manifold(toy_map(RHO), StationaryData(1, 1, flat), RHO, 0.5)


def test_uniqueness_from_other_start(toy_result):
    other = unstable_manifold(toy_map(RHO), toy_stationary_data(), RHO, 0.5, 1e-10,
                              initial=lambda t, u: (0.3 * RHO(t) * u[:, 0])[:, None])
    assert toy_result.section.distance(other.section) < 1e-9


def test_verify_invariance_detects_wrong_section(toy_result):
    fmap = toy_map(RHO)
    wrong = toy_result.section.with_values(toy_result.section.values + 1e-4)
    assert verify_invariance(fmap, wrong, seed=1) > 1e-5
    assert verify_invariance(fmap, toy_result.section, nodes=True) < 1e-9


def test_nonlinear_unstable_manifold_oracle():
    # f(t, u, s) = (t - 1, 2u, s/2 + u^2 + rho(t)); sigma = c u^2 + sum 2^-j rho(t+1+j)
    # with c/2 + 1 = 4c, so c = 2/7
    def spatial(t, x):
        u, s = x[:, 0], x[:, 1]
        return np.column_stack([2 * u, 0.5 * s + u ** 2 + RHO(t)])

    res = unstable_manifold(DiscreteMap(2, spatial), toy_stationary_data(), RHO, 0.5, 1e-11,
                            n_base=17)
    t, u = res.section.node_points(valid_only=True)
    exact = 2 / 7 * u[:, 0] ** 2 + toy_fixed_point(t, RHO)
    assert np.abs(res.section.valid_values.ravel() - exact).max() < 1e-9


def test_stable_manifold_follows_preimage_recursion():
    # f(t, u, s) = (t - 1, u/2, 2s + rho(t)); graph points of the stable manifold satisfy
    # sigma(t, u) = (sigma(t - 1, u/2) - rho(t)) / 2; quadratic seeds stay quadratic in u
    fwd = DiscreteMap(2, lambda t, x: np.column_stack([0.5 * x[:, 0], 2 * x[:, 1] + RHO(t)]))
    inv = DiscreteMap(2, lambda t, x: np.column_stack([2 * x[:, 0],
                                                      0.5 * (x[:, 1] - RHO(t + 1))]), 1.0)
    stat = StationaryData(1, 1, DiscreteMap(2, lambda t, x: x * np.array([2.0, 0.5])))
    seed = make_stable_seed(inv, lambda t, u: (0.1 * RHO(t) * (1 + u[:, 0] ** 2))[:, None],
                            100.0, 0.5, 1, 1)
    res = stable_manifold(fwd, stat, seed, RHO, 0.5, 1e-10, t_end=110.0, inverse=inv)
    sec = res.section
    t, u = sec.node_points()
    later = t >= sec.t_nodes[0] + 1
    expected = 0.5 * (sec.evaluate(t[later] - 1, u[later] / 2)[:, 0] - RHO(t[later]))
    assert np.abs(sec.evaluate(t[later], u[later])[:, 0] - expected).max() < 1e-11
    assert res.residual < 1e-9


def test_invariant_section_of_affine_contraction():
    # base u -> 2u, fiber e -> e/3 + rho(t): invariant section sum 3^-j rho(t + 1 + j)
    base = DiscreteMap(1, lambda t, x: 2 * x)
    bundle = FiberBundleMap(base, lambda t, x, e: e / 3 + RHO(t)[:, None], 1)
    res = invariant_section(bundle, RHO, (50.0, 80.0), eps=1.0)
    j = np.arange(200)
    exact = (3.0 ** -j * RHO(res.section.valid_t[:, None] + 1 + j)).sum(axis=1)
    assert np.abs(res.section.valid_values[..., 0] - exact[:, None]).max() < 1e-9
    assert res.extras["k_max"] == pytest.approx(1 / 3, rel=1e-6)


def test_invariant_section_rejects_expanding_fiber():
    base = DiscreteMap(1, lambda t, x: 2 * x)
    bundle = FiberBundleMap(base, lambda t, x, e: 1.5 * e, 1)
    with pytest.raises(ContractionViolated):
        invariant_section(bundle, RHO, (50.0, 80.0))


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 3), st.floats(0.1, 10))
def test_decay_fit_recovers_power(alpha, c):
    t = np.linspace(100, 1000, 181)
    grid = SectionGrid.from_function(lambda t, u: (c * t ** -alpha * (1 + 0 * u[:, 0]))[:, None],
                                     t, [np.linspace(-1, 1, 5)], 1)
    fit = fit_decay_rate(grid)
    assert fit.alpha_fit == pytest.approx(alpha, abs=1e-9)
    assert fit.C == pytest.approx(c, rel=1e-9)
    b = fit_decay_rate(grid, b_derivative=True)
    assert b.alpha_fit == pytest.approx(alpha, abs=0.05)


def test_decay_fit_edge_cases():
    t = np.linspace(1, 5, 5)
    u = [np.linspace(-1, 1, 5)]
    assert np.isnan(fit_decay_rate(SectionGrid.zeros(t, u, 1)).alpha_fit)
    with pytest.raises(AllZero):
        fit_decay_rate(SectionGrid.from_function(lambda t, u: np.ones((len(t), 1)), t, u, 1))
