import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nhtrap.errors import NoContraction, SignatureLost
from nhtrap.kerr.metric import KerrDualMetric, KerrParams
from nhtrap.kerr.perturbation import (MetricPerturbation, PerturbedDualMetric, characteristic_graph,
                                      default_box, perturbed_dual_metric,
                                      signature_loss_amplitude)


def oracle(tau, xprime, alpha, n=60):
    big_y = np.zeros_like(tau)
    for _ in range(n):
        big_y = -np.sin(tau ** alpha * big_y + xprime)
    return big_y


@settings(max_examples=30, deadline=None)
@given(st.floats(0.5, 2.0), st.integers(0, 10_000))
def test_graph_matches_fixed_point(alpha, seed):
    rng = np.random.default_rng(seed)
    tau = rng.uniform(0.01, 0.2, 50)
    xp = rng.uniform(-3, 3, 50)
    graph = characteristic_graph(lambda y, i: y, lambda t, y, i: t ** alpha * np.sin(y + xp[i]),
                                 alpha, np.arange(50), tau)
    assert graph.residual < 1e-12
    assert np.allclose(graph.values / tau ** alpha, oracle(tau, xp, alpha), atol=1e-10)
    assert graph.contraction < 0.5
    assert graph.scaled_sup <= 1.0 + 1e-12


def test_graph_with_nonlinear_p0():
    # p0 = y + y^2 with given slope, p~ = tau (cos x' + y)
    tau = np.array([0.05, 0.1])
    xp = np.array([0.3, 1.2])
    graph = characteristic_graph(lambda y, i: y + y ** 2, lambda t, y, i: t * (np.cos(xp[i]) + y),
                                 1.0, np.arange(2), tau, dp0=np.ones(2))
    y = graph.values
    assert np.allclose(y + y ** 2 + tau * (np.cos(xp) + y), 0, atol=1e-13)


def test_no_contraction():
    with pytest.raises(NoContraction):
        characteristic_graph(lambda y, i: y, lambda t, y, i: 5 * t * np.sin(y), 1.0,
                             np.arange(1), np.array([0.5]))
    with pytest.raises(NoContraction):
        characteristic_graph(lambda y, i: y, lambda t, y, i: t * y, 1.0, np.arange(1),
                             np.array([0.5]), tau0=0.2)


def test_perturbation_bounds():
    pert = MetricPerturbation.make(1.0, 0.1)
    x = np.array([[100.0, 4.0, 1.0, 0.0]])
    g = pert.components(x)
    assert g[0, 0, 0] == pytest.approx(0.1 * np.sin(4.0) / 100)
    assert np.count_nonzero(g) == 1
    assert pert.check(x) <= 0.1
    with pytest.raises(ValueError):
        MetricPerturbation(pert.spec, np.ones((4, 4)) * 2)


def test_zero_amplitude_gives_exact_kerr():
    params = KerrParams(1.0, 0.5)
    ev = perturbed_dual_metric(params, MetricPerturbation.make(1.0, 0.0))
    assert isinstance(ev, KerrDualMetric)


def test_perturbed_inverse_and_decay():
    params = KerrParams(1.0, 0.5)
    ev = perturbed_dual_metric(params, MetricPerturbation.make(1.0, 0.1))
    x = np.array([[100.0, 4.0, 1.0, 0.3], [1e4, 4.0, 1.0, 0.3]])
    assert np.allclose(ev.metric(x) @ ev.inverse_metric(x), np.eye(4), atol=1e-12)
    exact = KerrDualMetric(params).inverse_metric(x)
    gap = np.abs(ev.inverse_metric(x) - exact).max(axis=(1, 2))
    assert gap[1] == pytest.approx(gap[0] / 100, rel=5e-3)


def test_analytic_derivatives_agree():
    params = KerrParams(1.0, 0.5)
    pert = MetricPerturbation.make(0.5, 0.1, "sin_r_cos_t")
    x = np.array([[50.0, 4.0, 1.0, 0.3]])
    fd = PerturbedDualMetric(params, pert)
    an = PerturbedDualMetric(params, pert, analytic=True)
    for axis in range(4):
        assert np.allclose(fd.metric_derivative(x, axis), an.metric_derivative(x, axis),
                           atol=1e-9)


def test_signature_loss():
    params = KerrParams(1.0, 0.5)
    box = default_box(params)
    amp = signature_loss_amplitude(params, 1.0, "sin_r", box, n=5, iters=30)
    assert 0 < amp < 10
    perturbed_dual_metric(params, MetricPerturbation.make(1.0, 0.5 * amp, "sin_r"), box, n=5)
    with pytest.raises(SignatureLost):
        perturbed_dual_metric(params, MetricPerturbation.make(1.0, 1.5 * amp, "sin_r"), box,
                              n=5)
