import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nhtrap.errors import OutsideChart, SignatureLost
from nhtrap.kerr.closed_form import closed_form_G, closed_form_hamilton
from nhtrap.kerr.flow import hamilton_field
from nhtrap.kerr.metric import (KerrDualMetric, KerrParams, PhasePoint, check_signature,
                                dual_metric_value, kerr_inverse_components,
                                kerr_metric_components, kerr_metric_derivative, metric)

spins = st.floats(0.0, 0.95)
radii = st.floats(2.2, 9.0)
polar = st.floats(0.2, np.pi - 0.2)


def test_params_validation():
    with pytest.raises(ValueError):
        KerrParams(1.0, 1.0)
    with pytest.raises(ValueError):
        KerrParams(-1.0, 0.0)
    assert KerrParams(1.0, 0.6).r_plus == pytest.approx(1.8)


@settings(max_examples=40, deadline=None)
@given(spins, radii, polar)
def test_inverse_is_inverse(a, r, th):
    params = KerrParams(1.0, a)
    if r <= params.r_plus + 0.05:
        return
    g = kerr_metric_components(params, np.array([r]), np.array([th]))
    gi = kerr_inverse_components(params, np.array([r]), np.array([th]))
    assert np.allclose(g[0] @ gi[0], np.eye(4), atol=1e-12)
    check_signature(g)


@settings(max_examples=30, deadline=None)
@given(spins, radii, polar, st.sampled_from([1, 2]))
def test_analytic_derivative_matches_differences(a, r, th, axis):
    params = KerrParams(1.0, a)
    if r <= params.r_plus + 0.05:
        return
    x = np.array([[0.0, r, th, 0.0]])
    fd = KerrDualMetric(params).metric_derivative(x, axis)
    exact = kerr_metric_derivative(params, x[:, 1], x[:, 2], axis)
    assert np.allclose(fd, exact, atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(spins, radii, polar, st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2),
       st.floats(-2, 2))
def test_dual_metric_against_carter_form(a, r, th, sig, xr, xt, xp):
    params = KerrParams(1.0, a)
    if r <= params.r_plus + 0.05:
        return
    p = np.array([[0.0, r, th, 0.3, sig, xr, xt, xp]])
    ev = KerrDualMetric(params)
    assert ev.value(p[:, :4], p[:, 4:])[0] == pytest.approx(closed_form_G(params, p)[0],
                                                            abs=1e-10)
    assert np.allclose(hamilton_field(ev, p), closed_form_hamilton(params, p), atol=1e-8)


def test_metric_entry_point_and_chart():
    params = KerrParams(1.0, 0.5)
    g = metric(params, PhasePoint(0, 4.0, 1.0, 0, 1, 0, 0, 0))
    assert g.shape == (4, 4)
    with pytest.raises(OutsideChart):
        metric(params, PhasePoint(0, 1.5, 1.0, 0, 1, 0, 0, 0))
    with pytest.raises(OutsideChart):
        metric(params, PhasePoint(0, 4.0, 0.01, 0, 1, 0, 0, 0))


def test_signature_loss_detected():
    g = np.diag([1.0, 1.0, -1.0, -1.0])[None]
    with pytest.raises(SignatureLost):
        check_signature(g)


def test_schwarzschild_null_covector():
    # g^tt = 1/(1 - 2/r), g^rr = -(1 - 2/r); sigma = 1, xi_r = 1/(1 - 2/r) is null at any r
    r = 5.0
    f = 1 - 2 / r
    pt = PhasePoint(0, r, np.pi / 2, 0, 1.0, 1 / f, 0, 0)
    assert dual_metric_value(KerrParams(1.0, 0.0), pt) == pytest.approx(0.0, abs=1e-14)
    with pytest.raises(ValueError):
        PhasePoint(0, r, 1, 0, 0, 0, 0, 0)
