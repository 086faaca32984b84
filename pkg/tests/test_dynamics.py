import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nhtrap.dynamics import (DiscreteMap, VectorField, flow, integrate, invert_map_step, jacobian,
                             time_one_map)
from nhtrap.errors import NonFinite


def linear_field(a, b):
    return VectorField(2, lambda t, x: x * np.array([a, b]), time_component=-1.0,
                       autonomous=True)


@settings(max_examples=25, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-1, 1), st.floats(-1, 1),
       st.floats(0.1, 3))
def test_linear_flow_matches_exponential(a, b, x0, y0, duration):
    t, x = flow(linear_field(a, b), 5.0, [x0, y0], duration, tol=1e-11)
    expected = np.array([x0 * np.exp(a * duration), y0 * np.exp(b * duration)])
    assert t == pytest.approx(5.0 - duration)
    assert np.allclose(x, expected, atol=1e-9, rtol=1e-9)


def test_time_dependent_flow_quadrature():
    # x' = t with t decreasing at unit rate: x(s) = t0 s - s^2 / 2
    field = VectorField(1, lambda t, x: t[:, None] + 0 * x, time_component=-1.0)
    t, x = flow(field, np.array([10.0, 20.0]), np.zeros((2, 1)), 2.0)
    assert np.allclose(t, [8.0, 18.0])
    assert np.allclose(x[:, 0], [10 * 2 - 2.0, 20 * 2 - 2.0], atol=1e-10)


def test_integrate_samples_and_endpoint():
    traj = integrate(linear_field(1.0, -1.0), (0.0, [1.0, 1.0]), 1.0, samples=[0.25, 0.5])
    assert np.allclose(traj.flow_times, [0.25, 0.5, 1.0])
    assert np.allclose(traj.states[:, 0], np.exp(traj.flow_times), atol=1e-9)
    t_end, x_end = traj.end
    assert t_end == pytest.approx(-1.0)
    assert np.allclose(x_end, [np.e, 1 / np.e], atol=1e-9)


def test_integrate_reports_blow_up():
    field = VectorField(1, lambda t, x: np.where(x > 1e3, np.nan, x ** 2), autonomous=True)
    with pytest.raises(NonFinite):
        integrate(field, (0.0, [1.0]), 2.0)


def test_integrate_rejects_bad_tolerance():
    with pytest.raises(ValueError):
        integrate(linear_field(1, 1), (0.0, [1.0, 1.0]), 1.0, tol=0)


def test_time_one_map_composes():
    field = linear_field(0.3, -0.7)
    one = time_one_map(field)
    two = time_one_map(field, duration=2.0)
    t1, x1 = one.power(2)(0.0, [0.5, 0.5])
    t2, x2 = two(0.0, [0.5, 0.5])
    assert t1 == pytest.approx(t2)
    assert np.allclose(x1, x2, atol=1e-10)


def test_jacobian_of_linear_map():
    mat = np.array([[2.0, 1.0], [0.0, 0.5]])
    fmap = DiscreteMap(2, lambda t, x: x @ mat.T)
    assert np.allclose(jacobian(fmap, (0.0, [0.3, -0.1])), mat, atol=1e-8)
    batch = jacobian(fmap, (np.zeros(3), np.ones((3, 2))))
    assert batch.shape == (3, 2, 2)


@settings(max_examples=25, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1))
def test_invert_map_step_inverts(y0, y1):
    fmap = DiscreteMap(2, lambda t, x: np.column_stack([2 * x[:, 0] + 0.1 * np.sin(x[:, 1]),
                                                       0.5 * x[:, 1] + 0.01 * t]))
    t_in, x = invert_map_step(fmap, (3.0, [y0, y1]))
    assert t_in == pytest.approx(4.0)
    _, back = fmap(t_in, x)
    assert np.allclose(back, [y0, y1], atol=1e-11)
