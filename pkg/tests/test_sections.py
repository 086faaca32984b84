import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nhtrap.errors import OutsideChart, WindowExhausted
from nhtrap.sections import SectionGrid
from nhtrap.weights import Weight

T = np.linspace(0.0, 4.0, 5)
U = np.linspace(-1.0, 1.0, 9)


def cubic(t, u):
    return (t * (u[:, 0] ** 3 - u[:, 0]) + 1.0)[:, None]


def test_cubic_spline_reproduces_cubics():
    # not-a-knot splines are exact on cubics; linear in t is exact for t-linear data
    grid = SectionGrid.from_function(cubic, T, [U], 1)
    t = np.array([0.5, 1.7, 3.9])
    u = np.array([[-0.95], [0.123], [0.8]])
    assert np.allclose(grid.evaluate(t, u), cubic(t, u), atol=1e-12)


def test_linear_interpolation():
    grid = SectionGrid.from_function(lambda t, u: (2 * u[:, 0] + t)[:, None], T, [U], 1,
                                     interpolation="linear")
    assert grid.evaluate([1.5], [[0.3]])[0, 0] == pytest.approx(2.1)


def test_two_dimensional_base():
    f = lambda t, u: (u[:, 0] + 2 * u[:, 1] + t)[:, None]
    grid = SectionGrid.from_function(f, T, [U, U], 1)
    u = np.array([[0.1, -0.3], [0.7, 0.2]])
    assert np.allclose(grid.evaluate([1.0, 2.5], u), f(np.array([1.0, 2.5]), u))


def test_validation():
    with pytest.raises(ValueError):
        SectionGrid(np.array([1.0, 0.0]), (U,), np.zeros((2, 9, 1)))
    with pytest.raises(ValueError):
        SectionGrid(T, (U,), np.zeros((5, 8, 1)))
    with pytest.raises(ValueError):
        SectionGrid(T, (U,), np.full((5, 9, 1), np.nan))


def test_window_and_chart_errors():
    grid = SectionGrid.zeros(T, [U], 1).restrict(1.0, 3.0)
    assert list(grid.valid_t) == [1.0, 2.0, 3.0]
    with pytest.raises(WindowExhausted):
        grid.evaluate([3.5], [[0.0]])
    with pytest.raises(OutsideChart):
        grid.evaluate([2.0], [[1.5]])
    with pytest.raises(WindowExhausted):
        grid.restrict(10, 11)


def test_norms_and_rho_constant():
    grid = SectionGrid.from_function(lambda t, u: (0.5 * u[:, 0] / (1 + t))[:, None], T, [U], 1)
    assert np.allclose(grid.sup_norms(), 0.5 / (1 + T))
    assert np.allclose(grid.lipschitz_constants(), 0.5 / (1 + T))
    c = grid.rho_constant(Weight.custom(lambda t: 1 / (1 + t)))
    assert c == pytest.approx(0.5)
    assert grid.is_rho_bounded(Weight.custom(lambda t: 1 / (1 + t)), 0.6)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=45, max_size=45))
def test_csv_and_json_round_trip(values):
    vals = np.array(values).reshape(5, 9, 1)
    grid = SectionGrid(T, (U,), vals, c_sigma=1.5)
    for back in (SectionGrid.from_csv(grid.to_csv()), SectionGrid.from_json(grid.to_json())):
        assert np.array_equal(back.values, grid.values)
        assert np.array_equal(back.t_nodes, grid.t_nodes)
        assert back.c_sigma == 1.5


def test_csv_is_deterministic():
    grid = SectionGrid.from_function(cubic, T, [U], 1)
    assert grid.to_csv() == SectionGrid.from_csv(grid.to_csv()).to_csv()
    assert grid.to_csv().splitlines()[-1].startswith("4.0,1.0,")


def test_distance():
    a = SectionGrid.zeros(T, [U], 1)
    b = SectionGrid.from_function(lambda t, u: np.full((len(t), 1), 0.25), T, [U], 1)
    assert a.distance(b) == pytest.approx(0.25)
