import numpy as np
import pytest
from hypothesis import given, strategies as st

from nhtrap.dynamics import DiscreteMap
from nhtrap.errors import SplittingNotInvariant
from nhtrap.hyperbolicity import (Splitting, check_normal_hyperbolicity, map_rates,
                                  smallest_hyperbolic_power, splitting_rates)


def test_coordinate_splitting_dims():
    split = Splitting.coordinate(np.zeros(4), 1, 2, 1)
    assert split.dims == (1, 2, 1)
    assert split.frame.shape == (1, 4, 4)


def test_splitting_rejects_bad_bases():
    with pytest.raises(ValueError):
        Splitting(np.zeros(2), np.zeros((2, 0)), np.array([[1.0], [0.0]]),
                  np.array([[1.0], [0.0]]))
    with pytest.raises(ValueError):
        Splitting(np.zeros(2), np.zeros((2, 0)), np.array([[2.0], [0.0]]),
                  np.array([[0.0], [1.0]]))


@given(st.floats(0.5, 2), st.floats(1.01, 10), st.floats(0.01, 0.99))
def test_diagonal_rates(gamma, lam, nu):
    split = Splitting.coordinate(np.zeros(3), 1, 1, 1)
    rates = splitting_rates(np.diag([gamma, lam, nu]), split)
    assert rates.gamma_min[0] == pytest.approx(gamma)
    assert rates.gamma_max[0] == pytest.approx(gamma)
    assert rates.lam[0] == pytest.approx(lam)
    assert rates.nu[0] == pytest.approx(nu)
    report = check_normal_hyperbolicity(rates, 1)
    assert bool(report) == (lam > max(1, gamma) and nu < min(1, gamma))


def test_leakage_detected():
    split = Splitting.coordinate(np.zeros(2), 0, 1, 1)
    with pytest.raises(SplittingNotInvariant):
        splitting_rates(np.array([[2.0, 0.0], [0.3, 0.5]]), split)


def test_skewed_splitting_of_a_saddle():
    # unstable direction (1, 1)/sqrt 2, stable direction (0, 1)
    mat = np.array([[2.0, 0.0], [1.5, 0.5]])
    u = np.array([[1.0], [1.0]]) / np.sqrt(2)
    s = np.array([[0.0], [1.0]])
    rates = splitting_rates(mat, Splitting(np.zeros(2), np.zeros((2, 0)), u, s))
    assert rates.lam[0] == pytest.approx(2.0)
    assert rates.nu[0] == pytest.approx(0.5)


def test_smallest_power():
    # the tangent rate 1.5 beats lam = 2 only at order 1; nu = 0.9 is below gamma^k
    fmap = DiscreteMap(3, lambda t, x: x * np.array([1.5, 2.0, 0.9]))
    split = Splitting.coordinate(np.zeros(3), 1, 1, 1)
    assert smallest_hyperbolic_power(fmap, split, r=1) == 1
    assert smallest_hyperbolic_power(fmap, split, r=2) is None
    assert map_rates(fmap, split, n=2).lam[0] == pytest.approx(4.0)
