import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from nhtrap.estimators import DecayRateFit, StableManifoldSolver, UnstableManifoldSolver
from nhtrap.torus import torus_perturbed_field, torus_stationary_data
from nhtrap.toy import toy_fixed_point, toy_map, toy_stationary_data
from nhtrap.weights import Weight

RHO = Weight.power_law(1.0)


def test_params_round_trip():
    est = UnstableManifoldSolver(eps=0.5, tol=1e-9)
    assert est.get_params()["eps"] == 0.5
    other = clone(est).set_params(n_base=17)
    assert other.n_base == 17 and est.n_base == 9


def test_fit_predict_toy():
    est = UnstableManifoldSolver(eps=0.5).fit(toy_map(RHO), toy_stationary_data(), RHO)
    X = np.array([[120.0, 0.1], [150.0, -0.3]])
    assert np.allclose(est.predict(X)[:, 0], toy_fixed_point(X[:, 0], RHO), atol=1e-8)
    assert est.n_iter_ > 0 and est.residual_ < 1e-9
    with pytest.raises(ValueError):
        est.predict(np.ones((2, 3)))


def test_fit_flow_problem():
    field = torus_perturbed_field(1.0, 0.1)
    est = UnstableManifoldSolver(eps=0.4, n_power=5, n_base=17, t_range=(100.0, 150.0))
    est.fit(field, torus_stationary_data(), RHO)
    assert est.result_.extras["power"] == 5


def test_unfitted_and_invalid():
    with pytest.raises(NotFittedError):
        UnstableManifoldSolver().predict(np.ones((1, 2)))
    with pytest.raises(ValueError):
        UnstableManifoldSolver(n_base=3).fit(toy_map(RHO), toy_stationary_data(), RHO)
    with pytest.raises(TypeError):
        UnstableManifoldSolver().fit("map", toy_stationary_data(), RHO)
    with pytest.raises(TypeError):
        StableManifoldSolver().fit(toy_map(RHO), toy_stationary_data(), None, RHO)


def test_decay_rate_fit():
    est = UnstableManifoldSolver(eps=0.5).fit(toy_map(RHO), toy_stationary_data(), RHO)
    fit = DecayRateFit().fit(est.section_)
    assert fit.alpha_fit_ == pytest.approx(1.0, abs=0.05)
    assert fit.predict([100.0])[0] == pytest.approx(fit.C_ / 100 ** fit.alpha_fit_)
    with pytest.raises(ValueError):
        fit.predict([-1.0])
