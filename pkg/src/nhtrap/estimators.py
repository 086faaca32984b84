"""Estimator style wrappers around the solvers.

Hyperparameters go to the constructor; ``fit`` runs a solver on a problem
(a map or field plus its stationary data) and stores fitted attributes with
a trailing underscore; ``predict`` evaluates the fitted section.  There is
no training data here, so ``fit`` takes the dynamical problem instead of an
``(X, y)`` pair; ``get_params``/``set_params``/``clone`` work as usual.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .dynamics import DiscreteMap, VectorField
from .sections import SectionGrid
from .transform import (fit_decay_rate, flow_stable_manifold, flow_unstable_manifold,
                        stable_manifold, unstable_manifold)


class _SectionPredictor(BaseEstimator):
    def _store(self, result):
        self.result_ = result
        self.section_ = result.section
        self.n_iter_ = result.n_iter
        self.theta_ = result.theta
        self.c_sigma_ = result.c_sigma
        self.residual_ = result.residual
        return self

    def predict(self, X):
        """Section values at rows ``(t, u_1, ..., u_d)`` of ``X``; returns ``(N, d_S)``."""
        check_is_fitted(self, "section_")
        d_u = self.section_.base_dim
        X = check_array(X, ensure_min_features=1)
        if X.shape[1] != 1 + d_u:
            raise ValueError(f"expected {1 + d_u} columns (t and {d_u} base coordinates), "
                             f"got {X.shape[1]}")
        return self.section_.evaluate(X[:, 0], X[:, 1:])


class UnstableManifoldSolver(_SectionPredictor):
    """Graph transform solver for the unstable manifold of a decaying perturbation.

    ``fit(problem, stationary, weight)`` accepts a :class:`DiscreteMap` or a
    :class:`VectorField` (solved through its time-n map).
    """

    def __init__(self, eps=0.1, tol=1e-10, budget=60, t_range=(100.0, 200.0), n_base=9,
                 n_power=None, n_samples=100, random_state=0):
        self.eps = eps
        self.tol = tol
        self.budget = budget
        self.t_range = t_range
        self.n_base = n_base
        self.n_power = n_power
        self.n_samples = n_samples
        self.random_state = random_state

    def _validate(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if int(self.budget) < 1:
            raise ValueError("budget must be at least 1")
        lo, hi = self.t_range
        if not hi > lo:
            raise ValueError("t_range must be increasing")
        if int(self.n_base) < 4:
            raise ValueError("need at least 4 base nodes for cubic interpolation")

    def fit(self, problem, stationary, weight, initial=None):
        self._validate()
        kwargs = dict(tol=self.tol, budget=int(self.budget), t_range=tuple(self.t_range),
                      n_base=int(self.n_base), initial=initial, n_samples=self.n_samples,
                      seed=self.random_state)
        if isinstance(problem, VectorField):
            result = flow_unstable_manifold(problem, stationary, weight, self.eps,
                                            n=self.n_power, **kwargs)
        elif isinstance(problem, DiscreteMap):
            result = unstable_manifold(problem, stationary, weight, self.eps, **kwargs)
        else:
            raise TypeError("problem must be a DiscreteMap or a VectorField")
        return self._store(result)


class StableManifoldSolver(_SectionPredictor):
    """Stable manifold grown forward in t from a seed slab."""

    def __init__(self, eps=0.1, tol=1e-10, t_end=None, n_power=1, n_samples=100):
        self.eps = eps
        self.tol = tol
        self.t_end = t_end
        self.n_power = n_power
        self.n_samples = n_samples

    def fit(self, problem, stationary, seed, weight, inverse=None):
        if not isinstance(seed, SectionGrid):
            raise TypeError("seed must be a SectionGrid")
        if isinstance(problem, VectorField):
            result = flow_stable_manifold(problem, stationary, seed, weight, self.eps, self.tol,
                                          self.t_end, self.n_power, n_samples=self.n_samples)
        elif isinstance(problem, DiscreteMap):
            result = stable_manifold(problem, stationary, seed, weight, self.eps, self.tol,
                                     self.t_end, inverse, self.n_samples)
        else:
            raise TypeError("problem must be a DiscreteMap or a VectorField")
        return self._store(result)


class DecayRateFit(BaseEstimator):
    """Power law fit ``sup_u |sigma(t, u)| ~ C t^-alpha`` of a computed section."""

    def __init__(self, family="power_law", t_range=None, b_derivative=False):
        self.family = family
        self.t_range = t_range
        self.b_derivative = b_derivative

    def fit(self, section):
        fit = fit_decay_rate(section, self.family, self.t_range, self.b_derivative)
        self.C_ = fit.C
        self.alpha_fit_ = fit.alpha_fit
        return self

    def predict(self, t):
        check_is_fitted(self, "alpha_fit_")
        t = check_array(np.asarray(t, dtype=float).reshape(-1, 1)).ravel()
        if np.any(t <= 0):
            raise ValueError("times must be positive")
        return self.C_ * t ** -self.alpha_fit_
