"""The linear toy model with an explicitly summable unstable manifold.

``f(t, u, s) = (t - 1, 2u, s/2 + rho(t))``: the base doubles, the fiber
halves and a decaying forcing ``rho`` is added.  Its unstable manifold is
the graph of ``sum_j 2^-j rho(t + 1 + j)``, independent of ``u``.
"""

import numpy as np

from .dynamics import DiscreteMap
from .transform import StationaryData


def toy_map(weight, base_factor=2.0, fiber_factor=0.5):
    """The perturbed toy map (one base and one fiber coordinate)."""

    def spatial(t, x):
        return np.column_stack([base_factor * x[:, 0], fiber_factor * x[:, 1] + weight(t)])

    return DiscreteMap(2, spatial, -1.0)


def toy_stationary_map(base_factor=2.0, fiber_factor=0.5):
    def spatial(t, x):
        return np.column_stack([base_factor * x[:, 0], fiber_factor * x[:, 1]])

    return DiscreteMap(2, spatial, -1.0)


def toy_stationary_data(r=1):
    return StationaryData(1, 1, toy_stationary_map(), r=r)


def toy_fixed_point(t, weight, terms=200):
    """``sum_{j < terms} 2^-j rho(t + 1 + j)`` for an array of times."""
    t = np.asarray(t, dtype=float)
    j = np.arange(terms)
    return (0.5 ** j * weight(t[..., None] + 1.0 + j)).sum(axis=-1)
