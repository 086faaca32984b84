"""Invariant manifolds of normally hyperbolic trapped sets under decaying perturbations.

The core pieces are time dependent maps and flows (:mod:`.dynamics`), rate
checks for normal hyperbolicity (:mod:`.hyperbolicity`), sections on
``t x base`` grids (:mod:`.sections`) and the graph transform solvers
(:mod:`.transform`).  Worked models live in :mod:`.toy`, :mod:`.torus` and
:mod:`.kerr`.
"""

from importlib.metadata import PackageNotFoundError, version

from .dynamics import DiscreteMap, Trajectory, VectorField, flow, integrate, time_one_map
from .errors import ConfigError, NumericalError
from .hyperbolicity import Splitting, check_normal_hyperbolicity, splitting_rates
from .perturbation import PerturbationSpec
from .sections import SectionGrid
from .transform import (DecayFit, FiberBundleMap, ManifoldResult, StationaryData,
                        fit_decay_rate, flow_stable_manifold, flow_unstable_manifold,
                        graph_transform_step, invariant_section, stable_manifold,
                        unstable_manifold, verify_invariance)
from .weights import Weight

try:
    __version__ = version("artifact")
except PackageNotFoundError:
    __version__ = "0.0.0"

__all__ = [
    "ConfigError", "DecayFit", "DiscreteMap", "FiberBundleMap", "ManifoldResult",
    "NumericalError", "PerturbationSpec", "SectionGrid", "Splitting", "StationaryData",
    "Trajectory", "VectorField", "Weight", "check_normal_hyperbolicity", "fit_decay_rate",
    "flow", "flow_stable_manifold", "flow_unstable_manifold", "graph_transform_step",
    "integrate", "invariant_section", "splitting_rates", "stable_manifold", "time_one_map",
    "unstable_manifold", "verify_invariance",
]
