"""Invariant splittings and normal hyperbolicity rates.

The four rates at a point of the trapped set are

* ``gamma_min``, ``gamma_max``: smallest and largest singular value of the
  differential restricted to the tangent block,
* ``lam``: smallest singular value on the unstable normal block,
* ``nu``: largest singular value on the stable normal block.

When the trapped set is a point (no tangent directions) both tangent rates
are 1, which turns the rate inequalities into the classical conditions
``lam > 1 > nu`` of a hyperbolic fixed point.
"""

from dataclasses import dataclass, field

import numpy as np

from .dynamics import jacobian
from .errors import SplittingNotInvariant

LEAKAGE_THRESHOLD = 1e-6


def _columns(basis, n_points, dim):
    b = np.asarray(basis, dtype=float)
    if b.ndim == 2:
        b = np.broadcast_to(b, (n_points,) + b.shape)
    if b.size == 0:
        return np.zeros((n_points, dim, 0))
    return b.reshape(n_points, dim, -1)


@dataclass
class Splitting:
    """Tangent, unstable and stable bases at sample points of the trapped set.

    Each basis is an array of orthonormal columns, either one ``(d, k)``
    array shared by all points or a stack ``(n, d, k)``.  Empty blocks are
    given as ``np.zeros((d, 0))``.
    """

    base_points: np.ndarray
    tangent_basis: np.ndarray
    unstable_basis: np.ndarray
    stable_basis: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.base_points, dtype=float))
        n, dim = pts.shape
        self.base_points = pts
        self.tangent_basis = _columns(self.tangent_basis, n, dim)
        self.unstable_basis = _columns(self.unstable_basis, n, dim)
        self.stable_basis = _columns(self.stable_basis, n, dim)
        ranks = sum(b.shape[2] for b in self.blocks)
        if ranks != dim:
            raise ValueError(f"block dimensions add up to {ranks}, ambient dimension is {dim}")
        for b in self.blocks:
            gram = np.swapaxes(b, 1, 2) @ b
            if not np.allclose(gram, np.eye(b.shape[2]), atol=1e-10):
                raise ValueError("basis columns are not orthonormal")
        smallest = np.linalg.svd(self.frame, compute_uv=False)[:, -1]
        if smallest.min() <= 1e-8:
            raise ValueError("blocks do not form a direct sum")

    @property
    def blocks(self):
        return self.tangent_basis, self.unstable_basis, self.stable_basis

    @property
    def frame(self):
        return np.concatenate(self.blocks, axis=2)

    @property
    def dims(self):
        return tuple(b.shape[2] for b in self.blocks)

    def __len__(self):
        return len(self.base_points)

    @classmethod
    def coordinate(cls, point, d_tangent, d_unstable, d_stable):
        """Splitting along coordinate axes, in the order tangent, unstable, stable."""
        eye = np.eye(d_tangent + d_unstable + d_stable)
        cuts = np.cumsum([0, d_tangent, d_unstable, d_stable])
        return cls(point, *(eye[:, cuts[i]:cuts[i + 1]] for i in range(3)))


@dataclass
class HyperbolicityRates:
    """Per-point rates with worst-case aggregates."""

    gamma_min: np.ndarray
    gamma_max: np.ndarray
    lam: np.ndarray
    nu: np.ndarray
    leakage: np.ndarray = field(default=None)

    def __post_init__(self):
        for name in ("gamma_min", "gamma_max", "lam", "nu"):
            setattr(self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=float)))

    @property
    def worst(self):
        """Aggregates (min gamma_min, max gamma_max, min lam, max nu)."""
        return (self.gamma_min.min(), self.gamma_max.max(), self.lam.min(), self.nu.max())

    def as_dict(self):
        g0, g1, lam, nu = self.worst
        return {"gamma_min": float(g0), "gamma_max": float(g1), "lambda": float(lam),
                "nu": float(nu)}


def _block_sv(mat):
    if mat.shape[-1] == 0:
        return np.ones(mat.shape[0]), np.ones(mat.shape[0])
    sv = np.linalg.svd(mat, compute_uv=False)
    return sv[:, -1], sv[:, 0]


def splitting_rates(jac, split, split_image=None):
    """Rates of the linear maps ``jac`` with respect to a splitting.

    ``jac`` is ``(d, d)`` or one matrix per base point.  ``split_image`` is
    the splitting at the image points (defaults to ``split``, the right
    choice at fixed points).  Raises :class:`SplittingNotInvariant` when the
    off-diagonal blocks exceed ``1e-6`` relative to ``|jac|``.
    """
    split_image = split if split_image is None else split_image
    n = len(split)
    mats = np.broadcast_to(np.asarray(jac, dtype=float), (n,) + np.shape(jac)[-2:])
    coords = np.linalg.solve(split_image.frame, mats @ split.frame)
    cuts = np.cumsum((0,) + split.dims)
    off = coords.copy()
    for i in range(3):
        off[:, cuts[i]:cuts[i + 1], cuts[i]:cuts[i + 1]] = 0.0
    scale = np.maximum(np.linalg.norm(mats, ord=2, axis=(1, 2)), 1e-300)
    leakage = np.linalg.norm(off, ord=2, axis=(1, 2)) / scale
    if leakage.max() > LEAKAGE_THRESHOLD:
        raise SplittingNotInvariant(f"off-block leakage {leakage.max():.3e}")
    diag = [coords[:, cuts[i]:cuts[i + 1], cuts[i]:cuts[i + 1]] for i in range(3)]
    # coordinates are taken in orthonormal bases of each block, so singular
    # values of the diagonal blocks are the operator norms/co-norms
    gmin, gmax = _block_sv(diag[0])
    lam, _ = _block_sv(diag[1])
    _, nu = _block_sv(diag[2])
    if split.dims[1] == 0:
        lam = np.full(n, np.inf)
    if split.dims[2] == 0:
        nu = np.zeros(n)
    return HyperbolicityRates(gmin, gmax, lam, nu, leakage)


@dataclass
class HyperbolicityReport:
    passed: bool
    margin: float
    failures: list

    def __bool__(self):
        return self.passed


def check_normal_hyperbolicity(rates, r):
    """Check ``lam > gamma_max**k`` and ``nu < gamma_min**k`` for ``0 <= k <= r``.

    The margin is the smallest of ``lam - gamma_max**k`` and
    ``gamma_min**k - nu`` over all points and orders; it is positive exactly
    when the check passes.
    """
    if r < 0:
        raise ValueError("r must be non-negative")
    margin = np.inf
    failures = []
    for k in range(r + 1):
        up = rates.lam - rates.gamma_max ** k
        down = rates.gamma_min ** k - rates.nu
        margin = min(margin, up.min(), down.min())
        if (up <= 0).any():
            failures.append(f"unstable rate fails at order {k}")
        if (down <= 0).any():
            failures.append(f"stable rate fails at order {k}")
    return HyperbolicityReport(not failures, float(margin), failures)


def map_rates(fmap, split, n=1, h=None):
    """Rates of the n-fold composition of a stationary map at the splitting's points.

    The points are assumed fixed by the map (the usual situation after
    reducing out the directions along the trapped set).
    """
    composed = fmap if n == 1 else fmap.power(n)
    jac = jacobian(composed, (np.zeros(len(split)), split.base_points), h)
    return splitting_rates(jac, split)


def smallest_hyperbolic_power(fmap, split, r=1, n_max=20, h=None):
    """Smallest n for which the n-fold map passes the rate check, or None."""
    for n in range(1, n_max + 1):
        if check_normal_hyperbolicity(map_rates(fmap, split, n, h), r):
            return n
    return None
