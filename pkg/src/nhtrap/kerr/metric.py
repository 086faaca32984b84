"""Kerr metric in Boyer-Lindquist coordinates, signature (+,-,-,-).

Coordinates are ordered ``(t, r, theta, phi)`` and covectors
``sigma dt + xi_r dr + xi_theta dtheta + xi_phi dphi``.  A *dual metric*
object evaluates ``G(x, zeta) = g^{-1}(zeta, zeta)`` and the coordinate
derivatives of ``g^{-1}``; the latter use ``d(g^-1) = -g^-1 (dg) g^-1`` with
``dg`` from fourth order central differences of the metric components.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import OutsideChart, SignatureLost, Singular


@dataclass(frozen=True)
class KerrParams:
    """Subextremal black hole: mass ``m`` and rotation ``a`` with ``|a| < m``."""

    m: float = 1.0
    a: float = 0.0
    theta_margin: float = 0.1

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError("mass must be positive")
        if not abs(self.a) < self.m:
            raise ValueError("need |a| < m (subextremal)")
        if not 0 <= self.theta_margin < np.pi / 2:
            raise ValueError("theta margin must lie in [0, pi/2)")

    @property
    def r_plus(self):
        return self.m + np.sqrt(self.m ** 2 - self.a ** 2)

    def delta(self, r):
        return r * r - 2 * self.m * r + self.a ** 2

    def rho2(self, r, theta):
        return r * r + self.a ** 2 * np.cos(theta) ** 2

    def check_chart(self, r, theta):
        r, theta = np.asarray(r), np.asarray(theta)
        if np.any(r <= self.r_plus):
            raise OutsideChart(f"r must exceed r_plus = {self.r_plus:.6g}")
        lo = self.theta_margin
        if np.any(theta < lo) or np.any(theta > np.pi - lo):
            raise OutsideChart(f"theta must lie in [{lo}, pi - {lo}]")


@dataclass
class PhasePoint:
    t: float
    r: float
    theta: float
    phi: float
    sigma: float
    xi_r: float
    xi_theta: float
    xi_phi: float

    def __post_init__(self):
        if self.sigma == 0 and self.xi_r == 0 and self.xi_theta == 0 and self.xi_phi == 0:
            raise ValueError("the covector must be nonzero")

    def as_array(self):
        return np.array([self.t, self.r, self.theta, self.phi,
                         self.sigma, self.xi_r, self.xi_theta, self.xi_phi])

    @classmethod
    def from_array(cls, arr):
        return cls(*(float(v) for v in np.asarray(arr).ravel()[:8]))

    @property
    def position(self):
        return self.as_array()[:4]

    @property
    def covector(self):
        return self.as_array()[4:]


def as_points(point):
    """Batch of phase or base points from a PhasePoint, one array, or a stack."""
    if isinstance(point, PhasePoint):
        return point.as_array()[None], True
    arr = np.asarray(point, dtype=float)
    return np.atleast_2d(arr), arr.ndim == 1


def kerr_metric_components(params, r, theta):
    """Metric components ``g_ij`` (shape ``(..., 4, 4)``)."""
    m, a = params.m, params.a
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    sin2 = np.sin(theta) ** 2
    rho2 = params.rho2(r, theta)
    delta = params.delta(r)
    g = np.zeros(np.broadcast(r, theta).shape + (4, 4))
    g[..., 0, 0] = (delta - a * a * sin2) / rho2
    g[..., 0, 3] = g[..., 3, 0] = 2 * m * r * a * sin2 / rho2
    g[..., 1, 1] = -rho2 / delta
    g[..., 2, 2] = -rho2
    g[..., 3, 3] = (delta * a * a * sin2 * sin2 - sin2 * (r * r + a * a) ** 2) / rho2
    return g


def kerr_inverse_components(params, r, theta):
    """Closed form inverse metric ``g^ij``."""
    m, a = params.m, params.a
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    sin2 = np.sin(theta) ** 2
    rho2 = params.rho2(r, theta)
    delta = params.delta(r)
    gi = np.zeros(np.broadcast(r, theta).shape + (4, 4))
    gi[..., 0, 0] = ((r * r + a * a) ** 2 - delta * a * a * sin2) / (rho2 * delta)
    gi[..., 0, 3] = gi[..., 3, 0] = 2 * m * r * a / (rho2 * delta)
    gi[..., 1, 1] = -delta / rho2
    gi[..., 2, 2] = -1.0 / rho2
    gi[..., 3, 3] = -(delta - a * a * sin2) / (rho2 * delta * sin2)
    return gi


def kerr_metric_derivative(params, r, theta, axis):
    """Hand differentiated ``d g_ij / d x^axis`` of the Kerr metric."""
    m, a = params.m, params.a
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    out = np.zeros(np.broadcast(r, theta).shape + (4, 4))
    if axis in (0, 3):
        return out
    sin2 = np.sin(theta) ** 2
    rho2 = params.rho2(r, theta)
    delta = params.delta(r)
    big = (r * r + a * a) ** 2
    nums = {"tt": delta - a * a * sin2, "tp": 2 * m * r * a * sin2,
            "pp": delta * a * a * sin2 * sin2 - sin2 * big}
    if axis == 1:
        d_rho2, d_delta = 2 * r, 2 * r - 2 * m
        d_nums = {"tt": d_delta, "tp": 2 * m * a * sin2,
                  "pp": d_delta * a * a * sin2 * sin2 - sin2 * 4 * r * (r * r + a * a)}
        out[..., 1, 1] = -d_rho2 / delta + rho2 * d_delta / delta ** 2
    else:
        d_sin2 = np.sin(2 * theta)
        d_rho2 = -a * a * d_sin2
        d_nums = {"tt": -a * a * d_sin2, "tp": 2 * m * r * a * d_sin2,
                  "pp": delta * a * a * 2 * sin2 * d_sin2 - d_sin2 * big}
        out[..., 1, 1] = -d_rho2 / delta
    out[..., 2, 2] = -d_rho2
    quotient = {k: d_nums[k] / rho2 - nums[k] * d_rho2 / rho2 ** 2 for k in nums}
    out[..., 0, 0] = quotient["tt"]
    out[..., 0, 3] = out[..., 3, 0] = quotient["tp"]
    out[..., 3, 3] = quotient["pp"]
    return out


def check_signature(g):
    """Raise :class:`SignatureLost` unless every matrix has signature (+,-,-,-)."""
    eig = np.linalg.eigvalsh(g)
    pos = (eig > 0).sum(axis=-1)
    neg = (eig < 0).sum(axis=-1)
    if np.any(pos != 1) or np.any(neg != 3):
        raise SignatureLost("metric is not Lorentzian of signature (+,-,-,-)")


# fourth order central difference weights for offsets -2h, -h, h, 2h
_STENCIL = ((-2, 1.0 / 12), (-1, -8.0 / 12), (1, 8.0 / 12), (2, -1.0 / 12))


class DualMetric:
    """Base class for dual metric evaluators.

    Subclasses provide ``metric(x)`` and ``inverse_metric(x)`` for base points
    ``x`` of shape ``(N, 4)``.  ``h`` is the relative difference step for
    coordinate derivatives.
    """

    params: KerrParams
    h: float = 1e-3

    def metric(self, x):
        raise NotImplementedError

    def inverse_metric(self, x):
        raise NotImplementedError

    def metric_derivative(self, x, axis, h=None):
        """``d g / d x^axis`` by a fourth order central difference."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        size = np.maximum(1.0, np.abs(x[:, axis]))
        if axis == 1:
            # the metric varies on the scale of the distance to the horizon
            size = np.minimum(size, x[:, 1] - self.params.r_plus)
        step = (self.h if h is None else h) * size
        out = 0.0
        for k, w in _STENCIL:
            shifted = x.copy()
            shifted[:, axis] += k * step
            out = out + w * self.metric(shifted)
        return out / step[:, None, None]

    def inverse_derivative(self, x, axis, inverse=None, h=None):
        gi = self.inverse_metric(x) if inverse is None else inverse
        return -gi @ self.metric_derivative(x, axis, h) @ gi

    def value(self, x, zeta):
        gi = self.inverse_metric(x)
        return np.einsum("...i,...ij,...j->...", zeta, gi, zeta)

    def check_box(self, r_range, theta_range, t_range=(0.0, 0.0), n=9):
        """Sample the metric signature on a coordinate box."""
        grids = np.meshgrid(np.linspace(*t_range, n), np.linspace(*r_range, n),
                            np.linspace(*theta_range, n), indexing="ij")
        x = np.stack([g.ravel() for g in grids] + [np.zeros(grids[0].size)], axis=1)
        check_signature(self.metric(x))


class KerrDualMetric(DualMetric):
    """Exact Kerr with the closed form inverse metric.

    Coordinate derivatives use finite differences unless ``analytic`` is
    set, in which case the hand differentiated metric derivative is used.
    """

    def __init__(self, params, h=1e-3, analytic=False):
        self.params = params
        self.h = h
        self.analytic = analytic

    def metric_derivative(self, x, axis, h=None):
        if not self.analytic:
            return super().metric_derivative(x, axis, h)
        x = np.atleast_2d(x)
        return kerr_metric_derivative(self.params, x[:, 1], x[:, 2], axis)

    def metric(self, x):
        x = np.atleast_2d(x)
        return kerr_metric_components(self.params, x[:, 1], x[:, 2])

    def inverse_metric(self, x):
        x = np.atleast_2d(x)
        return kerr_inverse_components(self.params, x[:, 1], x[:, 2])


def metric(params, point, check=True):
    """Kerr metric components at a base point ``(t, r, theta, phi)`` (or a batch)."""
    x, single = as_points(point)
    x = x[:, :4]
    params.check_chart(x[:, 1], x[:, 2])
    g = kerr_metric_components(params, x[:, 1], x[:, 2])
    if check:
        check_signature(g)
    return g[0] if single else g


def as_evaluator(evaluator):
    return KerrDualMetric(evaluator) if isinstance(evaluator, KerrParams) else evaluator


def dual_metric_value(evaluator, point, covector=None):
    """``G = g^{-1}(zeta, zeta)``.

    ``evaluator`` is a :class:`KerrParams` (exact Kerr) or any
    :class:`DualMetric`.  ``point`` is a phase point (the covector is then
    taken from it) or a base point with ``covector`` given separately.
    """
    evaluator = as_evaluator(evaluator)
    p, single = as_points(point)
    if covector is None:
        x, zeta = p[:, :4], p[:, 4:8]
    else:
        x = p[:, :4]
        zeta = np.atleast_2d(np.asarray(covector, dtype=float))
    evaluator.params.check_chart(x[:, 1], x[:, 2])
    gi = evaluator.inverse_metric(x)
    if not np.all(np.isfinite(gi)):
        raise Singular("metric not invertible")
    val = np.einsum("ni,nij,nj->n", zeta, gi, zeta)
    return float(val[0]) if single else val
