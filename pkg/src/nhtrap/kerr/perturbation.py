"""Decaying metric perturbations of Kerr and the perturbed characteristic set."""

from dataclasses import dataclass, field

import numpy as np

from ..errors import NoContraction, SignatureLost, Singular
from ..perturbation import PerturbationSpec
from .metric import DualMetric, KerrDualMetric, kerr_metric_components, kerr_metric_derivative

PROFILES = {
    "sin_r": lambda t, x: np.sin(x[:, 1]),
    "constant": lambda t, x: np.ones(len(x)),
    "sin_r_cos_t": lambda t, x: np.sin(x[:, 1]) * np.cos(t),
}


def _dt_dt():
    pattern = np.zeros((4, 4))
    pattern[0, 0] = 1.0
    return pattern


@dataclass(frozen=True)
class MetricPerturbation:
    """``g~ = amplitude t^-alpha profile(t, x) * pattern`` in the coframe ``(dt, dr, dtheta, dphi)``.

    ``pattern`` is a symmetric 4x4 matrix with entries of size at most one;
    the default ``dt (x) dt`` perturbs only ``g_tt``.
    """

    spec: PerturbationSpec
    pattern: np.ndarray = field(default_factory=_dt_dt)

    def __post_init__(self):
        pat = np.asarray(self.pattern, dtype=float)
        if pat.shape != (4, 4) or not np.allclose(pat, pat.T):
            raise ValueError("pattern must be a symmetric 4x4 matrix")
        if np.abs(pat).max() > 1:
            raise ValueError("pattern entries must be bounded by 1")
        object.__setattr__(self, "pattern", pat)

    @classmethod
    def make(cls, alpha=1.0, amplitude=0.1, profile="sin_r", pattern=None):
        prof = PROFILES[profile] if isinstance(profile, str) else profile
        bounds = (1.0, 2.0) if profile == "sin_r_cos_t" else (1.0, 1.0)
        spec = PerturbationSpec(alpha, amplitude, prof, bounds)
        return cls(spec) if pattern is None else cls(spec, pattern)

    @property
    def alpha(self):
        return self.spec.alpha

    def components(self, x):
        """``g~_ij`` at base points ``(N, 4)``."""
        x = np.atleast_2d(x)
        return self.spec(x[:, 0], x)[:, None, None] * self.pattern

    def check(self, x):
        """Largest ``t^alpha |g~_ij|`` over the sample points; must not exceed the amplitude."""
        x = np.atleast_2d(x)
        scaled = np.abs(self.components(x)) * x[:, [0]][:, :, None] ** self.alpha
        worst = float(scaled.max())
        if worst > self.spec.amplitude * (1 + 1e-12):
            raise ValueError(f"sampled t^alpha |g~| = {worst:.4g} exceeds the amplitude")
        return worst


class _PerturbationPart(DualMetric):
    def __init__(self, params, pert, h):
        self.params = params
        self.pert = pert
        self.h = h

    def metric(self, x):
        return self.pert.components(x)


class PerturbedDualMetric(DualMetric):
    """Dual metric of ``g_{m,a} + g~``, inverted numerically.

    With ``analytic`` set, metric derivatives combine the hand
    differentiated Kerr part with finite differences of ``g~`` alone, so
    the rounding noise of the differences scales with the perturbation.
    """

    def __init__(self, params, pert, h=1e-3, analytic=False):
        self.params = params
        self.pert = pert
        self.h = h
        self.analytic = analytic
        self._part = _PerturbationPart(params, pert, h)

    def metric(self, x):
        x = np.atleast_2d(x)
        return kerr_metric_components(self.params, x[:, 1], x[:, 2]) + self.pert.components(x)

    def metric_derivative(self, x, axis, h=None):
        if not self.analytic:
            return super().metric_derivative(x, axis, h)
        x = np.atleast_2d(x)
        return kerr_metric_derivative(self.params, x[:, 1], x[:, 2], axis) \
            + self._part.metric_derivative(x, axis, h)

    def inverse_metric(self, x):
        g = self.metric(x)
        try:
            gi = np.linalg.inv(g)
        except np.linalg.LinAlgError as exc:
            raise Singular("perturbed metric is singular; lower the amplitude") from exc
        return gi


def default_box(params, t_range=(10.0, 1e4)):
    """Working box: ``t`` range, ``r`` from just outside the horizon to ``10 m``, polar margin."""
    lo = params.theta_margin
    return {"t": t_range, "r": (params.r_plus + 0.05 * params.m, 10 * params.m),
            "theta": (lo, np.pi - lo)}


def perturbed_dual_metric(params, pert, box=None, n=9, h=1e-3, analytic=False):
    """Evaluator for ``(g_{m,a} + g~)^-1`` after sampling the signature on ``box``."""
    ev = KerrDualMetric(params, h, analytic) if pert is None or pert.spec.amplitude == 0 \
        else PerturbedDualMetric(params, pert, h, analytic)
    box = default_box(params) if box is None else box
    ev.check_box(box["r"], box["theta"], box["t"], n)
    return ev


def signature_loss_amplitude(params, alpha=1.0, profile="sin_r", box=None, n=9, hi=10.0,
                             iters=60):
    """Smallest amplitude for which signature sampling on ``box`` fails (bisection).

    Returns ``inf`` if even ``hi`` keeps the signature.
    """

    def fails(amp):
        try:
            perturbed_dual_metric(params, MetricPerturbation.make(alpha, amp, profile), box, n)
        except SignatureLost:
            return True
        return False

    lo = 0.0
    if not fails(hi):
        return float("inf")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if fails(mid):
            hi = mid
        else:
            lo = mid
    return hi


# --------------------------------------------------------------------------
# perturbed characteristic set as a graph


@dataclass
class CharacteristicGraph:
    """Graph values ``f`` with residuals, ``sup tau^-alpha |f|`` and the contraction estimate."""

    values: np.ndarray
    residual: float
    scaled_sup: float
    contraction: float
    iterations: int


def characteristic_graph(p0, p_tilde, alpha, xprime, tau, tau0=None, tol=1e-13, max_iter=100,
                         dp0=None, h=1e-6):
    """Solve ``p0(y, x') + p~(tau, y, x') = 0`` for ``y = f(tau, x')`` near ``y = 0``.

    ``p0(y, x')`` vanishes simply at ``y = 0`` and ``p~ = O(tau^alpha)``.
    Writing ``y = tau^alpha Y`` the equation becomes the fixed point problem

        Y = Y - tau^-alpha (p0 + p~)(tau^alpha Y) / d_y p0(0, x'),

    a contraction for small ``tau``.  ``xprime`` is an opaque per point label
    handed to the evaluators (for example an index into precomputed data);
    ``tau`` has one entry per point.  ``dp0`` optionally gives
    ``d_y p0(0, x')``, otherwise it is a central difference with step ``h``.
    Raises :class:`NoContraction` if the sampled contraction factor exceeds
    one half, or if some ``tau >= tau0``.
    """
    tau = np.asarray(tau, dtype=float)
    if tau0 is not None and np.any(tau >= tau0):
        raise NoContraction(f"tau must stay below tau0 = {tau0}")
    scale = tau ** alpha
    zero = np.zeros_like(tau)
    slope = (p0(zero + h, xprime) - p0(zero - h, xprime)) / (2 * h) if dp0 is None \
        else np.asarray(dp0, dtype=float)
    if np.any(slope == 0):
        raise NoContraction("d p0 vanishes on the zero set")

    def total(y):
        return p0(y, xprime) + p_tilde(tau, y, xprime)

    def update(big_y):
        return big_y - total(scale * big_y) / (scale * slope)

    big_y = np.zeros_like(tau)
    contraction = 0.0
    for k in range(1, max_iter + 1):
        new = update(big_y)
        if k == 1:
            # derivative of the update map in Y, sampled at the first iterate
            dh = h * np.maximum(1.0, np.abs(new)) / np.maximum(scale, 1e-300)
            d_update = (update(new + dh) - update(new - dh)) / (2 * dh)
            contraction = float(np.abs(d_update).max())
            if contraction > 0.5:
                raise NoContraction(f"contraction factor {contraction:.3f} > 1/2; lower tau0")
        step = np.abs(new - big_y)
        big_y = new
        if np.all(step * scale < tol):
            break
    values = scale * big_y
    residual = float(np.abs(total(values)).max()) if len(values) else 0.0
    scaled_sup = float(np.abs(big_y).max()) if len(values) else 0.0
    return CharacteristicGraph(values, residual, scaled_sup, contraction, k)
