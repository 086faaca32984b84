"""Stable manifold of the trapped set for decaying perturbations of Kerr.

The computation runs in the equatorial plane ``theta = pi/2, xi_theta = 0``
at a fixed angular momentum ``xi_phi = L``.  Both are preserved by the
flow when the perturbation is axisymmetric and reflection symmetric, which
holds for the profiles offered here.  The frequency ``sigma`` is slaved to
the remaining variables by the characteristic equation ``G = 0``, solved as
a graph over the stationary characteristic set.  What is left is a time
dependent planar flow in ``(r, xi_r)``.

Chart.  With ``R(r)`` the radial potential at ``sigma = 1`` and ``r_c`` the
photon orbit radius, ``R = (r - r_c)^2 P(r)``.  The stationary stable and
unstable manifolds are ``xi_r = +q(r)`` and ``xi_r = -q(r)`` with
``q = (r - r_c) sqrt(P) / Delta``.  The chart coordinates are
``u = r - r_c`` and ``s = xi_r - q(r)``, so the stationary stable manifold
is ``s = 0``.  Reversing time turns the stable manifold into an unstable
one for the field ``V = -H`` (``V t = -1``), which the graph transform
computes as a section ``s = f(t, u)``.
"""

import numpy as np

from ..dynamics import VectorField
from ..errors import NoConvergence
from ..hyperbolicity import Splitting
from ..transform import StationaryData, flow_unstable_manifold
from ..weights import Weight
from .flow import expansion_rates, trapped_set_solve
from .metric import KerrDualMetric, kerr_inverse_components
from .perturbation import MetricPerturbation, characteristic_graph, perturbed_dual_metric


class EquatorialChart:
    """Equatorial reduction around the prograde (or retrograde) photon orbit."""

    def __init__(self, params, prograde=True):
        self.params = params
        trapped = trapped_set_solve(params, sigma=1.0, equatorial=True, prograde=prograde)
        self.trapped = trapped
        self.r_gamma = trapped.r
        self.xi_phi = trapped.point.xi_phi
        m, a, L = params.m, params.a, self.xi_phi
        # R(r) = (r^2 + a^2 + a L)^2 - (r^2 - 2 m r + a^2)(a + L)^2
        big = np.array([1.0, 0.0, a * a + a * L])
        delta = np.array([1.0, -2 * m, a * a])
        radial = np.polysub(np.polymul(big, big), (a + L) ** 2 * delta)
        quotient, remainder = np.polydiv(radial, np.array([1.0, -2 * self.r_gamma,
                                                           self.r_gamma ** 2]))
        if np.abs(remainder).max() > 1e-8 * np.abs(radial).max():
            raise NoConvergence("photon orbit radius is not a double root of the radial potential")
        self.reduced_potential = quotient
        self.dreduced_potential = np.polyder(quotient)
        if np.polyval(quotient, self.r_gamma) <= 0:
            raise NoConvergence("radial potential does not have a saddle at the photon orbit")
        # the root branch that gives sigma = 1 at the photon orbit
        coef = self._coefficients(kerr_inverse_components(params, np.array([self.r_gamma]),
                                                          np.array([np.pi / 2])),
                                  np.zeros(1))
        self.branch = 1.0
        if abs(self._root(*coef)[0] - 1.0) > 1e-8:
            self.branch = -1.0
        self.kappa = 1.0

    def q(self, r):
        delta = self.params.delta(r)
        return (r - self.r_gamma) * np.sqrt(np.polyval(self.reduced_potential, r)) / delta

    def dq(self, r):
        p = np.polyval(self.reduced_potential, r)
        dp = np.polyval(self.dreduced_potential, r)
        delta = self.params.delta(r)
        ddelta = 2 * r - 2 * self.params.m
        u = r - self.r_gamma
        return (np.sqrt(p) + u * dp / (2 * np.sqrt(p))) / delta - u * np.sqrt(p) * ddelta / delta ** 2

    def to_phase(self, t, state):
        """Equatorial phase points ``(t, r, pi/2, 0, nan, xi_r, 0, L)``; sigma is filled later."""
        u, s = state[:, 0], state[:, 1]
        r = self.r_gamma + u
        xi_r = s + self.kappa * self.q(r)
        n = len(u)
        return np.column_stack([t, r, np.full(n, np.pi / 2), np.zeros(n), np.full(n, np.nan),
                                xi_r, np.zeros(n), np.full(n, self.xi_phi)])

    def _coefficients(self, gi, xi_r):
        # G = A sigma^2 + 2 B sigma + C at the equator
        a_coef = gi[:, 0, 0]
        b_coef = gi[:, 0, 3] * self.xi_phi
        c_coef = gi[:, 1, 1] * xi_r ** 2 + gi[:, 3, 3] * self.xi_phi ** 2
        return a_coef, b_coef, c_coef

    def _root(self, a_coef, b_coef, c_coef):
        return (-b_coef + self.branch * np.sqrt(b_coef ** 2 - a_coef * c_coef)) / a_coef

    def slaved_sigma(self, evaluator, p, tol=1e-14):
        """Solve ``G = 0`` for sigma as a graph over the stationary characteristic set.

        Returns sigma and the :class:`CharacteristicGraph` record (None for exact Kerr).
        """
        x = p[:, :4]
        gi0 = kerr_inverse_components(self.params, x[:, 1], x[:, 2])
        a0, b0, c0 = self._coefficients(gi0, p[:, 5])
        sigma0 = self._root(a0, b0, c0)
        if isinstance(evaluator, KerrDualMetric):
            return sigma0, None
        gi = evaluator.inverse_metric(x)
        da, db, dc = (c1 - c2 for c1, c2 in zip(self._coefficients(gi, p[:, 5]), (a0, b0, c0)))
        idx = np.arange(len(p))

        def p0(y, i):
            sig = sigma0[i] + y
            return a0[i] * sig ** 2 + 2 * b0[i] * sig + c0[i]

        def p_tilde(tau, y, i):
            sig = sigma0[i] + y
            return da[i] * sig ** 2 + 2 * db[i] * sig + dc[i]

        alpha = evaluator.pert.alpha
        graph = characteristic_graph(p0, p_tilde, alpha, idx, 1.0 / x[:, 0], tol=tol,
                                     dp0=2 * (a0 * sigma0 + b0))
        return sigma0 + graph.values, graph

    def hamilton_components(self, evaluator, t, state):
        """``(t', r', xi_r')`` of ``H_G`` on the reduced characteristic set."""
        p = self.to_phase(t, state)
        p[:, 4], _ = self.slaved_sigma(evaluator, p)
        x, zeta = p[:, :4], p[:, 4:8]
        gi = evaluator.inverse_metric(x)
        v = 2 * np.einsum("nij,nj->ni", gi, zeta)
        dgi = evaluator.inverse_derivative(x, 1, gi)
        xi_r_dot = -np.einsum("ni,nij,nj->n", zeta, dgi, zeta)
        return v[:, 0], v[:, 1], xi_r_dot, p

    def field(self, evaluator):
        """``V = -H_G / (H_G t)`` in chart coordinates; ``V t = -1``."""

        def rhs(t, state):
            t_dot, r_dot, xi_dot, p = self.hamilton_components(evaluator, t, state)
            out = np.empty_like(state)
            out[:, 0] = -r_dot / t_dot
            out[:, 1] = -xi_dot / t_dot + self.kappa * self.dq(p[:, 1]) * r_dot / t_dot
            return out

        return VectorField(2, rhs, time_component=-1.0,
                           autonomous=isinstance(evaluator, KerrDualMetric))

    def splitting(self, xi="rho_squared"):
        """Splitting at the chart origin: base along ``s = 0``, stable along the unstable manifold of ``H``.

        The second direction comes from the eigenvector of the linearized
        flow; the stationary chart predicts the slope ``-2 q'(r_c)``, and the
        discrepancy is returned for reporting.
        """
        rates = expansion_rates(self.params, self.trapped, xi)
        v = rates.unstable_direction
        direction = np.array([v[0], v[1] - self.kappa * self.dq(self.r_gamma) * v[0]])
        direction /= np.linalg.norm(direction)
        predicted = -(1 + self.kappa) * self.dq(self.r_gamma)
        discrepancy = abs(direction[1] / direction[0] - predicted)
        split = Splitting(np.zeros((1, 2)), np.zeros((2, 0)), np.array([[1.0], [0.0]]),
                          direction[:, None])
        return split, rates, discrepancy, v

    def stable_eigen_slope(self, xi="rho_squared"):
        """``d xi_r / d r`` along the stable eigenvector, against the chart's ``q'(r_c)``."""
        rates = expansion_rates(self.params, self.trapped, xi)
        v = rates.stable_direction
        return v[1] / v[0], self.kappa * self.dq(self.r_gamma)


def _amplitude_weight(pert):
    # rho = amplitude t^-alpha, so the window condition rho(T0) < eps^2 sees the actual size
    amp = pert.spec.amplitude
    if not amp:
        return Weight.power_law(pert.alpha)
    alpha = pert.alpha
    return Weight.custom(lambda t: amp * np.asarray(t, dtype=float) ** -alpha)


def kerr_stable_manifold(params, pert=None, eps=0.4, tol=1e-10, budget=60,
                         t_range=(100.0, 200.0), n=5, n_base=17, prograde=True, initial=None,
                         n_samples=100, seed=0, box=None, weight=None):
    """Stable manifold of the trapped set of a perturbed Kerr metric (equatorial reduction).

    ``pert`` is a :class:`MetricPerturbation` (None for exact Kerr).  The
    result is a :class:`ManifoldResult` whose section is ``s = f(t, u)`` in
    the chart of :class:`EquatorialChart`; ``extras`` carry the photon
    orbit, the eigenvector check and the transverse rates.
    """
    if pert is None:
        pert = MetricPerturbation.make(1.0, 0.0)
    chart = EquatorialChart(params, prograde)
    evaluator = perturbed_dual_metric(params, pert, box, analytic=True)
    exact = KerrDualMetric(params, analytic=True)
    split, rates, discrepancy, _ = chart.splitting()
    stationary = StationaryData(1, 1, stationary_field=chart.field(exact), splitting=split)
    if weight is None:
        weight = _amplitude_weight(pert)
    result = flow_unstable_manifold(chart.field(evaluator), stationary, weight, eps, tol, budget,
                                    t_range, n=n, n_base=n_base, initial=initial,
                                    n_samples=n_samples, seed=seed)
    slope, predicted = chart.stable_eigen_slope()
    result.extras.update(r_gamma=chart.r_gamma, xi_phi=chart.xi_phi,
                         eigen_slope=float(slope), chart_slope=float(predicted),
                         splitting_discrepancy=float(discrepancy),
                         transverse_rates=rates.as_dict())
    return result


def field_perturbation_decay(params, pert, t_values=None, n_samples=50, eps=0.4, seed=0,
                             prograde=True):
    """Fit ``sup |V - V_0| ~ C t^-alpha`` over the chart at the given times.

    Returns ``(C, alpha_fit)``: the size of the perturbation of the reduced
    field, which is the hypothesis handed to the graph transform.
    """
    t_values = np.geomspace(1e2, 1e4, 21) if t_values is None else np.asarray(t_values)
    chart = EquatorialChart(params, prograde)
    field = chart.field(perturbed_dual_metric(params, pert, analytic=True))
    field0 = chart.field(KerrDualMetric(params, analytic=True))
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-eps, eps, size=(n_samples, 2)) * np.array([1.0, 0.1])
    sup = []
    for t in t_values:
        tt = np.full(n_samples, t)
        sup.append(np.abs(field.eval(tt, pts) - field0.eval(tt, pts)).max())
    sup = np.array(sup)
    slope, _ = np.polyfit(np.log(t_values), np.log(sup), 1)
    return float((sup * t_values ** -slope).max()), float(-slope)

