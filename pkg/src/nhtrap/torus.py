"""Bicharacteristic dynamics of ``D_y + sin(x) D_x`` on the 3-torus.

Phase space points are arrays ``(..., 6)`` ordered ``(x, y, z, xi, eta,
zeta)``.  The symbol is ``p = eta + sin(x) xi``.  Its trapped set is
``{x = 0, xi = 0, eta = 0}``; the unstable manifold is ``{xi = 0, eta = 0}``
and the stable manifold ``{x = 0, eta = 0}``, with defining functions
``phi_u = xi/|zeta|`` and ``phi_s = x``.

For the graph transform the dynamics is reduced to the coordinates
``(x, phi_u)`` with time ``t = -y`` (so ``V t = -1``).  There the unstable
manifold of the trapped set is the zero section over the x-axis.
"""

from dataclasses import dataclass

import numpy as np

from .dynamics import VectorField
from .perturbation import PerturbationSpec
from .transform import StationaryData, flow_unstable_manifold


@dataclass
class TorusPhasePoint:
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0
    xi: float = 0.0
    eta: float = 0.0
    zeta: float = 1.0

    def __post_init__(self):
        if self.xi == 0 and self.eta == 0 and self.zeta == 0:
            raise ValueError("the covector must be nonzero")

    def as_array(self):
        return np.array([self.x, self.y, self.z, self.xi, self.eta, self.zeta])


def _arr(pt):
    return pt.as_array() if isinstance(pt, TorusPhasePoint) else np.asarray(pt, dtype=float)


def torus_symbol(pt):
    p = _arr(pt)
    return p[..., 4] + np.sin(p[..., 0]) * p[..., 3]


def torus_field(pt):
    """Hamilton vector field of the symbol."""
    p = _arr(pt)
    out = np.zeros(p.shape)
    out[..., 0] = np.sin(p[..., 0])
    out[..., 1] = 1.0
    out[..., 3] = -np.cos(p[..., 0]) * p[..., 3]
    return out


def torus_vector_field():
    """The Hamilton flow as an autonomous field on the 6-dimensional phase space."""
    return VectorField(6, lambda t, x: torus_field(x), time_component=1.0, autonomous=True)


def phi_unstable(pt):
    p = _arr(pt)
    return p[..., 3] / np.abs(p[..., 5])


def phi_stable(pt):
    return _arr(pt)[..., 0]


def rho_hat(pt):
    return 1.0 / np.abs(_arr(pt)[..., 5])


def _derivative_along_flow(func, p, h):
    v = torus_field(p)
    return (func(p + h * v) - func(p - h * v)) / (2 * h)


def _gradient(func, p, h):
    grad = np.zeros(6)
    for k in range(6):
        e = np.zeros(6)
        e[k] = h
        grad[k] = (func(p + e) - func(p - e)) / (2 * h)
    return grad


def poisson_bracket(f, g, p, h=1e-6):
    """``{f, g} = d_xi f . d_x g - d_x f . d_xi g`` by central differences."""
    df, dg = _gradient(f, p, h), _gradient(g, p, h)
    return float(df[3:] @ dg[:3] - df[:3] @ dg[3:])


def torus_verify(h=1e-6, offset=1e-4, zeta=1.0):
    """Expansion rates and normalized bracket of the defining functions.

    The rates ``H phi_u / (-phi_u)`` and ``H phi_s / phi_s`` are evaluated
    by differences along the flow at a point ``offset`` away from the
    trapped set; the bracket ``rho_hat^-1 {phi_u, phi_s}`` at the trapped set.
    """
    near = np.array([offset, 0.0, 0.0, offset, 0.0, zeta])
    w_u = _derivative_along_flow(phi_unstable, near, h) / -phi_unstable(near)
    w_s = _derivative_along_flow(phi_stable, near, h) / phi_stable(near)
    gamma = np.array([0.0, 0.0, 0.0, 0.0, 0.0, zeta])
    bracket = poisson_bracket(phi_unstable, phi_stable, gamma, h) / rho_hat(gamma)
    return {"w_u_at_gamma": float(w_u), "w_s_at_gamma": float(w_s),
            "bracket_at_gamma": float(bracket)}


PROFILES = {
    "constant": lambda t, x: np.ones_like(x),
    "sin_x": lambda t, x: np.sin(x),
    "sin_x_cos_t": lambda t, x: np.sin(x) * np.cos(t),
}


def torus_perturbation(alpha, amplitude, profile="constant"):
    prof = PROFILES[profile] if isinstance(profile, str) else profile
    bounds = (1.0, 2.0) if profile == "sin_x_cos_t" else (1.0, 1.0)
    return PerturbationSpec(alpha, amplitude, lambda t, x: prof(t, x[:, 0]), bounds)


def torus_perturbed_field(alpha=1.0, amplitude=0.0, profile="constant"):
    """Reduced field on ``(x, phi_u)``: ``(sin x, -cos(x) phi_u + amplitude t^-alpha profile)``."""
    pert = torus_perturbation(alpha, amplitude, profile)

    def rhs(t, state):
        x, phi = state[:, 0], state[:, 1]
        out = np.empty_like(state)
        out[:, 0] = np.sin(x)
        out[:, 1] = -np.cos(x) * phi
        if pert.amplitude:
            out[:, 1] += pert(t, state[:, :1])
        return out

    return VectorField(2, rhs, time_component=-1.0, autonomous=amplitude == 0)


def torus_stationary_data(r=1):
    return StationaryData(1, 1, stationary_field=torus_perturbed_field(amplitude=0.0), r=r)


def torus_unstable_manifold(alpha=1.0, amplitude=0.1, profile="constant", eps=0.4, tol=1e-10,
                            t_range=(100.0, 200.0), budget=60, n=1, n_base=17, initial=None,
                            n_samples=100, seed=0):
    """Unstable manifold of the perturbed reduced torus flow."""
    field = torus_perturbed_field(alpha, amplitude, profile)
    return flow_unstable_manifold(field, torus_stationary_data(), torus_perturbation(
        alpha, amplitude, profile).weight, eps, tol, budget, t_range, n=n, n_base=n_base,
        initial=initial, n_samples=n_samples, seed=seed)
