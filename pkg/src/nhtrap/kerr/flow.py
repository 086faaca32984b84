"""Null geodesic flow, trapped set and expansion rates of Kerr."""

from dataclasses import dataclass, field

import numpy as np

from ..dynamics import VectorField
from ..errors import (ComplexEigenvalues, DegenerateTimeFlow, LeftChart, NoConvergence,
                      NonFinite)
from .metric import KerrParams, PhasePoint, as_evaluator, as_points


def _split(p):
    return p[:, :4], p[:, 4:8]


def hamilton_parts(evaluator, p, h=None):
    """Batched ``(dG/dzeta, dG/dx, g^-1, [d_i g^-1])`` at phase points ``(N, 8)``."""
    x, zeta = _split(p)
    gi = evaluator.inverse_metric(x)
    dzeta = 2 * np.einsum("nij,nj->ni", gi, zeta)
    dgi = [evaluator.inverse_derivative(x, i, gi, h) for i in range(4)]
    dx = np.stack([np.einsum("ni,nij,nj->n", zeta, d, zeta) for d in dgi], axis=1)
    return dzeta, dx, gi, dgi


def hamilton_field(evaluator, point, h=None):
    """``H_G = (dG/dzeta, -dG/dx)`` at a phase point or a batch ``(N, 8)``.

    ``evaluator`` is a :class:`KerrParams` or a dual metric object; ``h``
    overrides its relative difference step for the metric derivatives.
    """
    ev = as_evaluator(evaluator)
    p, single = as_points(point)
    dzeta, dx, _, _ = hamilton_parts(ev, p, h)
    out = np.concatenate([dzeta, -dx], axis=1)
    if not np.all(np.isfinite(out)):
        raise NonFinite("non-finite Hamilton field")
    return out[0] if single else out


def hamilton_vector_field(evaluator, h=None):
    """``H_G`` as an autonomous field on the eight dimensional phase space."""
    ev = as_evaluator(evaluator)
    return VectorField(8, lambda s, p: hamilton_field(ev, p, h), time_component=1.0,
                       autonomous=True)


def rescaled_hamilton(evaluator, h=None, threshold=1e-10):
    """The unit speed field ``H_G / (H_G t)`` on phase space.

    Its t-component is exactly 1, so the flow parameter is the time
    coordinate.  Raises :class:`DegenerateTimeFlow` where ``|H_G t|`` is
    below ``threshold`` times the covector size squared.
    """
    ev = as_evaluator(evaluator)

    def rhs(s, p):
        v = hamilton_field(ev, p, h)
        ht = v[:, 0]
        scale = threshold * np.maximum(np.linalg.norm(p[:, 4:8], axis=1), 1e-300)
        if np.any(np.abs(ht) < scale):
            raise DegenerateTimeFlow("H_G t vanishes; point too far from the trapped set")
        out = v / ht[:, None]
        out[:, 0] = 1.0
        return out

    return VectorField(8, rhs, time_component=1.0, autonomous=True)


# --------------------------------------------------------------------------
# trapped set


@dataclass
class TrappedPoint:
    point: PhasePoint
    residuals: tuple
    component: str
    iterations: int = 0

    @property
    def r(self):
        return self.point.r

    def as_dict(self):
        out = {k: float(v) for k, v in vars(self.point).items()}
        out.update(res_G=self.residuals[0], res_Hr=self.residuals[1], res_HHr=self.residuals[2],
                   component=self.component)
        return out


def trapped_residuals(evaluator, p, h=None):
    """``(G, H_G r, H_G^2 r)`` at phase points ``(N, 8)``."""
    ev = as_evaluator(evaluator)
    p = np.atleast_2d(p)
    dzeta, dx, gi, dgi = hamilton_parts(ev, p, h)
    zeta = p[:, 4:8]
    g_val = 0.5 * np.einsum("ni,ni->n", zeta, dzeta)
    hr = dzeta[:, 1]
    d_hr_dx = np.stack([2 * np.einsum("nj,nj->n", d[:, 1, :], zeta) for d in dgi], axis=1)
    d_hr_dzeta = 2 * gi[:, 1, :]
    hhr = (dzeta * d_hr_dx).sum(axis=1) - (dx * d_hr_dzeta).sum(axis=1)
    return np.stack([g_val, hr, hhr], axis=1)


def _check_chart(params, p, r_max):
    r, th = p[1], p[2]
    if not params.r_plus < r < r_max:
        raise LeftChart(f"r = {r:.6g} outside ({params.r_plus:.6g}, {r_max:.6g})")
    lo = params.theta_margin
    if not lo <= th <= np.pi - lo:
        raise LeftChart(f"theta = {th:.6g} outside the polar margin")


def _newton(residual, z0, tol, max_iter, check, h_jac=1e-7):
    z = np.array(z0, dtype=float)
    f = residual(z)
    norm = np.abs(f).max()
    for it in range(1, max_iter + 1):
        if norm < tol:
            return z, f, it - 1
        jac = np.empty((len(f), len(z)))
        for k in range(len(z)):
            e = np.zeros(len(z))
            e[k] = h_jac * max(1.0, abs(z[k]))
            jac[:, k] = (residual(z + e) - residual(z - e)) / (2 * e[k])
        try:
            step = np.linalg.solve(jac, f)
        except np.linalg.LinAlgError as exc:
            raise NoConvergence("singular Newton matrix") from exc
        lam = 1.0
        while lam > 1e-6:
            trial = z - lam * step
            try:
                check(trial)
            except LeftChart:
                lam /= 2
                continue
            f_trial = residual(trial)
            if np.abs(f_trial).max() < norm:
                break
            lam /= 2
        else:
            # no decrease possible: accept if already at the rounding floor
            if norm < 1e3 * tol:
                return z, f, it
            check(z - step)
            raise NoConvergence(f"line search failed at residual {norm:.3e}")
        small_step = np.abs(lam * step).max() < 1e-15 * max(1.0, np.abs(z).max())
        z, f = trial, f_trial
        norm = np.abs(f).max()
        if small_step and norm < 1e3 * tol:
            return z, f, it
    if norm < tol:
        return z, f, max_iter
    raise NoConvergence(f"residual {norm:.3e} after {max_iter} Newton iterations")


def _is_prograde(ev, p):
    v = hamilton_field(ev, p)
    return ev.params.a * v[3] / v[0] > 0


def trapped_set_solve(params, sigma=1.0, xi_phi=None, equatorial=False, prograde=True,
                      theta=np.pi / 2, guess=None, tol=1e-12, max_iter=50, r_max=None,
                      evaluator=None):
    """Solve ``G = H_G r = H_G^2 r = 0`` for a point of the trapped set.

    Non-equatorial mode fixes ``(sigma, xi_phi)`` and ``theta`` and solves for
    ``(r, xi_r, xi_theta)``.  Equatorial mode fixes ``sigma``, ``theta = pi/2``
    and ``xi_theta = 0`` and solves for ``(r, xi_r, xi_phi)``, on the
    prograde or retrograde branch.  ``guess`` is a triple for the unknowns.
    """
    if sigma == 0:
        raise ValueError("sigma must be nonzero near the trapped set")
    ev = as_evaluator(params if evaluator is None else evaluator)
    try:
        return _trapped_solve(ev, sigma, xi_phi, equatorial, prograde, theta, guess, tol,
                              max_iter, r_max)
    except (LeftChart, NoConvergence):
        if guess is not None or evaluator is not None or ev.params.a == 0:
            raise
    # continuation in the spin from Schwarzschild, where the default guess is exact
    params = ev.params
    spins = np.linspace(0.0, params.a, int(np.ceil(abs(params.a) / (0.05 * params.m))) + 1)
    z = None
    for a in spins:
        step = KerrParams(params.m, a, params.theta_margin)
        trapped = _trapped_solve(as_evaluator(step), sigma, xi_phi, equatorial, prograde, theta,
                                 z, tol, max_iter, r_max)
        pt = trapped.point
        z = [pt.r, pt.xi_r, pt.xi_phi] if equatorial else [pt.r, pt.xi_r, pt.xi_theta]
    return trapped


def _trapped_solve(ev, sigma, xi_phi, equatorial, prograde, theta, guess, tol, max_iter, r_max):
    params = ev.params
    m, a = params.m, params.a
    r_max = 10 * m if r_max is None else r_max
    scale = abs(sigma)

    if equatorial:
        def build(z):
            return np.array([0.0, z[0], np.pi / 2, 0.0, sigma, z[1], 0.0, z[2]])
        orbit_sign = 1.0 if prograde else -1.0
        # prograde orbits have a xi_phi < 0 for sigma > 0
        l_guess = -orbit_sign * np.sign(a if a else 1.0) * np.sign(sigma) * 3 * np.sqrt(3) * m
        z0 = [3 * m, 0.0, l_guess * scale] if guess is None else guess
    else:
        if xi_phi is None:
            xi_phi = 2.0 * sigma * m

        def build(z):
            return np.array([0.0, z[0], theta, 0.0, sigma, z[1], z[2], xi_phi])
        xth = np.sqrt(max(27 * (sigma * m) ** 2 - xi_phi ** 2 / np.sin(theta) ** 2, 1e-2))
        z0 = [3 * m, 0.0, xth] if guess is None else guess

    def residual(z):
        return trapped_residuals(ev, build(z)[None])[0] / np.array([scale ** 2, scale, scale ** 2])

    def check(z):
        _check_chart(params, build(z), r_max)

    check(np.asarray(z0, dtype=float))
    z, f, its = _newton(residual, z0, tol, max_iter, check)
    p = build(z)
    if equatorial and a != 0 and _is_prograde(ev, p) != prograde:
        # landed on the other photon orbit; restart from the mirrored guess
        z1 = [z0[0], z0[1], -z0[2]]
        z, f, its = _newton(residual, z1, tol, max_iter, check)
        p = build(z)
        if _is_prograde(ev, p) != prograde:
            raise NoConvergence("could not reach the requested orbit branch")
    res = tuple(float(v) for v in np.abs(trapped_residuals(ev, p[None])[0]))
    return TrappedPoint(PhasePoint.from_array(p), res, "+" if sigma > 0 else "-", its)


def radial_potential_root(params, sigma=1.0, xi_phi=0.0, carter=None, bracket=None):
    """Photon orbit radius as a double root of the radial potential.

    An independent check for the trapped radius: with
    ``R(r) = ((r^2 + a^2) sigma + a xi_phi)^2 - Delta K`` and ``K`` the
    separation constant, circular orbits need ``R = R' = 0``; eliminating
    ``K`` leaves a one dimensional root problem in ``r``.  For ``a = 0`` the
    answer is ``3m`` regardless of the angular momentum.
    """
    from scipy.optimize import brentq

    m, a = params.m, params.a

    def big(r):
        return (r * r + a * a) * sigma + a * xi_phi

    def equation(r):
        delta = r * r - 2 * m * r + a * a
        # R = 0 and R' = 0 give K = big^2/Delta = 4 r sigma big / Delta'
        return big(r) * (2 * r - 2 * m) - 4 * r * sigma * delta

    lo, hi = bracket if bracket is not None else (params.r_plus + 1e-9, 10 * m)
    return brentq(equation, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


# --------------------------------------------------------------------------
# expansion rates


@dataclass
class ExpansionRates:
    w_u: float
    w_s: float
    nu_min: float
    ht_over_sigma: float
    conformal: float
    unstable_direction: np.ndarray
    stable_direction: np.ndarray
    bracket: float
    bracket_flag: bool = False
    extras: dict = field(default_factory=dict)

    def as_dict(self):
        return {"w_u": self.w_u, "w_s": self.w_s, "nu_min": self.nu_min,
                "ht_over_sigma": self.ht_over_sigma, "Xi": self.conformal,
                "bracket": self.bracket, "bracket_flag": self.bracket_flag}


def _conformal(params, p, xi):
    if xi == "rho_squared":
        r, th = p[..., 1], p[..., 2]
        return r * r + params.a ** 2 * np.cos(th) ** 2, 2 * r
    if xi == "unit":
        return np.ones(p.shape[:-1]), np.zeros(p.shape[:-1])
    raise ValueError(f"unknown conformal factor {xi!r}; use 'rho_squared' or 'unit'")


def rescaled_radial_field(evaluator, p, xi="rho_squared", h=None):
    """``(r, xi_r)`` components of ``sigma^-1 H_{Xi G}`` at phase points ``(N, 8)``.

    ``H_{Xi G} = Xi H_G + G H_Xi``; the second term vanishes on the
    characteristic set and only touches the ``xi_r`` component.
    """
    ev = as_evaluator(evaluator)
    p = np.atleast_2d(p)
    v = hamilton_field(ev, p, h)
    conf, dconf_dr = _conformal(ev.params, p, xi)
    g_val = ev.value(p[:, :4], p[:, 4:8])
    out = np.stack([conf * v[:, 1], conf * v[:, 5] - g_val * dconf_dr], axis=1)
    return out / p[:, [4]]


def expansion_rates(params, trapped, xi="rho_squared", h=1e-5, evaluator=None):
    """Transverse rates of the flow ``rho_hat Xi H_G`` (sign fixed by sigma) at a trapped point.

    The ``(r, xi_r)`` block of its linearization has eigenvalues
    ``w_u > 0 > -w_s``.  The bracket of the two left eigenvectors, taken as
    linear defining functions ``phi_u`` (left eigenvector for ``-w_s``,
    normalized with positive ``xi_r`` slope) and ``phi_s`` (for ``w_u``,
    positive ``r`` slope), is reported and flagged if not positive.
    """
    ev = as_evaluator(params if evaluator is None else evaluator)
    p0 = trapped.point.as_array() if isinstance(trapped, TrappedPoint) else np.asarray(trapped)
    scale_r = h * max(1.0, abs(p0[1]))
    scale_x = h * max(1.0, np.linalg.norm(p0[4:8]))
    stencil = []
    for idx, step in ((1, scale_r), (5, scale_x)):
        for sgn in (1, -1):
            q = p0.copy()
            q[idx] += sgn * step
            stencil.append(q)
    vals = rescaled_radial_field(ev, np.array(stencil), xi)
    jac = np.column_stack([(vals[0] - vals[1]) / (2 * scale_r), (vals[2] - vals[3]) / (2 * scale_x)])
    eig, right = np.linalg.eig(jac)
    if np.any(np.abs(eig.imag) > 1e-9 * np.abs(eig).max()) or np.prod(eig.real) >= 0:
        raise ComplexEigenvalues(f"transverse eigenvalues {eig} are not a real saddle pair")
    eig, right = eig.real, right.real
    order = np.argsort(eig)
    lam_minus, lam_plus = eig[order]
    v_s, v_u = right[:, order[0]], right[:, order[1]]
    left = np.linalg.inv(right)
    l_minus, l_plus = left[order[0]], left[order[1]]
    l_minus = l_minus * np.sign(l_minus[1]) / np.linalg.norm(l_minus)
    l_plus = l_plus * np.sign(l_plus[0]) / np.linalg.norm(l_plus)
    bracket = float(l_minus[1] * l_plus[0] - l_minus[0] * l_plus[1])
    v = hamilton_field(ev, p0)
    conf = float(_conformal(ev.params, p0, xi)[0])
    return ExpansionRates(w_u=float(lam_plus), w_s=float(-lam_minus),
                          nu_min=float(min(lam_plus, -lam_minus)),
                          ht_over_sigma=float(v[0] / p0[4]), conformal=conf,
                          unstable_direction=v_u / np.linalg.norm(v_u),
                          stable_direction=v_s / np.linalg.norm(v_s), bracket=bracket,
                          bracket_flag=not bracket > 0, extras={"jacobian": jac})


def default_trapped_point(params, equatorial=None, prograde=True, sigma=1.0):
    """Trapped point used by the command line and acceptance checks."""
    equatorial = params.a != 0 if equatorial is None else equatorial
    return trapped_set_solve(params, sigma=sigma, equatorial=equatorial, prograde=prograde)
