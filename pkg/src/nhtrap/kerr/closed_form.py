"""Hand differentiated dual metric of exact Kerr.

Written from the separated form

    rho^2 G = ((r^2 + a^2) sigma + a xi_phi)^2 / Delta - Delta xi_r^2 - xi_theta^2
              - (a sigma sin(theta) + xi_phi / sin(theta))^2,

which shares no code with the matrix path in :mod:`.metric`; it serves as
the oracle for the generic finite difference derivatives.
"""

import numpy as np


def _parts(params, p):
    p = np.atleast_2d(np.asarray(p, dtype=float))
    m, a = params.m, params.a
    r, th = p[:, 1], p[:, 2]
    sig, xr, xth, xph = p[:, 4], p[:, 5], p[:, 6], p[:, 7]
    s, c = np.sin(th), np.cos(th)
    delta = r * r - 2 * m * r + a * a
    rho2 = r * r + a * a * c * c
    big = (r * r + a * a) * sig + a * xph
    ang = a * sig * s + xph / s
    num = big ** 2 / delta - delta * xr ** 2 - xth ** 2 - ang ** 2
    return dict(m=m, a=a, r=r, s=s, c=c, sig=sig, xr=xr, xth=xth, xph=xph,
                delta=delta, rho2=rho2, big=big, ang=ang, num=num)


def closed_form_G(params, p):
    q = _parts(params, p)
    return q["num"] / q["rho2"]


def closed_form_gradient(params, p):
    """``(dG/dt, dG/dr, ..., dG/dxi_phi)`` for phase points ``(N, 8)``."""
    q = _parts(params, p)
    a, r, s, c = q["a"], q["r"], q["s"], q["c"]
    delta, rho2, big, ang, num = q["delta"], q["rho2"], q["big"], q["ang"], q["num"]
    d_delta = 2 * r - 2 * q["m"]
    out = np.zeros((len(r), 8))
    dnum_dr = 4 * r * q["sig"] * big / delta - big ** 2 * d_delta / delta ** 2 \
        - d_delta * q["xr"] ** 2
    out[:, 1] = dnum_dr / rho2 - num * 2 * r / rho2 ** 2
    dnum_dth = -2 * ang * (a * q["sig"] * c - q["xph"] * c / s ** 2)
    drho2_dth = -2 * a * a * c * s
    out[:, 2] = dnum_dth / rho2 - num * drho2_dth / rho2 ** 2
    out[:, 4] = (2 * big * (r * r + a * a) / delta - 2 * ang * a * s) / rho2
    out[:, 5] = -2 * delta * q["xr"] / rho2
    out[:, 6] = -2 * q["xth"] / rho2
    out[:, 7] = (2 * big * a / delta - 2 * ang / s) / rho2
    return out


def closed_form_hamilton(params, p):
    """Hamilton field ``(dG/dzeta, -dG/dx)`` from the closed form gradient."""
    grad = closed_form_gradient(params, p)
    return np.concatenate([grad[:, 4:], -grad[:, :4]], axis=1)
