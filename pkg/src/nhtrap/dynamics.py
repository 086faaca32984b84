"""Vector fields, discrete maps, numerical flows and linearizations.

States are handled in batches: a field or map receives a vector of times of
shape ``(N,)`` and states of shape ``(N, d)`` and returns ``(N, d)``.  The
time coordinate ``t`` is kept outside the state; a field advances it at the
constant rate ``time_component``.  For autonomous phase space flows whose
state already contains every coordinate, ``t`` is just the flow parameter.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from .errors import MaxIter, NoContraction, NonFinite, StepUnderflow

# scipy clips relative tolerances below this value
_RTOL_FLOOR = 100 * np.finfo(float).eps


def as_batch(t, x, dimension):
    """Return ``(t, x, single)`` with ``t`` of shape (N,) and ``x`` of shape (N, d)."""
    x = np.asarray(x, dtype=float)
    if dimension == 0:
        single = np.ndim(t) == 0
        xb = np.zeros((np.size(t), 0))
    else:
        single = x.ndim <= 1
        xb = x.reshape(-1, dimension)
    tb = np.broadcast_to(np.asarray(t, dtype=float), (xb.shape[0],)).copy()
    return tb, xb, single


@dataclass(frozen=True)
class VectorField:
    """A (possibly time dependent) vector field ``x' = rhs(t, x)``.

    ``rhs`` is vectorized over a batch of points.  Along integral curves the
    time coordinate moves as ``dt/ds = time_component``.
    """

    dimension: int
    rhs: Callable
    time_component: float = -1.0
    autonomous: bool = False

    @classmethod
    def pointwise(cls, dimension, func, **kwargs):
        """Wrap a field written for one point at a time."""

        def rhs(t, x):
            return np.array([func(ti, xi) for ti, xi in zip(t, x)], dtype=float)

        return cls(dimension, rhs, **kwargs)

    def eval(self, t, x):
        tb, xb, single = as_batch(t, x, self.dimension)
        out = np.asarray(self.rhs(tb, xb), dtype=float).reshape(xb.shape)
        return out[0] if single else out

    __call__ = eval


@dataclass(frozen=True)
class DiscreteMap:
    """A map ``(t, x) -> (t + time_step, spatial(t, x))``."""

    dimension: int
    spatial: Callable
    time_step: float = -1.0

    def eval(self, t, x):
        tb, xb, single = as_batch(t, x, self.dimension)
        out = np.asarray(self.spatial(tb, xb), dtype=float).reshape(xb.shape)
        tn = tb + self.time_step
        return (tn[0], out[0]) if single else (tn, out)

    __call__ = eval

    def power(self, n):
        """The n-fold composition."""
        if n < 1:
            raise ValueError("n must be a positive integer")

        def spatial(t, x):
            for k in range(n):
                x = self.spatial(t + k * self.time_step, x)
            return x

        return DiscreteMap(self.dimension, spatial, n * self.time_step)


@dataclass
class Trajectory:
    """Samples of an integral curve; the last row is the endpoint."""

    flow_times: np.ndarray
    times: np.ndarray
    states: np.ndarray

    @property
    def end(self):
        return self.times[-1], self.states[-1]


def _checked_rhs(field, t0, c):
    def rhs(s, y):
        n = y.size // field.dimension if field.dimension else 0
        x = y.reshape(n, field.dimension)
        v = np.asarray(field.rhs(np.full(n, t0 + c * s), x), dtype=float)
        if not np.all(np.isfinite(v)):
            raise NonFinite(f"non-finite field value at flow time {s:g}")
        return v.ravel()

    return rhs


def _solve(rhs, duration, y0, tol, n_components, samples=None):
    # solve_ivp measures the local error in an RMS norm over all components,
    # so the tolerance is divided by sqrt(n) to bound every component.
    scaled = tol / np.sqrt(max(n_components, 1))
    rtol = max(scaled, _RTOL_FLOOR)
    sol = solve_ivp(rhs, (0.0, duration), y0, method="DOP853", rtol=rtol,
                    atol=scaled, t_eval=samples)
    if sol.status != 0:
        if "step size" in sol.message.lower():
            raise StepUnderflow(sol.message)
        raise NonFinite(sol.message)
    return sol


def integrate(field, start, duration, tol=1e-10, samples=None):
    """Integrate ``field`` from ``start = (t, x)`` for flow time ``duration``.

    Adaptive Dormand-Prince 8(5,3) with per-step local error control.
    ``samples`` are flow times in ``[0, duration]`` at which the dense output
    is recorded; the endpoint is always appended.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    t0, x0 = start
    x0 = np.asarray(x0, dtype=float).ravel()
    c = field.time_component
    if duration == 0:
        return Trajectory(np.zeros(1), np.array([float(t0)]), x0[None].copy())
    s_eval = None
    if samples is not None:
        s_eval = np.union1d(np.asarray(samples, dtype=float), [duration])
        if duration < 0:
            s_eval = s_eval[::-1]
    sol = _solve(_checked_rhs(field, t0, c), duration, x0, tol, x0.size, s_eval)
    s = sol.t if samples is not None else sol.t[[-1]]
    y = sol.y.T if samples is not None else sol.y.T[[-1]]
    return Trajectory(s, t0 + c * s, y)


def flow(field, t, x, duration, tol=1e-10):
    """Flow a batch of points; returns ``(t', x')``."""
    tb, xb, single = as_batch(t, x, field.dimension)
    if duration == 0 or xb.size == 0:
        return (tb[0], xb[0].copy()) if single else (tb.copy(), xb.copy())
    c = field.time_component
    n = xb.shape[0]

    def rhs(s, y):
        v = np.asarray(field.rhs(tb + c * s, y.reshape(n, -1)), dtype=float)
        if not np.all(np.isfinite(v)):
            raise NonFinite(f"non-finite field value at flow time {s:g}")
        return v.ravel()

    sol = _solve(rhs, duration, xb.ravel(), tol, xb.size)
    out = sol.y[:, -1].reshape(xb.shape)
    tn = tb + c * duration
    return (tn[0], out[0]) if single else (tn, out)


def time_one_map(field, tol=1e-11, duration=1.0):
    """The flow map of ``field`` over ``duration`` (default one unit).

    The returned map's ``time_step`` is ``time_component * duration``.
    """

    def spatial(t, x):
        return flow(field, t, x, duration, tol)[1]

    return DiscreteMap(field.dimension, spatial, field.time_component * duration)


def jacobian(fmap, point, h=None):
    """Spatial differential of a map by central differences.

    ``point = (t, x)``; ``x`` may be a single state (returns ``(d, d)``) or a
    batch (returns ``(N, d, d)``).  The default step is ``1e-6 * (1 + |x|)``.
    """
    t, x = point
    tb, xb, single = as_batch(t, x, fmap.dimension)
    n, d = xb.shape
    if h is None:
        h = 1e-6 * (1.0 + np.linalg.norm(xb, axis=1))
    h = np.broadcast_to(np.asarray(h, dtype=float), (n,))
    eye = np.eye(d)
    # stencil layout: (point, direction, sign)
    shifts = eye[None, :, None, :] * np.array([1.0, -1.0])[None, None, :, None]
    stencil = xb[:, None, None, :] + h[:, None, None, None] * shifts
    ts = np.repeat(tb, 2 * d)
    vals = np.asarray(fmap.spatial(ts, stencil.reshape(-1, d)), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise NonFinite("non-finite map value on the difference stencil")
    vals = vals.reshape(n, d, 2, d)
    jac = (vals[:, :, 0, :] - vals[:, :, 1, :]) / (2 * h[:, None, None])
    jac = np.swapaxes(jac, 1, 2)
    return jac[0] if single else jac


def invert_map_step(fmap, target, guess=None, tol=1e-12, jac=None, max_iter=60):
    """Solve ``fmap(t_in, x) = target`` for ``x``, with ``t_in = t - time_step``.

    Chord iteration ``x <- x - J^{-1}(f(x) - y)``.  ``J`` is the Jacobian of
    ``jac`` (a matrix, an array of matrices, or a :class:`DiscreteMap` whose
    differential at the guess is used, typically the stationary part) and
    defaults to the differential of ``fmap`` itself at the guess.  Works on
    single targets or batches.  Returns ``(t_in, x)``.
    """
    t, y = target
    tb, yb, single = as_batch(t, y, fmap.dimension)
    t_in = tb - fmap.time_step
    x = yb.copy() if guess is None else as_batch(t, guess, fmap.dimension)[1].copy()
    if jac is None or isinstance(jac, DiscreteMap):
        jmap = fmap if jac is None else jac
        mats = jacobian(jmap, (t_in, x))
    else:
        mats = np.broadcast_to(np.asarray(jac, dtype=float),
                               (x.shape[0], fmap.dimension, fmap.dimension))
    resid = fmap.spatial(t_in, x) - yb
    size = np.abs(resid).max(axis=1) if x.size else np.zeros(len(x))
    for _ in range(max_iter):
        active = size >= tol
        if not active.any():
            return (t_in[0], x[0]) if single else (t_in, x)
        step = np.linalg.solve(mats[active], resid[active][..., None])[..., 0]
        x[active] -= step
        new = fmap.spatial(t_in[active], x[active]) - yb[active]
        new_size = np.abs(new).max(axis=1)
        grew = (new_size >= size[active]) & (new_size >= tol)
        if grew.any():
            raise NoContraction(
                f"chord iteration residual grew from {size[active][grew].max():.3e}"
                f" to {new_size[grew].max():.3e}")
        resid[active] = new
        size[active] = new_size
    raise MaxIter(f"residual {size.max():.3e} after {max_iter} iterations")
