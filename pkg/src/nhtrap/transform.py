"""Graph transform solvers for invariant sections and manifolds.

Conventions.  A map ``f`` acts on ``(t, x)`` with ``x = (u, s)``: ``u`` are
the ``d_U`` base coordinates of the chart and ``s`` the ``d_S`` fiber
coordinates.  A section ``sigma`` describes the graph ``s = sigma(t, u)``.
The graph transform ``f#sigma`` is the section whose graph is the image of
the graph of ``sigma``:

    f#sigma(t', y) = pi_S f(t, g(y), sigma(t, g(y))),   t' = t + time_step,

where ``g`` is a right inverse of ``u -> pi_U f(t, u, sigma(t, u))``.  On a
uniform t-grid whose spacing divides ``|time_step|`` the new slice at ``t'``
reads exactly one old slice, so each step shrinks the valid window by
``|time_step|`` at one end.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dynamics import DiscreteMap, VectorField, invert_map_step, jacobian, time_one_map
from .errors import (AllZero, ContractionStalled, ContractionViolated, MaxIter, NoContraction,
                     NotHyperbolic, OutsideChart, SeedInconsistent, WindowExhausted)
from .hyperbolicity import Splitting, check_normal_hyperbolicity, map_rates, smallest_hyperbolic_power
from .sections import SectionGrid

# --------------------------------------------------------------------------
# problem description


@dataclass
class StationaryData:
    """The unperturbed problem in the chart.

    ``stationary_map`` is the time independent map (or ``stationary_field``
    the field) whose trapped set sits at the chart origin; the splitting
    defaults to unstable = base axes, stable = fiber axes.
    """

    base_dim: int
    fiber_dim: int
    stationary_map: Optional[DiscreteMap] = None
    stationary_field: Optional[VectorField] = None
    splitting: Optional[Splitting] = None
    r: int = 1

    def __post_init__(self):
        if self.splitting is None:
            origin = np.zeros(self.base_dim + self.fiber_dim)
            self.splitting = Splitting.coordinate(origin, 0, self.base_dim, self.fiber_dim)

    def rates(self, fmap=None):
        fbar = fmap if fmap is not None else self.stationary_map
        if fbar is None:
            return None
        return map_rates(fbar, self.splitting)

    def check(self, fmap=None):
        """Raise :class:`NotHyperbolic` unless the rate check passes at order ``r``."""
        rates = self.rates(fmap)
        if rates is None:
            return None
        report = check_normal_hyperbolicity(rates, max(self.r, 1))
        if not report:
            raise NotHyperbolic("; ".join(report.failures) + f" (margin {report.margin:.3e})")
        return rates


@dataclass
class FiberBundleMap:
    """A bundle map ``(t, x, e) -> (t + step, base_map(t, x), fiber_map(t, x, e))``."""

    base_map: DiscreteMap
    fiber_map: object
    fiber_dim: int

    def total_map(self):
        d = self.base_map.dimension

        def spatial(t, z):
            x, e = z[:, :d], z[:, d:]
            return np.concatenate([self.base_map.spatial(t, x),
                                   np.asarray(self.fiber_map(t, x, e), dtype=float)
                                   .reshape(len(z), -1)], axis=1)

        return DiscreteMap(d + self.fiber_dim, spatial, self.base_map.time_step)


@dataclass
class ManifoldResult:
    """Outcome of a graph transform iteration."""

    section: SectionGrid
    n_iter: int
    theta: float
    increments: list
    residual: float
    c_sigma: float
    rates: object = None
    tangency: Optional[float] = None
    extras: dict = field(default_factory=dict)

    @property
    def thetas(self):
        inc = np.asarray(self.increments)
        return inc[1:] / inc[:-1] if len(inc) > 1 else np.array([])

    def summary(self):
        out = {"n_iter": self.n_iter, "theta": self.theta, "residual": self.residual,
               "c_sigma": self.c_sigma, "final_increment": self.increments[-1]
               if self.increments else None}
        if self.rates is not None:
            out["rates"] = self.rates.as_dict()
        if self.tangency is not None:
            out["tangency"] = self.tangency
        out.update(self.extras)
        return out


# --------------------------------------------------------------------------
# one step of the transform


def time_shift(sigma, time_step):
    """Index offset ``k`` such that output slice ``i`` reads input slice ``i + k``."""
    t = sigma.t_nodes
    if len(t) < 2:
        raise ValueError("need at least two t-nodes")
    dt = np.diff(t)
    if not np.allclose(dt, dt[0], rtol=1e-9, atol=0.0):
        raise ValueError("the t-grid must be uniform")
    ratio = abs(time_step) / dt[0]
    k = int(round(ratio))
    if k == 0 or abs(ratio - k) > 1e-9 * max(ratio, 1.0):
        raise ValueError("grid spacing must divide |time_step|")
    return k if time_step < 0 else -k


def _lagrange_cubic(ys, y):
    """Weights of cubic Lagrange interpolation and of its derivative at ``y``."""
    n = ys.shape[-1]
    w = np.ones(ys.shape)
    dw = np.zeros(ys.shape)
    for a in range(n):
        for b in range(n):
            if b == a:
                continue
            denom = ys[..., a] - ys[..., b]
            # derivative by the product rule over the remaining factors
            rest = np.ones(y.shape)
            for c in range(n):
                if c not in (a, b):
                    rest = rest * (y - ys[..., c]) / (ys[..., a] - ys[..., c])
            dw[..., a] += rest / denom
            w[..., a] *= (y - ys[..., b]) / denom
    return w, dw


class _Graph:
    """Evaluate ``f`` on the graph of ``sigma`` over given input slices."""

    def __init__(self, fmap, sigma, in_idx):
        self.fmap = fmap
        self.sigma = sigma
        self.in_idx = in_idx
        self.t_in = sigma.t_nodes[in_idx]
        self.d_u = sigma.base_dim

    def image(self, rows, u):
        """Image of the graph points over ``u`` (N, d_U) on slices ``in_idx[rows]``."""
        idx = self.in_idx[rows]
        s = self.sigma._slice_values(idx, u)
        return self.fmap.spatial(self.t_in[rows], np.concatenate([u, s], axis=1))


def _invert_1d(graph, targets, tol, cache, max_iter=20):
    """Right inverse for a one dimensional base by push-forward and secant steps."""
    sigma = graph.sigma
    n_sl = len(graph.in_idx)
    nodes = sigma.base_nodes[0]
    lo_box, hi_box = nodes[0], nodes[-1]
    y = targets[:, 0]
    n_t = len(y)
    rows_all = np.arange(n_sl)

    xa, xb = cache.get("preimage", (lo_box, hi_box))
    for _ in range(12):
        m = 2 * len(nodes) + 1
        xs = np.linspace(xa, xb, m)
        img = graph.image(np.repeat(rows_all, m), np.tile(xs, n_sl)[:, None])
        ys = img[:, 0].reshape(n_sl, m)
        steps = np.diff(ys, axis=1)
        if not (np.all(steps > 0, axis=1) | np.all(steps < 0, axis=1)).all():
            raise NoContraction("base projection of the graph image is not monotone")
        decreasing = steps[:, 0] < 0
        ys_sorted = np.where(decreasing[:, None], ys[:, ::-1], ys)
        xs_sorted = np.where(decreasing[:, None], xs[::-1][None, :], xs[None, :])
        covered = (ys_sorted[:, 0] <= y.min()) & (ys_sorted[:, -1] >= y.max())
        if covered.all():
            # shrink to the pushed points bracketing the targets if that is much tighter
            i_lo = np.clip((ys_sorted < y.min()).sum(axis=1) - 1, 0, m - 1)
            i_hi = np.clip(m - (ys_sorted > y.max()).sum(axis=1), 0, m - 1)
            ends = np.concatenate([np.take_along_axis(xs_sorted, i_lo[:, None], 1),
                                   np.take_along_axis(xs_sorted, i_hi[:, None], 1)])
            na, nb = ends.min(), ends.max()
            if nb - na > 0.5 * (xb - xa):
                break
            xa, xb = na, nb
            continue
        if xa <= lo_box and xb >= hi_box:
            raise OutsideChart("the image of the chart does not cover the chart")
        width = xb - xa
        xa, xb = max(lo_box, xa - width), min(hi_box, xb + width)
    else:
        raise OutsideChart("could not bracket the preimage of the chart")

    # locate each target and interpolate x(y) with a cubic through 4 pushed points
    pos = (ys_sorted[:, :, None] < y[None, None, :]).sum(axis=1)
    start = np.clip(pos - 2, 0, m - 4)
    stencil = start[:, :, None] + np.arange(4)
    ysel = np.take_along_axis(ys_sorted[:, None, :].repeat(n_t, 1), stencil, axis=2)
    xsel = np.take_along_axis(xs_sorted[:, None, :].repeat(n_t, 1), stencil, axis=2)
    w, dw = _lagrange_cubic(ysel, np.broadcast_to(y, (n_sl, n_t)))
    x = (w * xsel).sum(axis=2).ravel()
    slope = 1.0 / (dw * xsel).sum(axis=2).ravel()

    rows = np.repeat(rows_all, n_t)
    yy = np.tile(y, n_sl)
    img = graph.image(rows, x[:, None])
    resid = img[:, 0] - yy
    first = np.abs(resid).copy()
    x_prev = r_prev = None
    active = np.abs(resid) >= tol
    for it in range(max_iter):
        if not active.any():
            break
        a = np.flatnonzero(active)
        if x_prev is None:
            step = resid[a] / slope[a]
        else:
            denom = resid[a] - r_prev[a]
            secant = np.where(denom != 0, (x[a] - x_prev[a]) / np.where(denom != 0, denom, 1.0),
                              1.0 / slope[a])
            step = resid[a] * secant
        x_prev = x.copy() if x_prev is None else x_prev
        r_prev = resid.copy() if r_prev is None else r_prev
        x_prev[a] = x[a]
        r_prev[a] = resid[a]
        x[a] = x[a] - step
        if np.any(x[a] < lo_box - 1e-12) or np.any(x[a] > hi_box + 1e-12):
            raise OutsideChart("right inverse left the chart")
        x[a] = np.clip(x[a], lo_box, hi_box)
        new = graph.image(rows[a], x[a][:, None])
        img[a] = new
        resid[a] = new[:, 0] - yy[a]
        if np.any(np.abs(resid[a]) > 10 * np.maximum(first[a], tol)):
            raise NoContraction("right inverse iteration diverged")
        active[a] = np.abs(resid[a]) >= tol
    else:
        if active.any():
            raise MaxIter(f"right inverse residual {np.abs(resid).max():.3e}")
    # remember a slightly widened preimage interval for the next step
    span = x.max() - x.min()
    cache["preimage"] = (max(lo_box, x.min() - 0.1 * span), min(hi_box, x.max() + 0.1 * span))
    return img[:, 1:].reshape(n_sl, n_t, -1), np.abs(resid).max()


def _invert_nd(graph, targets, tol):
    """Right inverse for a multi dimensional base via :func:`invert_map_step`."""
    d_u = graph.d_u
    sigma = graph.sigma
    fmap = graph.fmap
    n_sl, n_t = len(graph.in_idx), len(targets)

    def base_part(t, u):
        s = sigma.evaluate(t, u)
        return fmap.spatial(t, np.concatenate([u, s], axis=1))[:, :d_u]

    base_map = DiscreteMap(d_u, base_part, fmap.time_step)
    t_out = np.repeat(graph.t_in + fmap.time_step, n_t)
    yy = np.tile(targets, (n_sl, 1))
    # linear guess from the stationary differential at the chart centre
    centre = np.zeros((1, d_u))
    lin = jacobian(base_map, (graph.t_in[:1], centre))[0]
    guess = np.linalg.solve(lin, (yy - base_map.spatial(graph.t_in[:1], centre)).T).T
    _, u = invert_map_step(base_map, (t_out, yy), guess=guess, tol=tol)
    rows = np.repeat(np.arange(n_sl), n_t)
    sigma._check_base(u)
    img = graph.image(rows, u)
    resid = np.abs(img[:, :d_u] - yy).max()
    return img[:, d_u:].reshape(n_sl, n_t, -1), resid


def transform_slices(fmap, sigma, out_idx, tol=1e-12, cache=None):
    """Values of ``f#sigma`` on every base node of the output slices ``out_idx``.

    Returns an array ``(len(out_idx), *base_shape, fiber_dim)`` and the
    largest base residual of the right inverse.
    """
    cache = {} if cache is None else cache
    out_idx = np.asarray(out_idx, dtype=int)
    in_idx = out_idx + time_shift(sigma, fmap.time_step)
    sigma._check_window(in_idx)
    graph = _Graph(fmap, sigma, in_idx)
    shape = (len(out_idx),) + sigma.base_shape + (sigma.fiber_dim,)
    if sigma.base_dim == 0:
        img = graph.image(np.arange(len(in_idx)), np.zeros((len(in_idx), 0)))
        return img.reshape(shape), 0.0
    targets = sigma.base_points()
    if sigma.base_dim == 1:
        vals, resid = _invert_1d(graph, targets, tol, cache)
    else:
        vals, resid = _invert_nd(graph, targets, tol)
    return vals.reshape(shape), resid


def graph_transform_step(fmap, sigma, tol=1e-12, cache=None):
    """One application of the graph transform; the window shrinks by ``|time_step|``."""
    shift = time_shift(sigma, fmap.time_step)
    lo, hi = sigma.window
    window = (lo, hi - shift) if shift > 0 else (lo - shift, hi)
    if window[0] > window[1]:
        raise WindowExhausted("the t-window is used up")
    out_idx = np.arange(window[0], window[1] + 1)
    new, _ = transform_slices(fmap, sigma, out_idx, tol, cache)
    vals = np.array(sigma.values)
    vals[out_idx] = new
    return sigma.with_values(vals, window=window)


# --------------------------------------------------------------------------
# invariance check


def _sample_nodes(sigma, fmap, rng, n):
    shift = time_shift(sigma, fmap.time_step)
    lo, hi = sigma.window
    # the image time must also be a valid node
    first, last = (lo + shift, hi) if shift > 0 else (lo, hi + shift)
    if first > last:
        raise WindowExhausted("window too short to check invariance")
    return rng.integers(first, last + 1, size=n)


def verify_invariance(fmap, sigma, n_samples=100, tol=None, seed=0, nodes=False):
    """Largest distance between ``f`` applied to graph points and the graph.

    Sample times are grid nodes of the window (so the image time is a node
    too); sample base points are uniform in the chart, keeping those whose
    image stays in the chart.  With ``nodes=True`` every grid node whose
    image stays in the chart is checked as well.  ``tol`` is accepted for
    signature symmetry and unused.
    """
    rng = np.random.default_rng(seed)
    d_u = sigma.base_dim
    box = np.array(sigma.base_box).reshape(d_u, 2)
    ts, us = [], []
    have = 0
    for _ in range(50):
        idx = _sample_nodes(sigma, fmap, rng, 4 * n_samples)
        t = sigma.t_nodes[idx]
        u = rng.uniform(box[:, 0], box[:, 1], size=(len(idx), d_u))
        keep = _images_inside(fmap, sigma, t, u)
        ts.append(t[keep])
        us.append(u[keep])
        have += keep.sum()
        if have >= n_samples:
            break
    t = np.concatenate(ts)[:n_samples]
    u = np.concatenate(us)[:n_samples]
    if nodes:
        tn, un = sigma.node_points(valid_only=True)
        shift = time_shift(sigma, fmap.time_step)
        lo, hi = sigma.window
        first, last = (lo + shift, hi) if shift > 0 else (lo, hi + shift)
        allowed = sigma.t_nodes[first:last + 1]
        ok = np.isin(tn, allowed)
        inside = np.zeros(len(tn), dtype=bool)
        inside[ok] = _images_inside(fmap, sigma, tn[ok], un[ok])
        t = np.concatenate([t, tn[inside]])
        u = np.concatenate([u, un[inside]])
    if len(t) == 0:
        return 0.0
    return float(_residuals(fmap, sigma, t, u).max())


def _images_inside(fmap, sigma, t, u):
    d_u = sigma.base_dim
    if d_u == 0:
        return np.ones(len(t), dtype=bool)
    s = sigma.evaluate(t, u)
    _, img = fmap(t, np.concatenate([u, s], axis=1))
    box = np.array(sigma.base_box).reshape(d_u, 2)
    return np.all((img[:, :d_u] >= box[:, 0]) & (img[:, :d_u] <= box[:, 1]), axis=1)


def _residuals(fmap, sigma, t, u):
    d_u = sigma.base_dim
    s = sigma.evaluate(t, u)
    t_img, img = fmap(t, np.concatenate([u, s], axis=1))
    graph = sigma.evaluate(t_img, img[:, :d_u])
    return np.linalg.norm(img[:, d_u:] - graph, axis=1)


# --------------------------------------------------------------------------
# iteration drivers


def uniform_t_grid(t_lo, t_hi, dt):
    n = int(round((t_hi - t_lo) / dt))
    if abs(t_lo + n * dt - t_hi) > 1e-9 * max(1.0, abs(t_hi)):
        raise ValueError("dt must divide the t-range")
    return t_lo + dt * np.arange(n + 1)


def _initial_section(initial, t_nodes, base_nodes, fiber_dim, interpolation):
    if initial is None:
        return SectionGrid.zeros(t_nodes, base_nodes, fiber_dim, interpolation=interpolation)
    if isinstance(initial, SectionGrid):
        return initial
    return SectionGrid.from_function(initial, t_nodes, base_nodes, fiber_dim,
                                     interpolation=interpolation)


def iterate_graph_transform(fmap, sigma, t_range, tol, budget, weight=None, n_samples=100,
                            seed=0, inner_tol=None, stall=1 - 1e-3):
    """Iterate ``sigma <- f#sigma`` until the sup increment on ``t_range`` is below ``tol``
    and the invariance residual below ``10 tol``.
    """
    inner_tol = tol * 1e-2 if inner_tol is None else inner_tol
    t0, t1 = t_range
    increments = []
    cache = {}
    residual = np.inf
    for k in range(1, budget + 1):
        try:
            new = graph_transform_step(fmap, sigma, inner_tol, cache)
        except WindowExhausted as exc:
            raise WindowExhausted(f"budget of {budget} steps used up before convergence") from exc
        inc = float(np.abs(new.restrict(t0, t1).valid_values
                           - sigma.restrict(t0, t1).valid_values).max())
        increments.append(inc)
        sigma = new
        if len(increments) >= 4:
            recent = np.array(increments[-4:])
            ratios = recent[1:] / np.maximum(recent[:-1], 1e-300)
            if np.all(ratios >= stall) and recent[-1] > tol:
                raise ContractionStalled(f"increment ratios {ratios}")
        if inc < tol:
            residual = verify_invariance(fmap, sigma.restrict(t0, sigma.valid_t[-1]), n_samples,
                                         seed=seed)
            if residual < 10 * tol:
                break
    else:
        raise WindowExhausted(f"no convergence within a budget of {budget} steps "
                              f"(last increment {increments[-1]:.3e}, residual {residual:.3e})")
    theta = _theta(increments)
    out = sigma.restrict(t0, t1)
    c_sigma = out.rho_constant(weight) if weight is not None else None
    out = out.with_values(out.values, c_sigma=c_sigma)
    return ManifoldResult(out, k, theta, increments, residual, c_sigma), sigma


def _theta(increments):
    inc = np.asarray(increments)
    if len(inc) < 3:
        return float("nan")
    # ratios from k >= 2, ignoring increments at the rounding floor
    floor = 1e-13 * max(inc.max(), 1e-300)
    ratios = [inc[i] / inc[i - 1] for i in range(2, len(inc)) if inc[i - 1] > floor and inc[i] > floor]
    return float(max(ratios)) if ratios else float("nan")


def _check_window_start(weight, t0, eps):
    if weight is not None and weight(t0) >= eps ** 2:
        raise ValueError(f"window start too early: rho(T0) = {float(weight(t0)):.3e} >= eps^2")


def unstable_manifold(fmap, stationary, weight, eps, tol=1e-10, budget=60, t_range=(100.0, 200.0),
                      dt=None, n_base=9, initial=None, n_samples=100, seed=0,
                      interpolation="cubic"):
    """Unstable manifold of a decaying perturbation of a stationary map.

    The chart base is the box ``[-eps, eps]^d_U``; the t-grid is uniform with
    spacing ``dt`` (default ``|time_step|``) over
    ``[T0, T1 + budget |time_step|]`` for a map with negative time step
    (for a positive step the extra room is added below ``T0``).
    """
    t0, t1 = t_range
    step = abs(fmap.time_step)
    dt = step if dt is None else dt
    _check_window_start(weight, t0, eps)
    rates = stationary.check()
    if fmap.time_step < 0:
        t_nodes = uniform_t_grid(t0, t1 + budget * step, dt)
    else:
        t_nodes = uniform_t_grid(t0 - budget * step, t1, dt)
    base_nodes = [np.linspace(-eps, eps, n_base)] * stationary.base_dim
    sigma = _initial_section(initial, t_nodes, base_nodes, stationary.fiber_dim, interpolation)
    result, _ = iterate_graph_transform(fmap, sigma, t_range, tol, budget, weight, n_samples, seed)
    result.rates = rates
    return result


def flow_maps(field, n=1, tol=1e-11):
    """Time-n map of ``field`` and its inverse."""
    return time_one_map(field, tol, n), time_one_map(field, tol, -n)


def flow_power(stationary, r=1, n_max=20, tol=1e-11):
    """Smallest n making the stationary time-n map pass the rate check."""
    fbar = time_one_map(stationary.stationary_field, tol)
    n = smallest_hyperbolic_power(fbar, stationary.splitting, r, n_max)
    if n is None:
        raise NotHyperbolic(f"no time-n map with n <= {n_max} passes the rate check")
    return n


def tangency_residual(field, sigma, n_samples=100, seed=0, h=None):
    """Largest normal component of ``field`` at sampled graph points.

    The normal component of ``V = (V_u, V_s)`` with ``V t = c`` at a graph
    point is ``V_s - D_u sigma V_u - c d_t sigma``, divided by
    ``sqrt(1 + |d sigma|^2)``.  Derivatives of the interpolated section are
    central differences, in t with the grid spacing.
    """
    rng = np.random.default_rng(seed)
    d_u = sigma.base_dim
    lo, hi = sigma.window
    if hi - lo < 2:
        raise WindowExhausted("window too short for a time derivative")
    idx = rng.integers(lo + 1, hi, size=n_samples)
    t = sigma.t_nodes[idx]
    dt = sigma.t_nodes[idx + 1] - t
    box = np.array(sigma.base_box).reshape(d_u, 2)
    width = box[:, 1] - box[:, 0]
    hh = 1e-4 * width if h is None else np.full(d_u, h)
    u = rng.uniform(box[:, 0] + hh, box[:, 1] - hh, size=(n_samples, d_u))
    s = sigma.evaluate(t, u)
    ds_dt = (sigma.evaluate(t + dt, u) - sigma.evaluate(t - dt, u)) / (2 * dt[:, None])
    grads = []
    for k in range(d_u):
        e = np.zeros(d_u)
        e[k] = hh[k]
        grads.append((sigma.evaluate(t, u + e) - sigma.evaluate(t, u - e)) / (2 * hh[k]))
    v = field.eval(t, np.concatenate([u, s], axis=1))
    normal = v[:, d_u:] - field.time_component * ds_dt
    norm2 = 1.0 + (ds_dt ** 2).sum(axis=1)
    for k in range(d_u):
        normal = normal - grads[k] * v[:, [k]]
        norm2 = norm2 + (grads[k] ** 2).sum(axis=1)
    return float((np.linalg.norm(normal, axis=1) / np.sqrt(norm2)).max())


def flow_unstable_manifold(field, stationary, weight, eps, tol=1e-10, budget=60,
                           t_range=(100.0, 200.0), n=None, dt=None, n_base=9, initial=None,
                           n_samples=100, seed=0, integration_tol=None):
    """Unstable manifold of a flow through its time-n map, plus a tangency check.

    ``n`` defaults to the smallest power for which the stationary time-n map
    passes the normal hyperbolicity check.
    """
    integration_tol = tol * 1e-2 if integration_tol is None else integration_tol
    if n is None:
        n = flow_power(stationary, stationary.r) if stationary.stationary_field is not None else 1
    fmap = time_one_map(field, integration_tol, n)
    stat = stationary
    if stationary.stationary_field is not None:
        stat = StationaryData(stationary.base_dim, stationary.fiber_dim,
                              time_one_map(stationary.stationary_field, integration_tol, n),
                              stationary.stationary_field, stationary.splitting, stationary.r)
    result = unstable_manifold(fmap, stat, weight, eps, tol, budget, t_range, dt, n_base, initial,
                               n_samples, seed)
    result.tangency = tangency_residual(field, result.section, n_samples, seed)
    result.extras["power"] = n
    return result


# --------------------------------------------------------------------------
# stable manifolds from a seed slab


def inverse_map(fmap, tol=1e-13, jac=None):
    """Numerical inverse of ``fmap`` built on :func:`invert_map_step`."""

    def spatial(t, x):
        # f(t + |step|, z) = (t, x): the input time of the forward map
        _, z = invert_map_step(fmap, (t, x), guess=None, tol=tol, jac=jac)
        return z

    return DiscreteMap(fmap.dimension, spatial, -fmap.time_step)


def _smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x * x * x * (10 - 15 * x + 6 * x * x)


def make_stable_seed(inverse, given, t_start, eps, base_dim, fiber_dim, dt=None, n_base=9,
                     interpolation="cubic", tol=1e-12):
    """Seed slab ``[t_start, t_start + 3/2 |step|]`` for :func:`stable_manifold`.

    ``inverse`` is the inverse map (positive time step), ``given(t, u)`` the
    section prescribed on the first half slab.  On the last half slab the
    seed equals the image of the first half under ``inverse``; in between it
    blends the prescribed section into that image with a smooth step.
    """
    step = abs(inverse.time_step)
    dt = step / 2 if dt is None else dt
    base_nodes = [np.linspace(-eps, eps, n_base)] * base_dim
    nodes = uniform_t_grid(t_start - step / 2, t_start + 1.5 * step, dt)
    prescribed = SectionGrid.from_function(given, nodes, base_nodes, fiber_dim,
                                           interpolation=interpolation)
    out_idx = np.flatnonzero(nodes >= t_start + step / 2 - 1e-9)
    image, _ = transform_slices(inverse, prescribed, out_idx, tol)
    vals = np.array(prescribed.values)
    blend = _smoothstep((nodes[out_idx] - t_start - step / 2) / (step / 2))
    blend = blend.reshape((-1,) + (1,) * (base_dim + 1))
    vals[out_idx] = (1 - blend) * vals[out_idx] + blend * image
    first = int(np.flatnonzero(nodes >= t_start - 1e-9)[0])
    return SectionGrid(nodes[first:], tuple(base_nodes), vals[first:], interpolation=interpolation)


def check_seed(inverse, seed, tol):
    """Largest mismatch between the seed's last half slab and the image of its first half."""
    step = abs(inverse.time_step)
    t_s = seed.t_nodes[0]
    late = np.flatnonzero(seed.t_nodes >= t_s + step - 1e-9)
    image, _ = transform_slices(inverse, seed, late, tol)
    return float(np.abs(image - seed.values[late]).max())


def stable_manifold(fmap, stationary, seed, weight, eps, tol=1e-10, t_end=None, inverse=None,
                    n_samples=100, sample_seed=0):
    """Stable manifold grown forward in t from a seed slab.

    Uses the inverse map (``inverse``, or a numerical inverse of ``fmap``):
    each node beyond the seed is the image of the node ``|time_step|``
    earlier, which is the stable manifold construction through preimages of
    the seed.  ``eps`` must match the seed's chart.
    """
    inv = inverse if inverse is not None else inverse_map(fmap, tol * 1e-2)
    step = abs(fmap.time_step)
    rates = stationary.check()
    box = seed.base_box
    if box and not np.allclose(box, [(-eps, eps)] * len(box)):
        raise ValueError("seed chart does not match eps")
    mismatch = check_seed(inv, seed, tol * 1e-2)
    if mismatch > tol:
        raise SeedInconsistent(f"seed disagrees with its image by {mismatch:.3e}")
    t_s = seed.t_nodes[0]
    t_end = t_s + 10 * step if t_end is None else t_end
    dt = seed.t_nodes[1] - seed.t_nodes[0]
    nodes = uniform_t_grid(t_s, t_end, dt)
    n_seed = len(seed.t_nodes)
    vals = np.zeros((len(nodes),) + seed.values.shape[1:])
    vals[:n_seed] = seed.values
    sigma = SectionGrid(nodes, seed.base_nodes, vals, seed.interpolation, window=(0, n_seed - 1))
    shift = -time_shift(sigma, inv.time_step)
    cache = {}
    known = n_seed - 1
    while known < len(nodes) - 1:
        out_idx = np.arange(known + 1, min(known + shift, len(nodes) - 1) + 1)
        new, _ = transform_slices(inv, sigma, out_idx, tol * 1e-2, cache)
        vals = np.array(sigma.values)
        vals[out_idx] = new
        known = out_idx[-1]
        sigma = sigma.with_values(vals, window=(0, known))
    # invariance is checked away from the seed slab
    away = sigma.restrict(t_s + 1.5 * step, t_end)
    residual = verify_invariance(inv, away, n_samples, seed=sample_seed) if len(away.valid_t) > shift else 0.0
    c_sigma = sigma.rho_constant(weight) if weight is not None else None
    sigma = sigma.with_values(sigma.values, c_sigma=c_sigma)
    return ManifoldResult(sigma, len(nodes) - n_seed, float("nan"), [], residual, c_sigma, rates)


def flow_stable_manifold(field, stationary, seed, weight, eps, tol=1e-10, t_end=None, n=1,
                         integration_tol=None, n_samples=100):
    """Stable manifold of a flow using the backward time-n flow as the inverse map."""
    integration_tol = tol * 1e-2 if integration_tol is None else integration_tol
    fmap, inv = flow_maps(field, n, integration_tol)
    return stable_manifold(fmap, stationary, seed, weight, eps, tol, t_end, inv, n_samples)


# --------------------------------------------------------------------------
# invariant sections of fiber contractions


def fiber_rates(bundle, t_samples, x_samples, e_samples, h=1e-6):
    """Sampled fiber expansion ``k_x`` and inverse base norm ``alpha_x``."""
    d = bundle.base_map.dimension
    n = len(x_samples)
    t = np.asarray(t_samples, dtype=float)
    x = np.asarray(x_samples, dtype=float).reshape(n, d)
    e = np.asarray(e_samples, dtype=float).reshape(n, bundle.fiber_dim)
    cols = []
    for j in range(bundle.fiber_dim):
        de = np.zeros(bundle.fiber_dim)
        de[j] = h
        plus = np.asarray(bundle.fiber_map(t, x, e + de)).reshape(n, -1)
        minus = np.asarray(bundle.fiber_map(t, x, e - de)).reshape(n, -1)
        cols.append((plus - minus) / (2 * h))
    k = np.linalg.norm(np.stack(cols, axis=2), ord=2, axis=(1, 2))
    if d == 0:
        return k, np.zeros(n)
    jac = jacobian(bundle.base_map, (t, x))
    conorm = np.linalg.svd(jac, compute_uv=False)[:, -1]
    return k, 1.0 / conorm


def invariant_section(bundle, weight, t_range, eps=1.0, n_base=9, r=1, tol=1e-10, budget=60,
                      reference=None, n_samples=100, seed=0, interpolation="cubic"):
    """Invariant section of a fiber contraction over an overflowing base map.

    The base chart is ``[-eps, eps]^d``.  ``reference`` is the invariant
    section of the unperturbed bundle map; the reported ``C_Sigma`` measures
    ``sigma - reference`` against the weight.
    """
    d = bundle.base_map.dimension
    t0, t1 = t_range
    step = abs(bundle.base_map.time_step)
    rng = np.random.default_rng(seed)
    ts = rng.uniform(t0, t1, 200)
    xs = rng.uniform(-eps, eps, (200, d))
    es = rng.normal(size=(200, bundle.fiber_dim))
    k, alpha = fiber_rates(bundle, ts, xs, es)
    if k.max() >= 1:
        raise ContractionViolated(f"fiber expansion {k.max():.3f} >= 1")
    if d and (k * alpha ** r).max() >= 1:
        raise ContractionViolated(f"sup k alpha^r = {(k * alpha ** r).max():.3f} >= 1")
    if d:
        # overflow: boundary points must map outside the closed chart
        corners = rng.uniform(-eps, eps, (200, d))
        axis = rng.integers(0, d, 200)
        corners[np.arange(200), axis] = np.where(rng.random(200) < 0.5, -eps, eps)
        _, img = bundle.base_map(ts, corners)
        if not np.all(np.abs(img).max(axis=1) > eps):
            raise ValueError("base map does not overflow the chart")
    fmap = bundle.total_map()
    if fmap.time_step < 0:
        t_nodes = uniform_t_grid(t0, t1 + budget * step, step)
    else:
        t_nodes = uniform_t_grid(t0 - budget * step, t1, step)
    base_nodes = [np.linspace(-eps, eps, n_base)] * d
    sigma = SectionGrid.zeros(t_nodes, base_nodes, bundle.fiber_dim, interpolation=interpolation)
    result, _ = iterate_graph_transform(fmap, sigma, t_range, tol, budget, None, n_samples, seed)
    out = result.section
    diff = out
    if reference is not None:
        t, u = out.node_points()
        ref = np.asarray(reference(t, u), dtype=float).reshape(out.values.shape)
        diff = out.with_values(out.values - ref)
    result.c_sigma = diff.rho_constant(weight)
    result.section = out.with_values(out.values, c_sigma=result.c_sigma)
    result.extras.update({"k_max": float(k.max()),
                          "k_alpha_r_max": float((k * alpha ** r).max()) if d else float(k.max())})
    return result


# --------------------------------------------------------------------------
# decay fits


@dataclass
class DecayFit:
    C: float
    alpha_fit: float


def fit_decay_rate(sigma, family="power_law", t_range=None, b_derivative=False):
    """Fit ``sup_u |sigma(t, u)| ~ C t^-alpha`` by least squares in log-log.

    With ``b_derivative=True`` the fit is applied to ``t d_t sigma`` (central
    differences on the grid), the quantity controlling b-regularity.
    A vanishing section gives ``DecayFit(0, nan)``; fewer than 10 nonzero
    slices raise :class:`AllZero`.
    """
    if family != "power_law":
        raise ValueError("only power law fits are supported")
    t = sigma.valid_t
    vals = sigma.valid_values
    if b_derivative:
        vals = t[1:-1].reshape((-1,) + (1,) * (vals.ndim - 1)) * (vals[2:] - vals[:-2]) \
            / (t[2:] - t[:-2]).reshape((-1,) + (1,) * (vals.ndim - 1))
        t = t[1:-1]
    sup = np.linalg.norm(vals, axis=-1).reshape(len(t), -1).max(axis=1)
    sel = np.ones(len(t), dtype=bool)
    if t_range is not None:
        sel = (t >= t_range[0] - 1e-9) & (t <= t_range[1] + 1e-9)
    sel &= (t > 0)
    nonzero = sel & (sup > 0)
    if not nonzero.any():
        return DecayFit(0.0, float("nan"))
    if nonzero.sum() < 10:
        raise AllZero(f"only {nonzero.sum()} nonzero slices, need 10")
    logt, logs = np.log(t[nonzero]), np.log(sup[nonzero])
    slope, _ = np.polyfit(logt, logs, 1)
    alpha = -slope
    c = float((sup[nonzero] * t[nonzero] ** alpha).max())
    return DecayFit(c, float(alpha))
