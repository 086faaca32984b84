"""Discretized sections over a (time x base) tensor grid.

A section is stored by its values at the nodes ``t_nodes x base_nodes`` and
is interpolated linearly in ``t`` and by cubic splines (or linearly) in the
base coordinates.  Only the nodes between ``window[0]`` and ``window[1]``
(inclusive indices) hold valid data; reading outside raises
:class:`~nhtrap.errors.WindowExhausted`.
"""

import csv
import io
import json
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline, RegularGridInterpolator

from .errors import OutsideChart, WindowExhausted

FORMAT_TAG = "nhtrap-section/1"
_NODE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class SectionGrid:
    t_nodes: np.ndarray
    base_nodes: tuple
    values: np.ndarray
    interpolation: str = "cubic"
    window: Optional[tuple] = None
    c_sigma: Optional[float] = None

    def __post_init__(self):
        t = np.asarray(self.t_nodes, dtype=float)
        if t.ndim != 1 or len(t) < 1 or np.any(np.diff(t) <= 0):
            raise ValueError("t_nodes must be strictly increasing")
        base = tuple(np.asarray(b, dtype=float) for b in self.base_nodes)
        for b in base:
            if b.ndim != 1 or len(b) < 2 or np.any(np.diff(b) <= 0):
                raise ValueError("base node vectors must be strictly increasing")
        vals = np.array(self.values, dtype=float)
        shape = (len(t),) + tuple(len(b) for b in base)
        if vals.shape[:-1] != shape:
            raise ValueError(f"values have shape {vals.shape}, grid needs {shape} + (fiber,)")
        if not np.all(np.isfinite(vals)):
            raise ValueError("section values must be finite")
        if self.interpolation not in ("cubic", "linear"):
            raise ValueError("interpolation must be 'cubic' or 'linear'")
        window = (0, len(t) - 1) if self.window is None else tuple(int(i) for i in self.window)
        if not 0 <= window[0] <= window[1] < len(t):
            raise WindowExhausted(f"empty or invalid window {window}")
        vals.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "t_nodes", t)
        object.__setattr__(self, "base_nodes", base)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "window", window)

    @classmethod
    def zeros(cls, t_nodes, base_nodes, fiber_dim, **kwargs):
        shape = (len(t_nodes),) + tuple(len(b) for b in base_nodes) + (fiber_dim,)
        return cls(t_nodes, tuple(base_nodes), np.zeros(shape), **kwargs)

    @classmethod
    def from_function(cls, func, t_nodes, base_nodes, fiber_dim, **kwargs):
        """Sample ``func(t, u) -> (N, fiber_dim)`` at every node."""
        grid = cls.zeros(t_nodes, base_nodes, fiber_dim, **kwargs)
        t, u = grid.node_points()
        vals = np.asarray(func(t, u), dtype=float).reshape(grid.values.shape)
        return replace(grid, values=vals)

    # --- shape information -------------------------------------------------

    @property
    def base_dim(self):
        return len(self.base_nodes)

    @property
    def fiber_dim(self):
        return self.values.shape[-1]

    @property
    def base_shape(self):
        return tuple(len(b) for b in self.base_nodes)

    @property
    def valid_t(self):
        lo, hi = self.window
        return self.t_nodes[lo:hi + 1]

    @property
    def valid_values(self):
        lo, hi = self.window
        return self.values[lo:hi + 1]

    @property
    def base_box(self):
        return [(b[0], b[-1]) for b in self.base_nodes]

    def base_points(self):
        """All base nodes as an array ``(n_base, d_U)`` in row-major order."""
        if not self.base_nodes:
            return np.zeros((1, 0))
        mesh = np.meshgrid(*self.base_nodes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def node_points(self, valid_only=False):
        """Times and base points of every node, flattened row-major."""
        t = self.valid_t if valid_only else self.t_nodes
        base = self.base_points()
        return np.repeat(t, len(base)), np.tile(base, (len(t), 1))

    def with_values(self, values, window=None, c_sigma=None):
        return replace(self, values=values, window=self.window if window is None else window,
                       c_sigma=c_sigma)

    def restrict(self, t_lo, t_hi):
        """Shrink the valid window to the nodes within ``[t_lo, t_hi]``."""
        lo, hi = self.window
        idx = np.flatnonzero((self.t_nodes >= t_lo - _NODE_TOL) & (self.t_nodes <= t_hi + _NODE_TOL))
        idx = idx[(idx >= lo) & (idx <= hi)]
        if len(idx) == 0:
            raise WindowExhausted(f"no valid nodes in [{t_lo}, {t_hi}]")
        return replace(self, window=(int(idx[0]), int(idx[-1])))

    # --- evaluation ----------------------------------------------------------

    def node_index(self, t):
        """Indices of nodes equal to ``t``; raises if any ``t`` is not a valid node."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        idx = np.clip(np.searchsorted(self.t_nodes, t), 0, len(self.t_nodes) - 1)
        left = np.clip(idx - 1, 0, None)
        idx = np.where(np.abs(self.t_nodes[left] - t) < np.abs(self.t_nodes[idx] - t), left, idx)
        if np.any(np.abs(self.t_nodes[idx] - t) > _NODE_TOL * (1 + np.abs(t))):
            raise ValueError("time is not a grid node")
        self._check_window(idx)
        return idx

    def _check_window(self, idx):
        lo, hi = self.window
        if np.any(idx < lo) or np.any(idx > hi):
            raise WindowExhausted(
                f"read at t-index outside valid window [{self.t_nodes[lo]}, {self.t_nodes[hi]}]")

    def _locate_t(self, t):
        lo, hi = self.window
        t_lo, t_hi = self.t_nodes[lo], self.t_nodes[hi]
        slack = _NODE_TOL * (1 + np.abs(t))
        if np.any(t < t_lo - slack) or np.any(t > t_hi + slack):
            raise WindowExhausted(f"read outside valid window [{t_lo}, {t_hi}]")
        t = np.clip(t, t_lo, t_hi)
        i = np.clip(np.searchsorted(self.t_nodes, t, side="right") - 1, lo, hi)
        j = np.minimum(i + 1, hi)
        span = self.t_nodes[j] - self.t_nodes[i]
        frac = np.where(span > 0, (t - self.t_nodes[i]) / np.where(span > 0, span, 1.0), 0.0)
        snap = frac < 1e-12
        frac = np.where(snap, 0.0, frac)
        return i, j, frac

    @cached_property
    def _spline_coefficients(self):
        # piecewise cubic coefficients along the single base axis,
        # shape (4, n_intervals, n_t, fiber)
        spline = CubicSpline(self.base_nodes[0], self.values, axis=1)
        return spline.c

    def _check_base(self, u):
        for k, b in enumerate(self.base_nodes):
            slack = 1e-12 * (1 + abs(b[-1] - b[0]))
            if np.any(u[:, k] < b[0] - slack) or np.any(u[:, k] > b[-1] + slack):
                raise OutsideChart(f"base coordinate {k} outside [{b[0]}, {b[-1]}]")

    def _slice_values(self, idx, u):
        """Interpolate slices ``idx`` (one per point) at base points ``u``."""
        if self.base_dim == 0:
            return self.values[idx]
        if self.base_dim == 1:
            nodes = self.base_nodes[0]
            x = np.clip(u[:, 0], nodes[0], nodes[-1])
            k = np.clip(np.searchsorted(nodes, x, side="right") - 1, 0, len(nodes) - 2)
            dx = (x - nodes[k])[:, None]
            if self.interpolation == "linear":
                w = dx / (nodes[k + 1] - nodes[k])[:, None]
                return (1 - w) * self.values[idx, k] + w * self.values[idx, k + 1]
            c = self._spline_coefficients[:, k, idx]
            return ((c[0] * dx + c[1]) * dx + c[2]) * dx + c[3]
        out = np.empty((len(idx), self.fiber_dim))
        method = "cubic" if self.interpolation == "cubic" and min(self.base_shape) >= 4 else "linear"
        for i in np.unique(idx):
            sel = idx == i
            interp = RegularGridInterpolator(self.base_nodes, self.values[i], method=method)
            out[sel] = interp(u[sel])
        return out

    def evaluate(self, t, u=None):
        """Section values at times ``t`` (N,) and base points ``u`` (N, d_U)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        u = np.zeros((len(t), 0)) if u is None else np.asarray(u, dtype=float).reshape(len(t), -1)
        self._check_base(u)
        i, j, frac = self._locate_t(t)
        out = self._slice_values(i, u)
        moving = frac > 0
        if moving.any():
            upper = self._slice_values(j[moving], u[moving])
            w = frac[moving][:, None]
            out[moving] = (1 - w) * out[moving] + w * upper
        return out

    __call__ = evaluate

    # --- norms ---------------------------------------------------------------

    def sup_norms(self):
        """Sup over the base of the fiber norm, per valid t-slice."""
        vals = self.valid_values
        norms = np.linalg.norm(vals, axis=-1)
        return norms.reshape(len(norms), -1).max(axis=1)

    def lipschitz_constants(self):
        """Largest slope between adjacent base nodes, per valid t-slice."""
        vals = self.valid_values
        out = np.zeros(len(vals))
        for axis, nodes in enumerate(self.base_nodes, start=1):
            diff = np.linalg.norm(np.diff(vals, axis=axis), axis=-1)
            shape = [1] * diff.ndim
            shape[axis] = len(nodes) - 1
            slope = diff / np.diff(nodes).reshape(shape)
            out = np.maximum(out, slope.reshape(len(vals), -1).max(axis=1))
        return out

    def rho_constant(self, weight):
        """Measured ``C_Sigma``: max over valid slices of (sup and Lipschitz) / rho."""
        rho = weight(self.valid_t)
        return float(max((self.sup_norms() / rho).max(), (self.lipschitz_constants() / rho).max()))

    def is_rho_bounded(self, weight, c_sigma):
        return self.rho_constant(weight) <= c_sigma

    def distance(self, other):
        """Sup distance between two sections on the common valid nodes."""
        lo = max(self.valid_t[0], other.valid_t[0])
        hi = min(self.valid_t[-1], other.valid_t[-1])
        a = self.restrict(lo, hi)
        b = other.restrict(lo, hi)
        if a.valid_values.shape != b.valid_values.shape:
            raise ValueError("sections live on different grids")
        return float(np.abs(a.valid_values - b.valid_values).max())

    # --- serialization -------------------------------------------------------

    def header(self):
        return {
            "format": FORMAT_TAG,
            "base_dim": self.base_dim,
            "fiber_dim": self.fiber_dim,
            "n_t": len(self.valid_t),
            "base_shape": list(self.base_shape),
            "interpolation": self.interpolation,
            "c_sigma": self.c_sigma,
        }

    def to_dict(self):
        """JSON-ready dictionary holding the valid window."""
        out = self.header()
        out["t_nodes"] = self.valid_t.tolist()
        out["base_nodes"] = [b.tolist() for b in self.base_nodes]
        out["values"] = self.valid_values.ravel().tolist()
        return out

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data):
        if data.get("format") != FORMAT_TAG:
            raise ValueError("not a serialized section")
        base = tuple(np.asarray(b, dtype=float) for b in data["base_nodes"])
        t = np.asarray(data["t_nodes"], dtype=float)
        shape = (len(t),) + tuple(len(b) for b in base) + (data["fiber_dim"],)
        vals = np.asarray(data["values"], dtype=float).reshape(shape)
        return cls(t, base, vals, interpolation=data["interpolation"], c_sigma=data.get("c_sigma"))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def column_names(self):
        return (["t"] + [f"u{k}" for k in range(self.base_dim)]
                + [f"s{k}" for k in range(self.fiber_dim)])

    def to_csv(self, stream=None):
        """Write a CSV table; ``#`` lines carry the header, then one row per node."""
        own = stream is None
        stream = io.StringIO() if own else stream
        head = self.header()
        head["base_nodes"] = [len(b) for b in self.base_nodes]
        for key, value in head.items():
            stream.write(f"# {key}={json.dumps(value)}\n")
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(self.column_names())
        t, u = self.node_points(valid_only=True)
        vals = self.valid_values.reshape(len(t), -1)
        for row in np.column_stack([t, u, vals]):
            writer.writerow([repr(float(v)) for v in row])
        return stream.getvalue() if own else None

    @classmethod
    def from_csv(cls, text):
        lines = text.splitlines()
        head = {}
        body = []
        for line in lines:
            if line.startswith("# "):
                key, value = line[2:].split("=", 1)
                head[key] = json.loads(value)
            elif line.strip():
                body.append(line)
        if head.get("format") != FORMAT_TAG:
            raise ValueError("not a serialized section")
        rows = np.array([[float(v) for v in r] for r in csv.reader(body[1:])])
        d = head["base_dim"]
        shape = (head["n_t"],) + tuple(head["base_shape"])
        t = rows[:, 0].reshape(shape)[(slice(None),) + (0,) * d] if d else rows[:, 0]
        base = []
        for k in range(d):
            col = rows[:, 1 + k].reshape(shape)
            index = [0] * (d + 1)
            index[k + 1] = slice(None)
            base.append(col[tuple(index)])
        vals = rows[:, 1 + d:].reshape(shape + (head["fiber_dim"],))
        return cls(t, tuple(base), vals, interpolation=head["interpolation"],
                   c_sigma=head.get("c_sigma"))
