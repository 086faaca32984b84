"""Decaying perturbation specifications."""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .weights import Weight


@dataclass(frozen=True)
class PerturbationSpec:
    """``amplitude * t**-alpha * profile(t, x)``.

    ``profile`` is vectorized over a batch ``(t (N,), x (N, d))`` and should
    be bounded by 1 together with its first two derivatives up to the
    constants in ``derivative_bounds``.
    """

    alpha: float
    amplitude: float
    profile: Callable
    derivative_bounds: tuple = (1.0, 1.0)

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.amplitude < 0:
            raise ValueError("amplitude must be non-negative")

    @property
    def weight(self):
        return Weight.power_law(self.alpha)

    def __call__(self, t, x):
        t = np.asarray(t, dtype=float)
        prof = np.asarray(self.profile(t, x), dtype=float)
        scale = self.amplitude * self.weight(t)
        return scale.reshape(scale.shape + (1,) * (prof.ndim - scale.ndim)) * prof

    def check(self, t, x, h=1e-4):
        """Verify the sup and derivative bounds of the profile on samples.

        Returns the measured ``(sup, first, second)`` maxima; raises
        ``ValueError`` if any exceeds its declared bound (with 1% slack for
        the difference quotients).
        """
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float).reshape(len(t), -1)
        sup = float(np.abs(self.profile(t, x)).max())
        first = second = 0.0
        coords = np.column_stack([t, x])
        for k in range(coords.shape[1]):
            e = np.zeros(coords.shape[1])
            e[k] = h
            vals = [np.asarray(self.profile(c[:, 0], c[:, 1:]), dtype=float)
                    for c in (coords + e, coords, coords - e)]
            first = max(first, float(np.abs(vals[0] - vals[2]).max() / (2 * h)))
            second = max(second, float(np.abs(vals[0] - 2 * vals[1] + vals[2]).max() / h ** 2))
        if sup > 1 + 1e-12:
            raise ValueError(f"profile sup {sup:.4f} exceeds 1")
        if first > 1.01 * self.derivative_bounds[0] or second > 1.01 * self.derivative_bounds[1]:
            raise ValueError("profile derivatives exceed the declared bounds")
        return sup, first, second
