"""Decaying weight functions."""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


@dataclass(frozen=True)
class Weight:
    """A positive decreasing weight ``rho(t)``.

    Families:

    ``power_law``   ``t**-alpha`` (defined for ``t > 0``)
    ``bracket``     ``(1 + t**2)**(-alpha/2)``, the smooth version on all of R
    ``exponential`` ``exp(-alpha t)``
    ``custom``      any callable
    """

    family: str
    alpha: Optional[float] = None
    func: Optional[Callable] = None

    def __post_init__(self):
        if self.family not in ("power_law", "bracket", "exponential", "custom"):
            raise ValueError(f"unknown weight family {self.family!r}")
        if self.family == "custom":
            if self.func is None:
                raise ValueError("custom weights need a function")
        elif self.alpha is None or not self.alpha > 0:
            raise ValueError("alpha must be positive")

    @classmethod
    def power_law(cls, alpha):
        return cls("power_law", float(alpha))

    @classmethod
    def bracket(cls, alpha):
        return cls("bracket", float(alpha))

    @classmethod
    def exponential(cls, alpha):
        return cls("exponential", float(alpha))

    @classmethod
    def custom(cls, func):
        return cls("custom", None, func)

    @classmethod
    def parse(cls, text):
        """Parse ``"power:1"``, ``"bracket:2"`` or ``"exp:0.5"``."""
        names = {"power": "power_law", "power_law": "power_law", "bracket": "bracket",
                 "exp": "exponential", "exponential": "exponential"}
        try:
            name, value = text.split(":")
            return cls(names[name.strip()], float(value))
        except (KeyError, ValueError) as exc:
            raise ValueError(f"cannot parse weight {text!r}") from exc

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.family == "power_law":
            if np.any(t <= 0):
                raise ValueError("power law weights need t > 0")
            return t ** -self.alpha
        if self.family == "bracket":
            return (1.0 + t * t) ** (-0.5 * self.alpha)
        if self.family == "exponential":
            return np.exp(-self.alpha * t)
        return np.asarray(self.func(t), dtype=float)

    def label(self):
        if self.family == "custom":
            return "custom"
        return f"{self.family}:{self.alpha:g}"

    def comparability_constant(self, t_samples, h=1e-4):
        """Sampled ``C_1 = max |rho'| / rho`` by central differences.

        Raises ``ValueError`` when the weight is not positive or not
        non-increasing on the samples.
        """
        t = np.asarray(t_samples, dtype=float)
        vals = self(t)
        if np.any(vals <= 0) or not np.all(np.isfinite(vals)):
            raise ValueError("weight must be positive and finite")
        if np.any(np.diff(vals[np.argsort(t)]) > 0):
            raise ValueError("weight must be non-increasing")
        deriv = (self(t + h) - self(t - h)) / (2 * h)
        return float(np.max(np.abs(deriv) / vals))
