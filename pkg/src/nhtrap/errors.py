"""Exception hierarchy.

Every numerical failure raised by the library derives from
:class:`NumericalError`; the class name doubles as the error code written
to CLI manifests.
"""


class NumericalError(Exception):
    """Base class for failures of a numerical procedure."""

    @property
    def code(self):
        return type(self).__name__


class NonFinite(NumericalError):
    """A state or field value became NaN or infinite."""


class StepUnderflow(NumericalError):
    """The integrator step size dropped below the floating point floor."""


class SplittingNotInvariant(NumericalError):
    """A linear map mixes the blocks of a splitting it should preserve."""


class NoContraction(NumericalError):
    """A fixed point iteration was found not to contract."""


class MaxIter(NumericalError):
    """An iteration hit its iteration cap before reaching tolerance."""


class ContractionViolated(NumericalError):
    """A fiber map expands too much for an invariant section to exist."""


class WindowExhausted(NumericalError):
    """A section was read outside its valid time window."""


class NotHyperbolic(NumericalError):
    """Normal hyperbolicity failed at a sampled point of the trapped set."""


class ContractionStalled(NumericalError):
    """The graph transform iteration stopped contracting."""


class SeedInconsistent(NumericalError):
    """A stable manifold seed disagrees with its own preimage."""


class AllZero(NumericalError):
    """A decay fit was requested for an identically vanishing section."""


class OutsideChart(NumericalError):
    """A point lies outside the coordinate chart."""


class Singular(NumericalError):
    """A metric is not invertible at the evaluation point."""


class DegenerateTimeFlow(NumericalError):
    """The Hamilton field has (almost) no time component."""


class NoConvergence(NumericalError):
    """A root solve did not converge."""


class LeftChart(NumericalError):
    """A root solve left the coordinate chart."""


class ComplexEigenvalues(NumericalError):
    """A linearization that should be hyperbolic has complex eigenvalues."""


class SignatureLost(NumericalError):
    """A perturbed metric is no longer Lorentzian."""


class ConfigError(ValueError):
    """Invalid command line configuration."""
