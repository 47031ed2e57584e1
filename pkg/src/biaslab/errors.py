"""Exception types shared across the package.

Configuration problems (bad proportions, malformed experiment settings) raise
:class:`ConfigError`; breakdowns detected while computing (divergent iterates,
singular integrals, densities that cannot be normalised) raise subclasses of
:class:`NumericalFailure`.  The command-line driver maps the two families to
distinct exit codes.
"""
from __future__ import annotations


class ConfigError(ValueError):
    """Invalid user-supplied configuration.

    Parameters
    ----------
    errors : list of str
        One message per violated field.  All violations found during
        validation are collected before raising so the user sees the full
        list at once.
    """

    def __init__(self, errors: list[str] | str):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class LossConfigError(ConfigError):
    """A loss family was assembled from inconsistent pieces."""


class NumericalFailure(RuntimeError):
    """Base class for failures detected while computing."""


class DivergenceError(NumericalFailure):
    """An iterate left the finite trust region.

    Attributes
    ----------
    step : int
        First step index at which the iterate was non-finite or beyond the
        divergence guard.
    """

    def __init__(self, step: int, message: str | None = None):
        self.step = int(step)
        super().__init__(message or f"iterate diverged at step {self.step}")


class SingularIntegralError(NumericalFailure):
    """A reciprocal-slope integral failed to converge as the cutoff shrank."""


class AssumptionError(NumericalFailure):
    """A closed-form ratio was requested for a loss violating its geometry.

    The message names the violated identity so callers can report it.
    """


class NormalizationError(NumericalFailure):
    """A stationary density could not be normalised on the working domain."""
