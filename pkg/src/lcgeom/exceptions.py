"""Exception types raised across the package."""


class LcgeomError(Exception):
    """Base class for all package errors."""


class DimensionError(LcgeomError, ValueError):
    """Array shapes or ambient dimensions do not match."""


class InvalidFunctionError(LcgeomError, ValueError):
    """A function description violates a representation invariant."""


class IllConditionedError(LcgeomError, ValueError):
    """A linear map is singular or too badly conditioned to invert."""


class EmptySetError(LcgeomError, ValueError):
    """A requested level set or feasible region is empty."""


class DegenerateSetError(LcgeomError, ValueError):
    """A convex set has empty interior where a body was required."""


class SolverError(LcgeomError, RuntimeError):
    """An LP or convex subproblem failed to produce a certified answer."""


class NotPositiveDefiniteError(LcgeomError, ValueError):
    """A matrix that must be positive definite is not."""


class HypothesisError(LcgeomError, ValueError):
    """The hypothesis of an inequality check could not be verified."""


class ConfigError(LcgeomError, ValueError):
    """An experiment configuration is malformed."""
