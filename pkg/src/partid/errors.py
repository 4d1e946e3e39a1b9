"""Exception hierarchy shared across the package.

Everything raised deliberately derives from PartidError so callers (and the
CLI exit-code mapping) can distinguish our failures from genuine bugs.
"""


class PartidError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(PartidError):
    """A mean, point, or slope lies outside the open domain it must inhabit."""


class DegenerateInstance(PartidError):
    """The problem instance is ill-posed: a mean sits on the partition
    boundary, a divergence target is zero where positivity is required,
    or constraint normals are parallel."""


class InfeasibleAlternative(PartidError):
    """The alternative region is empty inside the mean domain."""


class UnsupportedCase(PartidError):
    """The partition/side combination is outside what the solvers cover."""


class NumericalError(PartidError):
    """An iterative routine failed to converge within its iteration budget."""


class ConfigError(PartidError):
    """A configuration document failed parsing or validation."""
