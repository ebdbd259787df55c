"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: ``ParameterError`` and ``DomainError``
are validation failures (exit 2), ``ResourceError`` is exit 3.
"""


class LabError(Exception):
    """Base class for all errors raised by restriction_lab."""


class DomainError(LabError, ValueError):
    """A point lies outside the domain an object is defined on."""


class ParameterError(LabError, ValueError):
    """A parameter violates an operation's precondition."""


class ResolutionError(LabError):
    """Quadrature nodes are too coarse for the requested spatial point."""


class ResourceError(LabError):
    """The request would exceed a memory, node or radius budget."""
