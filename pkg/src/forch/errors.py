"""Exception hierarchy shared by every module."""


class ForchError(Exception):
    """Base class for all package errors."""


class DomainError(ForchError, ValueError):
    """An argument lies outside the set where the operation is defined."""


class ShapeError(ForchError, ValueError):
    """An object does not have the structure an operation requires."""


class GeometryError(ForchError, ValueError):
    """Inconsistent radii, shells or grids."""


class ConfigurationError(ForchError, ValueError):
    """Missing or malformed configuration."""


class NumericError(ForchError, ArithmeticError):
    """A numerical procedure failed to converge or lost accuracy.

    Parameters
    ----------
    message : str
        Human readable description.
    state : dict, optional
        Last valid state of the procedure, for post-mortem inspection.
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = dict(state or {})


class TailNotResolved(NumericError):
    """The monotone tail of a steady profile could not be identified."""


class SingularPermeability(NumericError):
    """A relative permeability vanishes where a pressure integral needs it."""
