"""Exception types raised by the transport engine and its checks."""


class GeometryError(Exception):
    """Base class for every error raised by this package."""


class DomainError(GeometryError, ValueError):
    """A parameter or base point lies outside the domain of a path, family or chart."""


class ArgumentError(GeometryError, ValueError):
    """Malformed arguments (bad indices, missing table entries, short sequences)."""


class NumericError(GeometryError, ArithmeticError):
    """Non-finite coefficients or ill-conditioned frames."""


class ConfigurationError(GeometryError, ValueError):
    """The provider or bundle does not support the requested operation."""


class NotFlatError(GeometryError):
    """Raised by the flat-frame builder when two routes disagree.

    The offending defect and route names are kept on the instance.
    """

    def __init__(self, message, defect, routes):
        super().__init__(message)
        self.defect = defect
        self.routes = routes
