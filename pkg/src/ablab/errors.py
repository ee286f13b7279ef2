"""Exception hierarchy shared by all ablab modules."""


class AblabError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(AblabError, ValueError):
    """Malformed arguments: bad shapes, degenerate paths, inconsistent configs."""


class DomainError(AblabError, ValueError):
    """An evaluation point lies where the operation is not defined (e.g. a flux core)."""


class GeometryError(AblabError, ValueError):
    """A point lies on (or numerically too close to) a path."""


class NumericError(AblabError, ArithmeticError):
    """A numerical procedure failed to reach its tolerance."""


class NoFringesError(AblabError):
    """A screen pattern has too little contrast to define a fringe phase."""
