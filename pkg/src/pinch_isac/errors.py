"""Exception types raised across the package."""


class PinchIsacError(Exception):
    """Base class for all package errors."""


class ParseError(PinchIsacError):
    """A configuration file could not be parsed."""


class ValidationError(PinchIsacError, ValueError):
    """A configuration or layout violates an invariant.

    The offending field name is kept on ``field``.
    """

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class DegenerateGeometry(PinchIsacError, ValueError):
    """An evaluation point coincides with an antenna."""


class DegeneratePrior(PinchIsacError, ValueError):
    """A prior variance is not strictly positive."""


class UnsupportedOrder(PinchIsacError, ValueError):
    """Quadrature order outside the supported range."""


class IllConditioned(PinchIsacError, ArithmeticError):
    """The Bayesian Fisher information matrix is numerically singular."""


class StaleCache(PinchIsacError, RuntimeError):
    """An element-wise cache was used with a layout it was not built for."""


class InfeasibleStart(PinchIsacError, ValueError):
    """The initial layout violates the multicast rate requirement."""


class NotConverged(PinchIsacError, RuntimeError):
    """An iterative design hit its iteration caps while still infeasible."""


class DoesNotFit(PinchIsacError, ValueError):
    """The requested number of antennas cannot fit on the waveguide."""


class PlacementClamped(UserWarning):
    """A closed-form position fell outside the waveguide and was clamped."""
