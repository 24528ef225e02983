"""Exception hierarchy shared by all modules."""


class CaccError(Exception):
    """Base class for package errors."""


class ValidationError(CaccError, ValueError):
    """Invalid input or configuration.

    ``path`` holds the dotted config field path when the error comes from a
    configuration file, so the CLI can report where the problem is.
    """

    def __init__(self, message, path=None):
        self.path = path
        if path:
            message = f"{path}: {message}"
        super().__init__(message)


class DomainError(ValidationError):
    """Argument outside the mathematical domain of a formula."""


class NumericalError(CaccError, ArithmeticError):
    """A numerical routine failed (no convergence, negative discriminant...)."""


class IntegrityError(CaccError, KeyError):
    """A lookup table is missing an entry it is required to contain."""


class CollisionError(CaccError, RuntimeError):
    """Two vehicles collided during a simulation run."""

    def __init__(self, message, time=None, vehicle=None):
        self.time = time
        self.vehicle = vehicle
        super().__init__(message)
