"""Exception hierarchy shared by all doakit modules."""


class DoaKitError(Exception):
    """Base class for every error raised by doakit."""


class ConfigError(DoaKitError, ValueError):
    pass


class DomainError(DoaKitError, ArithmeticError):
    """An elementary operation was applied outside its domain."""

    def __init__(self, message, box=None):
        super().__init__(message)
        self.box = box


class DegenerateBoxError(DoaKitError, ValueError):
    pass


class ParseError(DoaKitError, ValueError):
    """Expression text could not be parsed; ``position`` is a 0-based offset."""

    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


class InvalidProjection(DoaKitError, ValueError):
    pass


class OriginCoveredError(DoaKitError):
    pass


class StabilizabilityError(DoaKitError):
    pass


class OutOfDomainError(DoaKitError, ValueError):
    pass


class InvarianceViolation(DoaKitError):
    """A simulated state left the certified region."""
