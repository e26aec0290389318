"""Exception types shared across kronscale modules."""


class KronscaleError(Exception):
    """Base class for all kronscale errors."""


class DivisionByZero(KronscaleError):
    pass


class FieldMismatch(KronscaleError):
    pass


class FieldTooSmall(KronscaleError):
    pass


class UnassignedInput(KronscaleError):
    pass


class DegreeBound(KronscaleError):
    pass


class SingleOutputRequired(KronscaleError):
    pass


class ParseError(KronscaleError):
    """Malformed input file; carries a 1-based line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NotSkew(KronscaleError):
    pass


class TooLarge(KronscaleError):
    pass


class GroundOverlap(KronscaleError):
    pass


class ShapeError(KronscaleError):
    pass


class TooManyClasses(KronscaleError):
    pass


class PartitionSizeError(KronscaleError):
    pass


class InternalError(KronscaleError):
    pass


class ProviderError(KronscaleError):
    pass


class DivisibilityError(KronscaleError):
    pass


class ParityError(KronscaleError):
    pass


class CharacteristicError(KronscaleError):
    pass


class BipartitenessError(KronscaleError):
    pass
