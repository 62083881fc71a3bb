class InvalidParameter(ValueError):
    """A parameter lies outside the range an operation accepts."""


class InstanceFormatError(ValueError):
    """An instance or clustering file could not be parsed or is malformed."""


class GuaranteeViolation(RuntimeError):
    """A strict-mode precondition of the decomposition failed at run time."""


class EmptyRadiusSet(RuntimeError):
    """The admissible radius set has zero measure, so no radius can be drawn."""
