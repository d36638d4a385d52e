"""Exception hierarchy shared by all modules."""


class MicropolarError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(MicropolarError, ValueError):
    """A model parameter violates its admissibility constraint.

    ``field`` names the offending parameter.
    """

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class NoSecondRoot(MicropolarError):
    pass


class StepTooCoarse(MicropolarError):
    pass


class DomainTooShort(MicropolarError):
    pass


class EnvelopeViolated(MicropolarError):
    pass


class BoundViolated(MicropolarError):
    def __init__(self, x: float, message: str):
        super().__init__(f"at x={x:.6g}: {message}")
        self.x = x


class PositivityLost(MicropolarError):
    pass


class CompatibilityViolated(MicropolarError):
    pass


class NonFiniteField(MicropolarError):
    pass


class InsufficientSnapshots(MicropolarError):
    pass


class WindowTooSmall(MicropolarError):
    pass


class NonpositiveNorm(MicropolarError):
    pass


class ConfigParseError(MicropolarError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ConfigValidationError(MicropolarError, ValueError):
    pass
