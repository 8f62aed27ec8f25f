"""Exception types shared across the package."""


class VmpfcError(Exception):
    """Base class for all package-specific errors."""


class ContractViolation(VmpfcError):
    """An argument failed a documented precondition (shape, range, finiteness)."""


class MeanViolation(VmpfcError):
    """A field that must be mean-free is not.  Carries the measured mean."""

    def __init__(self, message: str, mean_value: float):
        super().__init__(message)
        self.mean_value = float(mean_value)


class SingularOperator(VmpfcError):
    """A Fourier symbol used as a solver denominator vanishes or changes sign."""


class ShiftTooSmall(VmpfcError):
    """An auxiliary-variable shift left a radicand or logarithm argument nonpositive."""


class ScalingError(VmpfcError):
    """An auxiliary scalar left its admissible range (nonpositive or non-finite)."""


class SolvabilityError(VmpfcError):
    """A rank-one solve denominator came out nonpositive."""


class ConfigError(VmpfcError):
    """Invalid configuration input.  Message names the offending key."""


class SnapshotFormatError(VmpfcError):
    """A series or snapshot file on disk does not match the documented layout."""
