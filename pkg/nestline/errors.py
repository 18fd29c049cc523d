"""
Exception hierarchy for nestline.

Every error carries the exit code the command line reports for it:
2 for usage and validation problems, 1 for runtime failures.
"""


class NestlineError(Exception):
    """Base class for all nestline errors."""

    exit_code = 1


# Circuit documents and circuit construction

class CircuitError(NestlineError):
    exit_code = 2


class CircuitSyntaxError(CircuitError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class CircuitSchemaError(CircuitError):
    pass


class DuplicateQubitError(CircuitError):
    pass


class OperandCollisionError(CircuitError):
    pass


class UnknownGateKindError(CircuitError):
    pass


class MissingBoundaryError(CircuitError):
    pass


class EmptyScheduleError(CircuitError):
    pass


class ErrorModelError(CircuitError):
    pass


class InvalidDistanceError(CircuitError):
    pass


# Nests

class NestError(NestlineError):
    pass


class InvalidTQECCircuitError(NestError):
    """A single error term produced more than two detection events in one class."""


class UnknownBoundaryError(NestError):
    exit_code = 2


class UnknownFormatError(NestError):
    exit_code = 2


class NestFormatError(NestError):
    exit_code = 2


# Structural queries

class AnalysisError(NestlineError):
    pass


class BoundariesDisconnectedError(AnalysisError):
    pass


class UnreachableError(AnalysisError):
    pass


# Fault enumeration

class EnumerationError(NestlineError):
    pass


class WindowExhaustedError(EnumerationError):
    """The search reached rounds whose sticks are truncated by the window edge."""


class DistanceMismatchError(EnumerationError):
    pass


# Fitting

class FitError(NestlineError):
    exit_code = 2


class MissingDistanceError(FitError):
    pass


# Decoding

class DecodingError(NestlineError):
    pass
