"""Exception hierarchy shared by all greenmeter modules."""


class GreenMeterError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(GreenMeterError):
    """Inconsistent or out-of-contract configuration (steps, durations, sizes)."""


class DataError(GreenMeterError):
    """Non-finite, negative, or otherwise malformed in-memory data."""


class DomainError(GreenMeterError):
    """Argument outside the function's documented domain."""


class OutOfOrderError(GreenMeterError):
    """Epochs arrived non-monotonically."""


class InvalidRangeError(GreenMeterError):
    """Query window with t0 > t1."""


class FormatError(GreenMeterError):
    """Malformed serialized input. Carries the offending line and path when known."""

    def __init__(self, message, *, line=None, path=None):
        self.line = line
        self.path = path
        if path is not None and line is not None:
            where = f"{path}:{line}: "
        elif path is not None:
            where = f"{path}: "
        elif line is not None:
            where = f"line {line}: "
        else:
            where = ""
        super().__init__(where + message)


class DuplicateSampleError(FormatError):
    """Same (metric, epoch) appeared twice in one document."""


class InvalidMarksError(GreenMeterError):
    """Experiment marks with end before start."""


class EstimationError(GreenMeterError):
    """Static power estimation had too little idle data."""


class ExtractionError(GreenMeterError):
    """Feature extraction produced no aligned samples."""


class FitError(GreenMeterError):
    """Model fitting preconditions violated (sample or class counts)."""


class UsageError(GreenMeterError):
    """API used against its documented contract."""


class ScheduleValidationError(GreenMeterError):
    """Schedule violates capacity or horizon. Lists the violated slots."""

    def __init__(self, message, *, violated_slots=()):
        self.violated_slots = tuple(violated_slots)
        if self.violated_slots:
            message += f" (slots {list(self.violated_slots)})"
        super().__init__(message)


class SizeError(GreenMeterError):
    """Instance too large for the exhaustive solver."""


class ConflictError(GreenMeterError):
    """Store already holds an experiment with this id."""


class StorageError(GreenMeterError):
    """Store root unreadable, missing entry, or I/O failure."""


class VersionError(GreenMeterError):
    """Serialized document carries an unknown format version tag."""
