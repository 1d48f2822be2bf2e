"""Exception types shared across the package."""


class MpqssError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(MpqssError):
    """Invalid configuration value; ``field`` is the dotted path of the offender."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class OrderingError(MpqssError):
    """A sender announced basis bits before every receiver acknowledged reception."""


class ProtocolStateError(MpqssError):
    """A protocol step was invoked out of order (e.g. key extraction before the check passed)."""


class DecodeFailure(MpqssError):
    """Syndrome is not in the correctable set (error weight exceeds the code radius)."""


class KeyMaterialError(MpqssError):
    """One-time-pad discipline violated: key too short, or reuse attempted."""


class TranscriptParseError(MpqssError):
    """Malformed transcript text."""

    def __init__(self, line_no: int, message: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")
