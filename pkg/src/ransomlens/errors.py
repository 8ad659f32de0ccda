"""Exception types shared across the package."""

from __future__ import annotations


class RansomLensError(Exception):
    """Base class for every error raised by this package."""


class MalformedRow(RansomLensError):
    def __init__(self, line_no: int, reason: str = ""):
        self.line_no = line_no
        self.reason = reason
        msg = f"malformed row at line {line_no}"
        super().__init__(f"{msg}: {reason}" if reason else msg)


class SchemaMismatch(RansomLensError):
    pass


class KeyViolation(RansomLensError):
    pass


class OutOfRange(RansomLensError):
    pass


class MissingEntropy(RansomLensError):
    pass


class DegenerateData(RansomLensError):
    pass


class DimensionMismatch(RansomLensError):
    pass


class LengthMismatch(RansomLensError):
    pass


class InvalidConfig(RansomLensError):
    pass
