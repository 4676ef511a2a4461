"""Exception hierarchy.

Each class carries the process exit code the command line maps it to.
"""


class GDCNetError(Exception):
    exit_code = 1


class ConfigError(GDCNetError, ValueError):
    exit_code = 1


class ParseError(GDCNetError, ValueError):
    exit_code = 2

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class IntegrityError(GDCNetError, ValueError):
    exit_code = 2


class DataError(GDCNetError, ValueError):
    exit_code = 2


class ShapeError(GDCNetError, ValueError):
    exit_code = 1


class DomainError(GDCNetError, ValueError):
    exit_code = 1


class ComparisonError(GDCNetError, ValueError):
    exit_code = 1


class VersionError(GDCNetError):
    exit_code = 2


class NumericError(GDCNetError, FloatingPointError):
    exit_code = 3


class TransportError(GDCNetError, ConnectionError):
    """Network failure talking to the caption service. Safe to retry."""

    exit_code = 4
    retriable = True


class ServiceError(GDCNetError):
    exit_code = 4

    def __init__(self, status, body):
        super().__init__(f"caption service returned HTTP {status}: {body!r}")
        self.status = status
        self.body = body


class ProtocolError(GDCNetError):
    exit_code = 4
