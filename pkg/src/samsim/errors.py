class SamError(Exception):
    """Base class for simulator errors."""


class ConfigError(SamError):
    pass


class TraceFormatError(SamError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class DeadlockDetected(SamError):
    pass


class PageFault(SamError):
    pass


class UnknownRegion(SamError):
    pass


class AccessDenied(SamError):
    pass


class OutOfMemory(SamError):
    pass


class ReportError(SamError):
    pass
