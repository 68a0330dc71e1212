"""
Exception hierarchy for dess_aste

Every failure raised by the package derives from DessError, which keeps the
human-readable message plus the context needed to locate the fault (file and
line, byte offset, layer/head, parameter name, HTTP status).
"""

from typing import Any, Optional


class DessError(Exception):
    """Base exception for dess_aste errors"""

    def __init__(self, message: str, **context: Any):
        self.message = message
        self.context = context
        super().__init__(self.message)

    def __str__(self) -> str:
        if not self.context:
            return self.message
        details = ", ".join(f"{k}={v}" for k, v in self.context.items() if v is not None)
        return f"{self.message} ({details})" if details else self.message


class ParseError(DessError):
    """Line does not match the ASTE grammar"""

    def __init__(
        self,
        message: str,
        offset: int,
        path: Optional[str] = None,
        line_number: Optional[int] = None,
    ):
        self.offset = offset
        self.path = path
        self.line_number = line_number
        super().__init__(message, path=path, line=line_number, offset=offset)


class ValidationError(DessError):
    """Well-formed input with invalid content (bad indices, mismatched lengths)"""

    def __init__(self, message: str, path: Optional[str] = None, line_number: Optional[int] = None):
        self.path = path
        self.line_number = line_number
        super().__init__(message, path=path, line=line_number)


class NumericalFault(DessError):
    """Non-finite activation or gradient"""

    def __init__(self, message: str, location: str):
        self.location = location
        super().__init__(message, location=location)


class ShapeFault(DessError):
    """Tensor shapes or indices that cannot be combined"""


class ProtocolFault(DessError):
    """Train/dev/test isolation violated"""


class FetchError(DessError):
    """Dataset download failed"""

    def __init__(self, message: str, status_code: Optional[int] = None, url: Optional[str] = None):
        self.status_code = status_code
        self.url = url
        super().__init__(message, status_code=status_code, url=url)
