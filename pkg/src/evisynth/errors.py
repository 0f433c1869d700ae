"""Shared exception base for the package.

Every error raised by evisynth derives from EviSynthError and carries a
stable machine-readable ``code`` used by the HTTP service's problem JSON.
"""

from __future__ import annotations


class EviSynthError(Exception):
    """Base class for all evisynth errors."""

    code: str = "error"

    def __init__(self, message: str = "", *, detail: object = None):
        super().__init__(message or self.__class__.__name__)
        self.message = message or self.__class__.__name__
        self.detail = detail

    def problem(self) -> dict:
        """Problem-JSON payload: {code, message, detail}."""
        return {"code": self.code, "message": self.message, "detail": self.detail}
