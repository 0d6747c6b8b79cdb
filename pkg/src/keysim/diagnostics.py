from __future__ import annotations

import enum
from dataclasses import dataclass


class Severity(enum.Enum):
    WARNING = "warning"
    ERROR = "error"


@dataclass(frozen=True)
class Diagnostic:
    severity: Severity
    message: str
    address: int | None = None

    def __str__(self) -> str:
        if self.address is not None:
            return f"{self.address:x}: {self.message}"
        return f"{self.severity.value}: {self.message}"

    @classmethod
    def warning(cls, message: str, address: int | None = None) -> "Diagnostic":
        return cls(Severity.WARNING, message, address)

    @classmethod
    def error(cls, message: str, address: int | None = None) -> "Diagnostic":
        return cls(Severity.ERROR, message, address)
