from __future__ import annotations

from dataclasses import dataclass, fields

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


@dataclass
class GciNetError(Exception):
    code: str
    message: str
    exit_code: int = EXIT_DATA

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"

    def to_detail(self) -> dict:
        return {"code": self.code, "message": self.message}

    def __reduce__(self):
        # Worker processes hand errors back by pickling.
        return (self.__class__, tuple(getattr(self, f.name) for f in fields(self)))


@dataclass
class UsageError(GciNetError):
    exit_code: int = EXIT_USAGE


@dataclass
class DataError(GciNetError):
    exit_code: int = EXIT_DATA


@dataclass
class FormatError(GciNetError):
    """Binary container problems: bad magic, version, checksum."""

    exit_code: int = EXIT_DATA


@dataclass
class ConfigConflictError(GciNetError):
    exit_code: int = EXIT_USAGE


@dataclass
class NumericalError(GciNetError):
    exit_code: int = EXIT_NUMERICAL
    operator: str | None = None
    batch_index: int | None = None

    def to_detail(self) -> dict:
        detail = super().to_detail()
        if self.operator:
            detail["operator"] = self.operator
        if self.batch_index is not None:
            detail["batch_index"] = self.batch_index
        return detail
