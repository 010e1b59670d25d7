"""Source spans and diagnostics shared by the frontend and the compiler."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

ERROR = "error"
WARNING = "warning"


@dataclass(frozen=True)
class SourceSpan:
    """Region of a source file; lines and columns are 1-based, offsets 0-based."""

    file: str
    line: int
    column: int
    end_line: int
    end_column: int
    offset: int = 0
    end_offset: int = 0

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"

    def to(self, other: SourceSpan) -> SourceSpan:
        return SourceSpan(
            self.file, self.line, self.column, other.end_line, other.end_column, self.offset, other.end_offset
        )


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    code: str
    message: str
    span: SourceSpan | None = None

    @property
    def is_error(self) -> bool:
        return self.severity == ERROR

    def format(self) -> str:
        where = str(self.span) if self.span is not None else "<unknown>"
        return f"{self.severity} {where} {self.code} {self.message}"


def error(code: str, message: str, span: SourceSpan | None = None) -> Diagnostic:
    return Diagnostic(ERROR, code, message, span)


def warning(code: str, message: str, span: SourceSpan | None = None) -> Diagnostic:
    return Diagnostic(WARNING, code, message, span)


class CompileError(Exception):
    """Raised when a pipeline phase produced error diagnostics."""

    def __init__(self, diagnostics: Iterable[Diagnostic]):
        self.diagnostics = list(diagnostics)
        errors = [d for d in self.diagnostics if d.is_error]
        head = errors[0].format() if errors else "compilation failed"
        more = f" (+{len(errors) - 1} more)" if len(errors) > 1 else ""
        super().__init__(head + more)
