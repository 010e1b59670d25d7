from __future__ import annotations

import re
from dataclasses import dataclass

from ..diagnostics import CompileError, SourceSpan, error

KEYWORDS = frozenset(
    {
        "device_type",
        "robot",
        "kinematics",
        "device",
        "control_collection",
        "control_interface",
        "cartesian_control_interface",
        "wbc_interface",
        "cascade",
        "push",
        "joints",
        "config",
        "priority",
        "weights",
        "initial_joint_weights",
        "control_mode",
        "frames",
    }
)

PUNCTUATION = {
    "->": "ARROW",
    "{": "LBRACE",
    "}": "RBRACE",
    "[": "LBRACKET",
    "]": "RBRACKET",
    "(": "LPAREN",
    ")": "RPAREN",
    ",": "COMMA",
    ":": "COLON",
    ".": "DOT",
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>\#[^\n]*)
  | (?P<number>[-+]?(?:\d+\.\d*|\d+)(?:[eE][-+]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<punct>->|[{}\[\](),:.])
    """,
    re.VERBOSE,
)

_ESCAPES = {"n": "\n", "t": "\t", '"': '"', "\\": "\\"}


@dataclass(frozen=True)
class Token:
    kind: str  # KEYWORD, IDENT, STRING, NUMBER, EOF or a punctuation name
    value: str | float
    span: SourceSpan

    def describe(self) -> str:
        if self.kind == "EOF":
            return "end of input"
        if self.kind == "STRING":
            return f'string "{self.value}"'
        if self.kind in ("KEYWORD", "IDENT", "NUMBER"):
            return f"{self.kind.lower()} '{self.value}'"
        return f"'{self.value}'"


class _Lines:
    def __init__(self, text: str):
        self.starts = [0] + [m.end() for m in re.finditer("\n", text)]

    def position(self, offset: int) -> tuple[int, int]:
        lo, hi = 0, len(self.starts) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self.starts[mid] <= offset:
                lo = mid
            else:
                hi = mid - 1
        return lo + 1, offset - self.starts[lo] + 1


def _unescape(body: str) -> str:
    return re.sub(r"\\(.)", lambda m: _ESCAPES.get(m.group(1), m.group(1)), body)


def span_at(lines: _Lines, file: str, start: int, end: int) -> SourceSpan:
    l0, c0 = lines.position(start)
    l1, c1 = lines.position(end)
    return SourceSpan(file, l0, c0, l1, c1, start, end)


def tokenize(text: str, file: str = "<input>", keywords: frozenset[str] = KEYWORDS) -> list[Token]:
    """Split ``text`` into tokens; whitespace and ``#`` comments are dropped.

    Illegal characters are collected and raised together as a
    :class:`CompileError`.
    """
    lines = _Lines(text)
    tokens: list[Token] = []
    problems = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            if text[pos] == '"':
                eol = text.find("\n", pos)
                eol = len(text) if eol < 0 else eol
                problems.append(error("unterminated-string", "unterminated string literal", span_at(lines, file, pos, eol)))
                pos = eol
                continue
            problems.append(
                error("illegal-character", f"illegal character {text[pos]!r}", span_at(lines, file, pos, pos + 1))
            )
            pos += 1
            continue
        kind = m.lastgroup
        lexeme = m.group()
        span = span_at(lines, file, m.start(), m.end())
        pos = m.end()
        if kind in ("ws", "comment"):
            continue
        if kind == "number":
            # "1." followed by an identifier is a path, not a float
            if lexeme.endswith(".") and pos < len(text) and (text[pos].isalpha() or text[pos] == "_"):
                lexeme = lexeme[:-1]
                pos -= 1
                span = span_at(lines, file, m.start(), pos)
            tokens.append(Token("NUMBER", float(lexeme), span))
        elif kind == "ident":
            tokens.append(Token("KEYWORD" if lexeme in keywords else "IDENT", lexeme, span))
        elif kind == "string":
            tokens.append(Token("STRING", _unescape(lexeme[1:-1]), span))
        else:
            tokens.append(Token(PUNCTUATION[lexeme], lexeme, span))
    if problems:
        raise CompileError(problems)
    return tokens
