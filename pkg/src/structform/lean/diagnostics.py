"""Lean checker message parsing and error-kind normalization."""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum


class ErrorKind(str, Enum):
    SYNTAX_ERROR = "syntax_error"
    TYPE_MISMATCH = "type_mismatch"
    FAILED_TO_SYNTHESIZE = "failed_to_synthesize"
    INVALID_FIELD = "invalid_field"
    UNKNOWN_IDENTIFIER = "unknown_identifier"
    UNEXPECTED_TOKEN = "unexpected_token"
    UNKNOWN_CONSTANT = "unknown_constant"
    UNCLASSIFIED = "unclassified"
    MISSING_DEFINITION = "missing_definition"
    TIMEOUT = "timeout"
    NO_GOALS = "no_goals"
    APPLY_FAILED = "apply_failed"
    INCOMPLETE_PROOF = "incomplete_proof"


@dataclass(frozen=True)
class Diagnostic:
    file: str
    line: int
    col: int
    severity: str  # "error" | "warning"
    message: str
    kind: ErrorKind
    decl: str | None = None

    def __post_init__(self) -> None:
        if self.line < 1 or self.col < 0:
            raise ValueError(f"bad position {self.line}:{self.col}")
        if not self.message:
            raise ValueError("empty diagnostic message")
        if self.severity not in ("error", "warning"):
            raise ValueError(f"bad severity {self.severity!r}")

    @property
    def is_error(self) -> bool:
        return self.severity == "error"

    def to_dict(self) -> dict:
        return {
            "file": self.file,
            "line": self.line,
            "col": self.col,
            "severity": self.severity,
            "message": self.message,
            "kind": self.kind.value,
            "decl": self.decl,
        }

    @classmethod
    def from_dict(cls, d: dict) -> Diagnostic:
        return cls(d["file"], d["line"], d["col"], d["severity"], d["message"],
                   ErrorKind(d["kind"]), d.get("decl"))


# Ordered: first hit wins. Patterns run against the lowercased message.
# unexpected_token precedes syntax_error, and the implicit-argument form of
# "synthesize" precedes the generic failed_to_synthesize.
KIND_RULES: list[tuple[ErrorKind, re.Pattern[str]]] = [
    (ErrorKind.TIMEOUT, re.compile(r"deterministic\) timeout|maximum number of heartbeats|timed out|\btimeout\b")),
    (ErrorKind.UNEXPECTED_TOKEN, re.compile(r"unexpected token")),
    (ErrorKind.SYNTAX_ERROR, re.compile(
        r"^unexpected\b|^expected\b|unterminated|invalid 'end'|missing '?end|"
        r"^invalid syntax|parse error|syntax error|^unknown command|mismatched|unbalanced")),
    (ErrorKind.TYPE_MISMATCH, re.compile(
        r"don't know how to synthesize implicit argument|don't know how to synthesize placeholder|"
        r"type mismatch|has type[\s\S]*but is expected to have type")),
    (ErrorKind.FAILED_TO_SYNTHESIZE, re.compile(r"failed to synthesize")),
    (ErrorKind.INVALID_FIELD, re.compile(r"invalid field|invalid projection")),
    (ErrorKind.UNKNOWN_CONSTANT, re.compile(r"unknown constant")),
    (ErrorKind.UNKNOWN_IDENTIFIER, re.compile(r"unknown identifier|unknown namespace")),
    (ErrorKind.MISSING_DEFINITION, re.compile(r"fields missing|missing definition|no default value for field")),
    (ErrorKind.NO_GOALS, re.compile(r"no goals")),
    (ErrorKind.APPLY_FAILED, re.compile(r"tactic 'apply' failed|apply failed")),
    (ErrorKind.INCOMPLETE_PROOF, re.compile(r"unsolved goals|incomplete proof")),
]


def normalize_error(message: str) -> ErrorKind:
    if not message:
        raise ValueError("empty message")
    text = message.strip().lower()
    for kind, pat in KIND_RULES:
        if pat.search(text):
            return kind
    return ErrorKind.UNCLASSIFIED


LINE_RE = re.compile(r"^(?P<file>[^\s:][^:]*):(?P<line>\d+):(?P<col>\d+): (?P<sev>error|warning|info): ?(?P<msg>.*)$")


def parse_with_report(raw: str) -> tuple[list[Diagnostic], int]:
    """Parse checker output; also return how many leading lines were skipped.

    ``info`` messages (``#check`` output and the like) match the grammar but are
    dropped together with their continuation lines.
    """
    out: list[Diagnostic] = []
    skipped = 0
    cur: dict | None = None
    in_info = False

    def flush() -> None:
        if cur is not None:
            msg = "\n".join(cur["lines"]).rstrip()
            if not msg:
                msg = "(empty message)"
            out.append(Diagnostic(cur["file"], cur["line"], cur["col"], cur["sev"],
                                  msg, normalize_error(msg)))

    for line in raw.splitlines():
        m = LINE_RE.match(line)
        if m:
            flush()
            cur = None
            in_info = m["sev"] == "info"
            if not in_info:
                cur = {"file": m["file"], "line": max(int(m["line"]), 1), "col": int(m["col"]),
                       "sev": m["sev"], "lines": [m["msg"]]}
        elif cur is not None:
            cur["lines"].append(line)
        elif not in_info and line.strip():
            skipped += 1
    flush()
    return out, skipped


def parse_diagnostics(raw: str) -> list[Diagnostic]:
    return parse_with_report(raw)[0]
