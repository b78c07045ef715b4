"""Comment/string masking for Lean 4 source.

Everything downstream (sorry scanning, keyword detection, rewrite rules)
needs to know which characters are code. ``mask`` blanks out line comments,
nested block comments and string literals while keeping every newline, so
offsets and line numbers survive.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

IDENT_RE = re.compile(r"[^\W\d][\w'!?]*(?:\.[^\W\d][\w'!?]*)*")


@dataclass(frozen=True)
class Masked:
    source: str
    text: str          # same length as source; non-code chars replaced by spaces
    code: bytearray    # 1 where source[i] is code

    def is_code(self, i: int) -> bool:
        return bool(self.code[i])

    def lines(self) -> list[str]:
        return self.text.splitlines(keepends=True)


def mask(src: str) -> Masked:
    n = len(src)
    out = list(src)
    code = bytearray(b"\x01") * n
    i = 0
    depth = 0  # block comment nesting
    while i < n:
        c = src[i]
        if depth:
            if src.startswith("/-", i):
                depth += 1
                _blank(out, code, i, i + 2)
                i += 2
            elif src.startswith("-/", i):
                depth -= 1
                _blank(out, code, i, i + 2)
                i += 2
            else:
                _blank(out, code, i, i + 1)
                i += 1
            continue
        if src.startswith("/-", i):
            depth = 1
            _blank(out, code, i, i + 2)
            i += 2
        elif src.startswith("--", i):
            j = src.find("\n", i)
            j = n if j < 0 else j
            _blank(out, code, i, j)
            i = j
        elif c == '"':
            j = i + 1
            while j < n and src[j] != '"':
                j += 2 if src[j] == "\\" else 1
            j = min(j + 1, n)
            _blank(out, code, i, j)
            i = j
        else:
            i += 1
    return Masked(src, "".join(out), code)


def _blank(out: list[str], code: bytearray, a: int, b: int) -> None:
    for k in range(a, b):
        if out[k] != "\n":
            out[k] = " "
        code[k] = 0


def identifiers(masked_text: str) -> set[str]:
    return set(IDENT_RE.findall(masked_text))


def has_identifier(masked_text: str, name: str) -> bool:
    """True when ``name`` occurs as a whole identifier (dotted names allowed)."""
    pat = r"(?<![\w'!?.])" + re.escape(name) + r"(?![\w'!?])"
    return re.search(pat, masked_text) is not None
