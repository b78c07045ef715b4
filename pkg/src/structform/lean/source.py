"""Line-keyword indexing of Lean files.

No real parsing happens here: a declaration starts at a column-0 keyword
line and runs until the next one. That is enough to attribute diagnostics
and locate ``sorry`` placeholders per declaration.
"""

from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass
from typing import Iterable, Sequence

from .diagnostics import Diagnostic
from .lexer import IDENT_RE, Masked, mask

DEFINITION = "definition"
THEOREM = "theorem"
INSTANCE = "instance"
PREAMBLE = "preamble"

_MODIFIERS = r"(?:@\[[^\]]*\]\s*)?(?:(?:private|protected|noncomputable|partial|unsafe|nonrec|scoped)\s+)*"
_DECL_KW = {
    "def": DEFINITION, "abbrev": DEFINITION, "class": DEFINITION, "structure": DEFINITION,
    "inductive": DEFINITION, "theorem": THEOREM, "lemma": THEOREM, "example": THEOREM,
    "instance": INSTANCE,
}
_PRE_KW = ("import", "open", "variable", "universe", "section", "namespace", "end",
           "set_option", "notation", "infix", "infixl", "infixr", "prefix", "postfix",
           "attribute", "#check", "#eval", "#print", "#reduce", "mutual")

KEYWORD_RE = re.compile(
    r"^" + _MODIFIERS +
    r"(?P<kw>(?:local\s+)?(?:notation|infixl?|infixr|prefix|postfix)|"
    + "|".join(sorted(_DECL_KW, key=len, reverse=True)) + "|"
    + "|".join(re.escape(k) for k in _PRE_KW) + r")(?![\w'])"
)


@dataclass(frozen=True)
class DeclSpan:
    name: str
    category: str
    start_line: int  # 1-based, inclusive
    end_line: int    # inclusive
    has_sorry: bool = False
    body_is_proof: bool = False

    def contains(self, line: int) -> bool:
        return self.start_line <= line <= self.end_line

    def text(self, src_lines: Sequence[str]) -> str:
        return "".join(src_lines[self.start_line - 1:self.end_line])

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def classify_line(masked_line: str) -> tuple[str, str] | None:
    """Return (keyword, category) for a top-level keyword line."""
    if not masked_line or masked_line[0].isspace():
        return None
    m = KEYWORD_RE.match(masked_line)
    if not m:
        return None
    kw = re.sub(r"\s+", " ", m["kw"])
    if kw in _DECL_KW:
        return kw, _DECL_KW[kw]
    return kw, PREAMBLE


def scan_sorries(src: str, masked: Masked | None = None) -> list[tuple[int, int]]:
    """(line, col) of each ``sorry`` token in code, 1-based line, 0-based col."""
    m = masked or mask(src)
    sites = []
    for mt in re.finditer(r"(?<![\w'.])sorry(?![\w'!?])", m.text):
        start = mt.start()
        line = m.text.count("\n", 0, start) + 1
        col = start - (m.text.rfind("\n", 0, start) + 1)
        sites.append((line, col))
    return sites


def find_body_delimiter(masked_span: str) -> tuple[int, str] | None:
    """Offset and token of the first depth-0 ``:=`` or ``where`` in a span."""
    depth = 0
    i = 0
    n = len(masked_span)
    while i < n:
        c = masked_span[i]
        if c in "([{⦃⟨":
            depth += 1
        elif c in ")]}⦄⟩":
            depth = max(depth - 1, 0)
        elif depth == 0:
            if masked_span.startswith(":=", i):
                return i, ":="
            if masked_span.startswith("where", i) and _word_at(masked_span, i, 5):
                return i, "where"
            if c == "|" and i > 0 and masked_span[i - 1] == "\n":
                return i, "|"
        i += 1
    return None


def _word_at(s: str, i: int, n: int) -> bool:
    before = s[i - 1] if i > 0 else " "
    after = s[i + n] if i + n < len(s) else " "
    return not (before.isalnum() or before in "_'.") and not (after.isalnum() or after in "_'")


def _decl_name(masked_text: str, kw_end: int, kw: str, line: int) -> str:
    if kw == "example":
        return f"example@{line}"
    rest = masked_text[kw_end:kw_end + 400]
    m = re.match(r"\s*", rest)
    pos = m.end() if m else 0
    idm = IDENT_RE.match(rest, pos)
    if idm and idm.group(0) not in ("where",):
        return idm.group(0)
    return f"{kw}@{line}"


def index_declarations(src: str) -> list[DeclSpan]:
    if not src:
        return []
    m = mask(src)
    lines = src.splitlines(keepends=True)
    mlines = m.text.splitlines(keepends=True)
    offsets = [0]
    for ln in lines:
        offsets.append(offsets[-1] + len(ln))
    sorry_lines = {ln for ln, _ in scan_sorries(src, m)}

    # (start_line, name, category)
    opens: list[tuple[int, str, str]] = []
    for i, ml in enumerate(mlines, start=1):
        hit = classify_line(ml)
        if hit is None:
            if not opens:
                opens.append((i, "", PREAMBLE))
            continue
        kw, cat = hit
        if cat == PREAMBLE:
            if opens and opens[-1][2] == PREAMBLE:
                continue
            opens.append((i, kw, PREAMBLE))
        else:
            kw_end = offsets[i - 1] + KEYWORD_RE.match(ml).end()
            opens.append((i, _decl_name(m.text, kw_end, kw, i), cat))

    spans = []
    for idx, (start, name, cat) in enumerate(opens):
        end = opens[idx + 1][0] - 1 if idx + 1 < len(opens) else len(lines)
        has_sorry = any(start <= s <= end for s in sorry_lines)
        body_is_proof = False
        if cat in (THEOREM, INSTANCE):
            span_masked = "".join(mlines[start - 1:end])
            delim = find_body_delimiter(span_masked)
            if delim is not None:
                if cat == THEOREM:
                    body_is_proof = True
                else:
                    body = span_masked[delim[0]:]
                    body_is_proof = re.search(r"(?<![\w'])(by|sorry)(?![\w'])", body) is not None
        spans.append(DeclSpan(name, cat, start, end, has_sorry, body_is_proof))
    return spans


def attribute_diagnostics(diags: Iterable[Diagnostic], spans: Sequence[DeclSpan]) -> list[Diagnostic]:
    out = []
    for d in diags:
        owner = None
        for s in spans:
            if s.contains(d.line):
                owner = None if s.category == PREAMBLE else s.name
                break
        out.append(dataclasses.replace(d, decl=owner))
    return out


def span_for_line(spans: Sequence[DeclSpan], line: int) -> DeclSpan | None:
    for s in spans:
        if s.contains(line):
            return s
    return None
