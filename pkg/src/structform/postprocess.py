"""Final clean-up of a generated file and natural-language back-translation.

``harmless_fix`` turns a file with errors into one with none, in three
escalating phases:

1. proof errors: the failing part of a proof body becomes ``sorry``;
2. statement or definition errors: the declaration is commented out together
   with every declaration that (transitively) mentions its name;
3. an LLM rewrite, accepted only if it checks with zero errors and keeps
   every declaration that survived the first two phases.
"""

from __future__ import annotations

import logging
import re
from dataclasses import asdict, dataclass, field

from .lean.checker import Checker, CheckReport
from .lean.diagnostics import Diagnostic
from .lean.lexer import has_identifier, mask
from .lean.source import (DEFINITION, INSTANCE, PREAMBLE, THEOREM, DeclSpan, classify_line, find_body_delimiter,
                          index_declarations, span_for_line)
from .llm_gateway import EmptyCompletion, Gateway, extract_code_block, render_prompt

log = logging.getLogger(__name__)

DEFAULT_FINAL_ATTEMPTS = 2
MAX_RULE_ROUNDS = 8
COMMENT_PREFIX = "-- "


class EmptySource(ValueError):
    pass


@dataclass
class FinalArtifact:
    source: str
    fully_proved: bool
    sorried_decls: list[str]
    commented_out_decls: list[str]
    harmless: bool
    commented_out_categories: dict[str, str] = field(default_factory=dict)
    phases_used: list[str] = field(default_factory=list)
    remaining_errors: int = 0
    llm_attempts: int = 0
    failure: str | None = None

    def __post_init__(self) -> None:
        if self.fully_proved and (self.sorried_decls or self.commented_out_decls or not self.harmless):
            raise ValueError("fully_proved requires no sorries, nothing commented out and zero errors")

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("source")
        return d


# ---------------------------------------------------------------- phase 1

@dataclass(frozen=True)
class _Body:
    delim: int          # offset of the delimiter token in the span text
    start: int          # offset just past the delimiter (and ``by``)
    delim_line: int     # 0-based line within the span holding the delimiter
    kind: str           # "by" | "term" | "where"


def proof_body(span_text: str) -> _Body | None:
    masked = mask(span_text).text
    hit = find_body_delimiter(masked)
    if hit is None or hit[1] == "|":
        return None
    off, tok = hit
    line = masked.count("\n", 0, off)
    if tok == "where":
        return _Body(off, off + len("where"), line, "where")
    after = off + 2
    m = re.match(r"[ \t\n]*by(?![\w'])", masked[after:])
    if m:
        return _Body(off, after + m.end(), line, "by")
    return _Body(off, after, line, "term")


_FIELD_RE = re.compile(r"^([ \t]+)([^\W\d][\w'.]*)\s*:=")


def sorry_span(span_text: str, err_line: int, err_col: int = 0) -> str | None:
    """Sorry out the proof body of a span from the error position on.

    ``err_line`` is 0-based and span-relative. Returns None when the error
    sits before the body delimiter (a statement error), when the span has
    no proof body, or when a ``where`` error is not inside a field.
    """
    body = proof_body(span_text)
    if body is None:
        return None
    lines = span_text.splitlines(keepends=True)
    if not lines:
        return None
    err_line = min(err_line, len(lines) - 1)
    starts = [0]
    for ln in lines:
        starts.append(starts[-1] + len(ln))
    if starts[err_line] + err_col < body.delim:
        return None
    k = len(lines)
    while k > 0 and not lines[k - 1].strip():
        k -= 1
    content = [ln.rstrip("\n") for ln in lines[:k]]
    tail = ("\n" if lines[k - 1].endswith("\n") else "") + "".join(lines[k:])
    err_line = min(err_line, k - 1)
    if body.kind == "where":
        fields = [i for i in range(body.delim_line + 1, k) if _FIELD_RE.match(mask(content[i]).text)]
        owner = [i for i in fields if i <= err_line]
        if not owner:
            return None
        i = owner[-1]
        nxt = next((j for j in fields if j > i), k)
        head = content[i][:_FIELD_RE.match(mask(content[i]).text).end()]
        new = content[:i] + [head + " sorry"] + content[nxt:]
    elif body.kind == "term":
        new = [(span_text[:body.start].rstrip() + " sorry")]
    elif err_line <= body.delim_line:
        new = [span_text[:body.start].rstrip() + "\n  sorry"]
    else:
        indent = re.match(r"[ \t]*", content[err_line]).group(0) or "  "
        new = content[:err_line] + [indent + "sorry"]
    return "\n".join(new) + tail


def _replace_span(lines: list[str], span: DeclSpan, text: str) -> list[str]:
    return lines[:span.start_line - 1] + text.splitlines(keepends=True) + lines[span.end_line:]


def phase_sorry(src: str, report: CheckReport) -> tuple[str, list[str]]:
    """Sorry out failing proof bodies; returns (new source, touched names)."""
    lines = src.splitlines(keepends=True)
    first_err: dict[str, tuple[DeclSpan, int, int]] = {}
    for d in report.errors:
        span = span_for_line(report.decls, d.line)
        if span is None or span.category not in (THEOREM, INSTANCE):
            continue
        if span.name not in first_err or (d.line, d.col) < first_err[span.name][1:]:
            first_err[span.name] = (span, d.line, d.col)
    touched = []
    for span, line, col in sorted(first_err.values(), key=lambda t: -t[0].start_line):
        text = span.text(lines)
        new = sorry_span(text, line - span.start_line, col)
        if new is None or new == text:
            continue
        lines = _replace_span(lines, span, new)
        touched.append(span.name)
    return "".join(lines), sorted(touched)


# ---------------------------------------------------------------- phase 2

def reference_closure(src: str, spans: list[DeclSpan], roots: set[str]) -> set[str]:
    """Names of ``roots`` plus every declaration that mentions a name in the set."""
    lines = src.splitlines(keepends=True)
    decls = [s for s in spans if s.category != PREAMBLE]
    texts = {s.name: mask(s.text(lines)).text for s in decls}
    closure = set(roots)
    frontier = list(roots)
    while frontier:
        name = frontier.pop()
        for s in decls:
            if s.name in closure:
                continue
            if has_identifier(texts[s.name], name):
                closure.add(s.name)
                frontier.append(s.name)
    return closure


def comment_out(text: str) -> str:
    return "".join(COMMENT_PREFIX + ln if ln.strip() else ln for ln in text.splitlines(keepends=True))


def statement_error_roots(src: str, report: CheckReport) -> set[str]:
    """Declarations whose errors cannot be fixed by sorry insertion."""
    lines = src.splitlines(keepends=True)
    roots = set()
    for d in report.errors:
        span = span_for_line(report.decls, d.line)
        if span is None or span.category == PREAMBLE:
            continue
        if span.category == DEFINITION:
            roots.add(span.name)
            continue
        text = span.text(lines)
        patched = sorry_span(text, d.line - span.start_line, d.col)
        if patched is None or patched == text:
            roots.add(span.name)
    return roots


def dependent_variables(src: str, spans: list[DeclSpan], names: set[str]) -> list[tuple[int, int]]:
    """1-based inclusive line ranges of ``variable`` commands that mention ``names``."""
    mlines = mask(src).text.splitlines()
    out = []
    for span in spans:
        if span.category != PREAMBLE:
            continue
        i = span.start_line - 1
        while i < span.end_line:
            hit = classify_line(mlines[i])
            if not hit or hit[0] != "variable":
                i += 1
                continue
            j = i + 1
            while j < span.end_line and mlines[j][:1] in (" ", "\t") and mlines[j].strip():
                j += 1
            text = "\n".join(mlines[i:j])
            if any(has_identifier(text, n) for n in names):
                out.append((i + 1, j))
            i = j
    return out


def phase_comment(src: str, report: CheckReport) -> tuple[str, dict[str, str]]:
    """Comment out the reference closure of unpatchable declarations.

    File-scope ``variable`` commands that mention a removed name go too,
    since they would no longer elaborate.
    """
    roots = statement_error_roots(src, report)
    if not roots:
        return src, {}
    names = reference_closure(src, report.decls, roots)
    lines = src.splitlines(keepends=True)
    cats = {}
    ranges = [(s.start_line, s.end_line, s) for s in report.decls if s.name in names]
    ranges += [(a, b, None) for a, b in dependent_variables(src, report.decls, names)]
    for start, end, span in sorted(ranges, key=lambda r: -r[0]):
        text = "".join(lines[start - 1:end])
        lines = lines[:start - 1] + comment_out(text).splitlines(keepends=True) + lines[end:]
        if span is not None:
            cats[span.name] = span.category
    return "".join(lines), cats


# ---------------------------------------------------------------- driver

def format_errors(errors: list[Diagnostic]) -> str:
    return "\n".join(f"{d.file}:{d.line}:{d.col}: error: {d.message}" for d in errors) or "(none)"


def _sorried(report: CheckReport) -> list[str]:
    return [s.name for s in report.decls if s.category != PREAMBLE and s.has_sorry]


def harmless_fix(src: str, checker: Checker, gateway: Gateway | None = None,
                 max_attempts: int = DEFAULT_FINAL_ATTEMPTS, file_name: str = "Main.lean") -> FinalArtifact:
    original_names = {}
    current = src
    report = checker.check_or_timeout(current, file_name)
    for s in report.decls:
        if s.category != PREAMBLE:
            original_names[s.name] = s.category
    phases: list[str] = []
    best = (report.error_count, current, report)
    for _ in range(MAX_RULE_ROUNDS):
        if report.compiled_ok:
            break
        changed = False
        new, _ = phase_sorry(current, report)
        if new != current:
            current, changed = new, True
            report = checker.check_or_timeout(current, file_name)
            if "sorry" not in phases:
                phases.append("sorry")
        if not report.compiled_ok:
            new, _ = phase_comment(current, report)
            if new != current:
                current, changed = new, True
                report = checker.check_or_timeout(current, file_name)
                if "comment" not in phases:
                    phases.append("comment")
        if report.error_count < best[0]:
            best = (report.error_count, current, report)
        if not changed:
            break
    llm_attempts = 0
    if not report.compiled_ok and gateway is not None:
        # a rewrite may not drop declarations that survived the rule phases
        keep = {s.name for s in report.decls if s.category != PREAMBLE}
        for attempt in range(1, max_attempts + 1):
            llm_attempts = attempt
            prompt = render_prompt("harmless_rewrite", {"lean_content": current, "errors": format_errors(report.errors)})
            raw = gateway.complete(prompt, sample=attempt - 1)
            if "llm" not in phases:
                phases.append("llm")
            try:
                cand = extract_code_block(raw).rstrip() + "\n"
            except EmptyCompletion:
                continue
            cand_report = checker.check_or_timeout(cand, file_name)
            if not keep <= {s.name for s in cand_report.decls}:
                log.info("harmless rewrite %d dropped declarations; rejected", attempt)
                continue
            if cand_report.compiled_ok:
                current, report = cand, cand_report
                break
            if cand_report.error_count < best[0]:
                best = (cand_report.error_count, cand, cand_report)
    if report.error_count > best[0]:
        _, current, report = best
    harmless = report.compiled_ok
    present = {s.name for s in report.decls}
    commented = [n for n in original_names if n not in present]
    sorried = _sorried(report)
    failure = None if harmless else f"{report.error_count} error(s) remain after all phases"
    if failure:
        log.warning("harmless fixing failed: %s", failure)
    if sorried or commented:
        log.info("incomplete: sorried=%s commented_out=%s", sorried, commented)
    return FinalArtifact(
        source=current,
        fully_proved=harmless and not sorried and not commented,
        sorried_decls=sorried,
        commented_out_decls=commented,
        harmless=harmless,
        commented_out_categories={n: original_names[n] for n in commented},
        phases_used=phases,
        remaining_errors=report.error_count,
        llm_attempts=llm_attempts,
        failure=failure,
    )


# ---------------------------------------------------------------- back-translation

REPORT_ENV_RE = re.compile(
    r"\\begin\{(definition|lemma|theorem|proposition|corollary|instance|assumption|remark|example|algorithm)\*?\}")
INCOMPLETE_RE = re.compile(r"Proof incomplete", re.IGNORECASE)


@dataclass(frozen=True)
class Backtranslation:
    text: str
    expected_blocks: int
    found_blocks: int
    sorried_proofs: int
    incomplete_marks: int

    @property
    def count_ok(self) -> bool:
        return self.expected_blocks == self.found_blocks

    def to_dict(self) -> dict:
        return {"expected_blocks": self.expected_blocks, "found_blocks": self.found_blocks,
                "sorried_proofs": self.sorried_proofs, "incomplete_marks": self.incomplete_marks,
                "count_ok": self.count_ok}


def backtranslate(src: str, gateway: Gateway) -> Backtranslation:
    if not src.strip():
        raise EmptySource("nothing to back-translate")
    spans = [s for s in index_declarations(src) if s.category != PREAMBLE]
    text = gateway.complete(render_prompt("backtranslate", {"lean_content": src}))
    found = len(REPORT_ENV_RE.findall(text))
    sorried = sum(1 for s in spans if s.has_sorry and s.body_is_proof)
    result = Backtranslation(text, len(spans), found, sorried, len(INCOMPLETE_RE.findall(text)))
    if not result.count_ok:
        log.warning("back-translation has %d titled blocks for %d declarations", found, len(spans))
    if result.incomplete_marks < sorried:
        log.warning("back-translation marks %d incomplete proofs, file has %d", result.incomplete_marks, sorried)
    return result
