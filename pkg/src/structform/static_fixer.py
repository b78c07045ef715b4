"""Deterministic rewrite rules run before every LLM correction round.

Every rule is a pure ``str -> str`` function that only looks at code
positions (comments and string literals are masked first). ``apply_rules``
runs the ordered pass to a fixpoint, which makes the whole pipeline
idempotent even when one rule exposes work for an earlier one (dropping a
``#check`` can leave a section empty, for instance).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable

from .lean.lexer import has_identifier, mask
from .lean.source import classify_line

MAX_PASSES = 10


@dataclass(frozen=True)
class RewriteRule:
    id: str
    description: str
    match: str
    action: str
    fn: Callable[[str], str]

    def __call__(self, src: str) -> str:
        return self.fn(src)


def _lines(src: str) -> tuple[list[str], list[str]]:
    """Source lines and masked lines, both with line endings kept."""
    return src.splitlines(keepends=True), mask(src).text.splitlines(keepends=True)


# ---------------------------------------------------------------- 1. fences

_FENCE_RE = re.compile(r"^[ \t]*```")


def strip_fences(src: str) -> str:
    lines, mlines = _lines(src)
    return "".join(ln for ln, ml in zip(lines, mlines) if not _FENCE_RE.match(ml))


# ---------------------------------------------------------------- 2. imports/opens

_SCOPE_OPEN_RE = re.compile(r"^(?:noncomputable\s+)?(section|namespace)\b\s*([^\s]*)")
_SCOPE_END_RE = re.compile(r"^end\b\s*([^\s]*)")


def dedup_imports(src: str) -> str:
    """Drop exact repeats of import lines, and of open lines still in scope."""
    lines, mlines = _lines(src)
    out = []
    imports: set[str] = set()
    scopes: list[set[str]] = [set()]
    for ln, ml in zip(lines, mlines):
        key = ln.rstrip()
        hit = classify_line(ml)
        kw = hit[0] if hit else None
        if kw == "import":
            if key in imports:
                continue
            imports.add(key)
        elif kw == "open" and not ml.rstrip().endswith(" in"):
            if any(key in s for s in scopes):
                continue
            scopes[-1].add(key)
        elif _SCOPE_OPEN_RE.match(ml) or re.match(r"^mutual\b", ml):
            scopes.append(set())
        elif _SCOPE_END_RE.match(ml) and len(scopes) > 1:
            scopes.pop()
        out.append(ln)
    return "".join(out)


# ---------------------------------------------------------------- 3. empty sections

def remove_empty_sections(src: str) -> str:
    while True:
        lines, mlines = _lines(src)
        changed = False
        i = 0
        while i < len(lines):
            m = re.match(r"^(?:noncomputable\s+)?section\b[ \t]*([^\s]*)[ \t]*$", mlines[i])
            if m:
                j = i + 1
                while j < len(lines) and not lines[j].strip():
                    j += 1
                if j < len(lines):
                    e = re.match(r"^end\b[ \t]*([^\s]*)[ \t]*$", mlines[j])
                    if e and e.group(1) == m.group(1):
                        del lines[i:j + 1]
                        changed = True
                        break
            i += 1
        if not changed:
            return src
        src = "".join(lines)


# ---------------------------------------------------------------- 4. debug commands

_DEBUG_RE = re.compile(r"^#(?:check|eval|print|reduce)\b")


def remove_debug_commands(src: str) -> str:
    lines, mlines = _lines(src)
    out = []
    skipping = False
    for ln, ml in zip(lines, mlines):
        if _DEBUG_RE.match(ml):
            skipping = True
            continue
        if skipping and ml[:1] in (" ", "\t") and ml.strip():
            continue
        skipping = False
        out.append(ln)
    return "".join(out)


# ---------------------------------------------------------------- 5. unused variables

def _binder_groups(text: str, start: int) -> list[tuple[int, int, str]]:
    """(begin, end, opener) of each top-level bracketed group after ``start``."""
    groups = []
    i = start
    n = len(text)
    while i < n:
        c = text[i]
        if c in "({⦃[":
            depth = 0
            j = i
            while j < n:
                if text[j] in "({⦃[⟨":
                    depth += 1
                elif text[j] in ")}⦄]⟩":
                    depth -= 1
                    if depth == 0:
                        break
                j += 1
            if j >= n:
                return groups  # unbalanced: leave the command alone
            groups.append((i, j + 1, c))
            i = j + 1
        else:
            i += 1
    return groups


def _binder_names(group_text: str) -> list[str]:
    inner = group_text[1:-1]
    if ":" not in inner:
        return []
    head = inner.split(":", 1)[0]
    return [t for t in head.split() if t not in ("_",)]


def _comments_only(cmd: str) -> str:
    """Keep just the comment text of a command that is being deleted."""
    code = mask(cmd).code
    kept = "".join(c for c, k in zip(cmd, code) if not k or c == "\n")
    return "".join(ln.lstrip() for ln in kept.splitlines(keepends=True) if ln.strip())


def drop_unused_variables(src: str) -> str:
    """Remove ``variable`` binder groups whose names never occur later in the file.

    Instance binders ``[...]`` are never touched. A ``variable`` command left
    with no binders is removed entirely.
    """
    while True:
        m = mask(src)
        lines = src.splitlines(keepends=True)
        mlines = m.text.splitlines(keepends=True)
        offsets = [0]
        for ln in lines:
            offsets.append(offsets[-1] + len(ln))
        changed = False
        i = 0
        while i < len(lines):
            hit = classify_line(mlines[i])
            if not hit or hit[0] != "variable":
                i += 1
                continue
            j = i + 1
            while j < len(lines) and mlines[j][:1] in (" ", "\t") and mlines[j].strip():
                j += 1
            a, b = offsets[i], offsets[j]
            cmd_masked = m.text[a:b]
            kw_end = cmd_masked.index("variable") + len("variable")
            groups = _binder_groups(cmd_masked, kw_end)
            drop = []
            for g0, g1, opener in groups:
                if opener == "[":
                    continue
                names = _binder_names(cmd_masked[g0:g1])
                if not names:
                    continue
                later = m.text[a + g1:]
                if not any(has_identifier(later, nm) for nm in names):
                    drop.append((g0, g1))
            if drop:
                cmd = src[a:b]
                for g0, g1 in reversed(drop):
                    # swallow one adjacent space so spacing stays tidy
                    if g0 > 0 and cmd[g0 - 1] == " ":
                        g0 -= 1
                    cmd = cmd[:g0] + cmd[g1:]
                if not _binder_groups(mask(cmd).text, len("variable")):
                    cmd = _comments_only(cmd)
                src = src[:a] + cmd + src[b:]
                changed = True
                break
            i = j
        if not changed:
            return src


# ---------------------------------------------------------------- 6. unicode

UNICODE_WHITELIST = (
    (re.compile(r"\\R(?![A-Za-z])"), "ℝ"),
    (re.compile(r"\\to(?![A-Za-z])"), "→"),
    (re.compile(r"\\forall(?![A-Za-z])"), "∀"),
    (re.compile(r"(?<![<\-])->(?!>)"), "→"),
)


def normalize_unicode(src: str) -> str:
    out = src
    for pat, rep in UNICODE_WHITELIST:
        masked = mask(out)
        pieces = []
        last = 0
        for hit in pat.finditer(masked.text):
            if not all(masked.code[k] for k in range(hit.start(), hit.end())):
                continue
            pieces.append(out[last:hit.start()])
            pieces.append(rep)
            last = hit.end()
        pieces.append(out[last:])
        out = "".join(pieces)
    return out


# ---------------------------------------------------------------- 7. close scopes

def close_open_sections(src: str) -> str:
    lines, mlines = _lines(src)
    stack: list[str] = []
    for ml in mlines:
        if re.match(r"^mutual\b", ml):
            stack.append("")
            continue
        o = _SCOPE_OPEN_RE.match(ml)
        if o:
            stack.append(o.group(2))
            continue
        e = _SCOPE_END_RE.match(ml)
        if e and stack:
            stack.pop()
    if not stack:
        return src
    tail = "".join(f"end {name}".rstrip() + "\n" for name in reversed(stack))
    if src and not src.endswith("\n"):
        src += "\n"
    return src + tail


RULES: tuple[RewriteRule, ...] = (
    RewriteRule("strip_fences", "Remove residual markdown code fences",
                "lines starting with ```", "delete line", strip_fences),
    RewriteRule("dedup_imports", "Deduplicate import lines and in-scope open lines",
                "exact repeat of an earlier import/open line", "delete repeat", dedup_imports),
    RewriteRule("remove_empty_sections", "Remove section ... end pairs with nothing in between",
                "section X followed only by blank lines and end X", "delete the pair", remove_empty_sections),
    RewriteRule("remove_debug_commands", "Remove #check/#eval/#print/#reduce commands",
                "column-0 debug command plus indented continuation", "delete command", remove_debug_commands),
    RewriteRule("drop_unused_variables", "Drop file-scope variable binders never referenced later",
                "variable binder group whose names never occur afterwards", "delete group", drop_unused_variables),
    RewriteRule("normalize_unicode", "Whitelisted ASCII fallbacks to canonical Unicode",
                "\\R, \\to, \\forall, -> in code", "replace with ℝ, →, ∀, →", normalize_unicode),
    RewriteRule("close_open_sections", "Append end lines for sections/namespaces left open",
                "unclosed section/namespace at end of file", "append end <name>", close_open_sections),
)


def apply_rules(src: str, rules: tuple[RewriteRule, ...] = RULES) -> tuple[str, list[str]]:
    """Run the ordered rules to a fixpoint; return the text and the ids that changed it."""
    applied: list[str] = []
    for _ in range(MAX_PASSES):
        before = src
        for rule in rules:
            out = rule(src)
            if out != src:
                if rule.id not in applied:
                    applied.append(rule.id)
                src = out
        if src == before:
            break
    order = {r.id: i for i, r in enumerate(rules)}
    return src, sorted(applied, key=order.__getitem__)


def describe_rules(rules: tuple[RewriteRule, ...] = RULES) -> list[dict]:
    return [{"id": r.id, "description": r.description, "match": r.match, "action": r.action} for r in rules]
