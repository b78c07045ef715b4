"""Compiler-feedback repair loop and whole-file proof refinement.

``repair`` alternates deterministic rewrites, a type check and one
LLM correction per iteration. Every candidate it sees (the input included)
competes on ``(error_count, sorry_count)`` and the minimum is returned, so
the output is never worse than the input.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

from .error_kb import KnowledgeBase
from .lean.checker import Checker, CheckReport
from .lean.diagnostics import Diagnostic, ErrorKind
from .lean.lexer import has_identifier, mask
from .lean.source import find_body_delimiter, index_declarations, scan_sorries, span_for_line
from .llm_gateway import EmptyCompletion, Gateway, extract_code_block, render_prompt
from .static_fixer import apply_rules
from .templates import Template

log = logging.getLogger(__name__)

CONTEXT_RADIUS = 8
SORRY_CONTEXT_RADIUS = 3
NONE_TEXT = "(none)"


def normalize_source(code: str) -> str:
    return code.rstrip() + "\n" if code.strip() else ""


def count_sorries(src: str) -> int:
    return len(scan_sorries(src))


def quality(report: CheckReport, src: str) -> tuple[int, int]:
    return report.error_count, count_sorries(src)


def line_window(src: str, line: int, radius: int = CONTEXT_RADIUS) -> str:
    lines = src.splitlines()
    lo = max(line - 1 - radius, 0)
    hi = min(line + radius, len(lines))
    return "\n".join(f"{i + 1:4d} | {lines[i]}" for i in range(lo, hi))


def enclosing_text(src: str, report: CheckReport, line: int) -> str:
    span = span_for_line(report.decls, line)
    if span is None:
        return line_window(src, line)
    return span.text(src.splitlines(keepends=True)).rstrip()


def statement_text(template: Template, name: str) -> str:
    """Declaration text up to its body delimiter (the whole text if none)."""
    text = template.decl_text(name)
    delim = find_body_delimiter(mask(text).text)
    return text[:delim[0]].rstrip() if delim else text


@dataclass
class IterationRecord:
    errors_before: int
    errors_after: int
    rule_ids: list[str]
    kb_hits: list[int]
    transcript: str | None
    sorries_after: int = 0
    candidate_path: str | None = None  # file name inside the engine's out_dir

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RepairOutcome:
    final_source: str
    iterations_used: int
    resolved: bool
    per_iteration: list[IterationRecord]
    best_candidate: str
    final_report: CheckReport | None = None
    kb_entries: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "iterations_used": self.iterations_used,
            "resolved": self.resolved,
            "per_iteration": [r.to_dict() for r in self.per_iteration],
            "kb_entries": list(self.kb_entries),
            "final_errors": self.final_report.error_count if self.final_report else None,
        }


@dataclass
class ProofOutcome:
    source: str
    unresolved_sorries: int
    attempts: int
    accepted: list[int]
    repairs: list[RepairOutcome]
    correction_seconds: float = 0.0

    def to_dict(self) -> dict:
        return {
            "unresolved_sorries": self.unresolved_sorries,
            "attempts": self.attempts,
            "accepted": list(self.accepted),
            "repairs": [r.to_dict() for r in self.repairs],
        }


class _Best:
    """Lexicographic minimum of (errors, sorries); first seen wins ties."""

    def __init__(self) -> None:
        self.src: str | None = None
        self.report: CheckReport | None = None
        self.key: tuple[int, int] | None = None

    def offer(self, src: str, report: CheckReport) -> None:
        key = quality(report, src)
        if self.key is None or key < self.key:
            self.src, self.report, self.key = src, report, key


@dataclass
class RepairEngine:
    checker: Checker
    gateway: Gateway
    kb: KnowledgeBase
    template: Template | None = None
    explainer: Gateway | None = None
    max_steps: int = 3
    retrieval_k: int = 3
    out_dir: Path | None = None
    file_name: str = "Main.lean"
    clock: Callable[[], float] = time.perf_counter

    def __post_init__(self) -> None:
        self._counters: dict[str, int] = {}

    # -- helpers

    def check(self, src: str) -> CheckReport:
        return self.checker.check_or_timeout(src, self.file_name)

    def _write(self, stage: str, src: str) -> str | None:
        if self.out_dir is None:
            return None
        n = self._counters.get(stage, 0) + 1
        self._counters[stage] = n
        p = Path(self.out_dir) / f"repair_{stage}_{n}.lean"
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(src, encoding="utf-8")
        return p.name

    def _known_theorems(self) -> list[str]:
        if self.template is None:
            return []
        names = self.template.theorem_names()
        names += [n for n in self.template.names_with_role("T") if n not in names]
        return names

    def theorem_details(self, errors: list[Diagnostic]) -> list[str]:
        """Template theorems whose statements belong in the correction prompt."""
        known = self._known_theorems()
        named = [n for n in known if any(has_identifier(d.message, n) for d in errors)]
        if named:
            return named
        if any(d.kind == ErrorKind.APPLY_FAILED for d in errors) and self.template is not None:
            return self.template.names_with_role("T")
        return []

    def correction_prompt(self, src: str, report: CheckReport) -> tuple[str, list[int]]:
        errors = report.errors
        blocks = []
        for i, d in enumerate(errors, start=1):
            blocks.append(render_prompt("correction_error", {
                "number": str(i),
                "file": d.file,
                "line": str(d.line),
                "message": d.message,
                "context": line_window(src, d.line),
                "full_context": enclosing_text(src, report, d.line),
            }))
        hits: list[int] = []
        solutions = []
        seen_kinds: set[ErrorKind] = set()
        for d in errors:
            if d.kind in seen_kinds:
                continue
            seen_kinds.add(d.kind)
            res = self.kb.retrieve(d.message, self.retrieval_k, d.kind)
            if not len(res):
                continue
            hits.extend(res.ids)
            parts = [f"[{d.kind.value}] for: {d.message.splitlines()[0]}"]
            for rank, (entry, score) in enumerate(res.entries, start=1):
                parts.append(f"Solution {rank} (similarity {score:.2f}):\n{entry.render_for_prompt()}")
            solutions.append("\n\n".join(parts))
        details = [statement_text(self.template, n) for n in self.theorem_details(errors)] if self.template else []
        prompt = render_prompt("correction", {
            "current_code": src,
            "errors": "\n".join(blocks),
            "similar_solutions": "\n\n".join(solutions) or NONE_TEXT,
            "theorem_details": "\n\n".join(details) or NONE_TEXT,
        })
        return prompt, hits

    # -- operations

    def fix_once(self, src: str, report: CheckReport) -> tuple[str, list[int]]:
        """One LLM correction; returns (candidate, retrieved KB ids)."""
        prompt, hits = self.correction_prompt(src, report)
        raw = self.gateway.complete(prompt)
        try:
            return normalize_source(extract_code_block(raw)), hits
        except EmptyCompletion:
            return src, hits

    def _record(self, first: Diagnostic, before_src: str, before: CheckReport,
                after_src: str, after: CheckReport) -> int | None:
        if self.explainer is None:
            return None
        faulty = enclosing_text(before_src, before, first.line)
        fixed = ""
        if first.decl is not None:
            for s in after.decls:
                if s.name == first.decl:
                    fixed = s.text(after_src.splitlines(keepends=True)).rstrip()
                    break
        if not fixed or fixed == faulty:
            faulty, fixed = before_src, after_src
        if fixed == faulty:
            return None
        return self.kb.record_fix(first.message, faulty, fixed, self.explainer).id

    def repair(self, src: str, stage: str = "backbone") -> RepairOutcome:
        best = _Best()
        in_report = self.check(src)
        best.offer(src, in_report)
        records: list[IterationRecord] = []
        kb_entries: list[int] = []
        current, current_report = src, in_report
        iterations = 0
        while True:
            fixed, rule_ids = apply_rules(current)
            fixed = normalize_source(fixed) if fixed.strip() else fixed
            report = current_report if fixed == current else self.check(fixed)
            best.offer(fixed, report)
            if report.compiled_ok or iterations >= self.max_steps:
                break
            iterations += 1
            cand, hits = self.fix_once(fixed, report)
            cand_report = self.check(cand)
            best.offer(cand, cand_report)
            records.append(IterationRecord(
                report.error_count, cand_report.error_count, rule_ids, hits, self.gateway.last_id,
                count_sorries(cand), self._write(stage, cand)))
            if cand_report.compiled_ok:
                entry = self._record(report.errors[0], fixed, report, cand, cand_report)
                if entry is not None:
                    kb_entries.append(entry)
                break
            current, current_report = cand, cand_report
        assert best.src is not None and best.report is not None
        resolved = best.report.compiled_ok
        log.info("repair[%s]: iterations=%d resolved=%s errors=%d", stage, iterations, resolved,
                 best.report.error_count)
        return RepairOutcome(best.src, iterations, resolved, records, best.src, best.report, kb_entries)

    def sorry_contexts(self, src: str) -> str:
        sites = scan_sorries(src)
        if not sites:
            return ""
        spans = index_declarations(src)
        out = ["", "    Local context of each sorry:"]
        for i, (line, _col) in enumerate(sites, start=1):
            span = span_for_line(spans, line)
            owner = span.name if span is not None else "(preamble)"
            out.append(f"[sorry {i}] line {line} in {owner}\n{line_window(src, line, SORRY_CONTEXT_RADIUS)}")
        return "\n".join(out) + "\n"

    def refine_proofs(self, src: str, example_content: str | None = None,
                      max_attempts: int = 3) -> ProofOutcome:
        """Whole-file proof generation; keeps the best clean candidate."""
        current = src
        current_sorries = count_sorries(src)
        repairs: list[RepairOutcome] = []
        accepted: list[int] = []
        attempts = 0
        correction = 0.0
        if example_content is None:
            example_content = self.template.lean_source if self.template else ""
        required = {s.name for s in index_declarations(src)}
        if current_sorries and not self.check(src).compiled_ok:
            log.info("proof refinement skipped: input does not compile")
            return ProofOutcome(src, current_sorries, 0, [], [])
        while current_sorries > 0 and attempts < max_attempts:
            attempts += 1
            prompt = render_prompt("proof", {
                "lean_content": current,
                "example_content": example_content,
                "sorry_contexts": self.sorry_contexts(current),
            })
            raw = self.gateway.complete(prompt, sample=attempts - 1)
            try:
                code = normalize_source(extract_code_block(raw))
            except EmptyCompletion:
                continue
            t0 = self.clock()
            outcome = self.repair(code, stage="proof")
            correction += self.clock() - t0
            repairs.append(outcome)
            cand = outcome.final_source
            rep = outcome.final_report
            names = {s.name for s in rep.decls} if rep else set()
            n = count_sorries(cand)
            if outcome.resolved and n < current_sorries and required <= names:
                current, current_sorries = cand, n
                accepted.append(attempts)
            else:
                log.info("proof attempt %d rejected (resolved=%s, sorries=%d)", attempts, outcome.resolved, n)
        return ProofOutcome(current, current_sorries, attempts, accepted, repairs, correction)


def effort_bound(backbone_steps: int = 3, correction_steps: int = 3, proof_steps: int = 3) -> int:
    """Upper bound on generator calls for one file."""
    return backbone_steps + correction_steps * (1 + proof_steps) + proof_steps * (1 + correction_steps)

