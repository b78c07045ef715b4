"""Stage 1: generate the formal skeleton from the backbone prompt.

The template's rule-based snippets (imports, opens, section header, local
notations) are always prepended verbatim; copies of those lines inside the
model completion are dropped so nothing is doubled.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from pathlib import Path

from .lean.lexer import mask
from .lean.source import PREAMBLE, classify_line
from .llm_gateway import EmptyCompletion, Gateway, extract_code_block, render_prompt
from .templates import ProblemSpec, Snippets, Template

log = logging.getLogger(__name__)

DEFAULT_MAX_ATTEMPTS = 3


class GenerationExhausted(Exception):
    pass


@dataclass(frozen=True)
class Skeleton:
    source: str
    problem_id: str
    generation_attempt: int
    provenance: str | None
    path: str | None = None


def backbone_prompt(problem: ProblemSpec, template: Template, example: str) -> str:
    return render_prompt("backbone", {
        "problem": problem.description,
        "lean_structure": template.lean_source,
        "lean_example": example,
    })


def compose_skeleton(snippets: Snippets, code: str) -> str:
    """Snippet lines, a blank line, then ``code`` minus exact copies of snippet lines."""
    prefix = snippets.lines()
    seen = {ln.strip() for ln in prefix}
    body = [ln for ln in code.splitlines() if not (ln.strip() and ln.strip() in seen)]
    while body and not body[0].strip():
        body.pop(0)
    out = "\n".join(prefix)
    if body:
        out += "\n\n" + "\n".join(body)
    return out.rstrip("\n") + "\n"


def count_declarations(code: str) -> int:
    n = 0
    for ml in mask(code).text.splitlines():
        hit = classify_line(ml)
        if hit and hit[1] != PREAMBLE:
            n += 1
    return n


def build_skeleton(problem: ProblemSpec, template: Template, example: str, gateway: Gateway,
                   max_attempts: int = DEFAULT_MAX_ATTEMPTS,
                   out_dir: str | os.PathLike | None = None) -> Skeleton:
    """Generate until a completion holds at least one declaration.

    Attempt ``n`` (1-based) uses sample index ``n - 1`` so replayed retries
    get distinct recorded completions.
    """
    prompt = backbone_prompt(problem, template, example)
    for attempt in range(1, max_attempts + 1):
        raw = gateway.complete(prompt, sample=attempt - 1)
        try:
            code = extract_code_block(raw)
        except EmptyCompletion:
            code = ""
        if count_declarations(code) == 0:
            log.warning("%s: backbone attempt %d has no declarations; retrying", problem.id, attempt)
            continue
        source = compose_skeleton(template.snippets, code)
        path = None
        if out_dir is not None:
            p = Path(out_dir) / f"skeleton_{attempt}.lean"
            p.parent.mkdir(parents=True, exist_ok=True)
            p.write_text(source, encoding="utf-8")
            path = str(p)
        return Skeleton(source, problem.id, attempt, gateway.last_id, path)
    raise GenerationExhausted(f"{problem.id}: no usable backbone after {max_attempts} attempts")
