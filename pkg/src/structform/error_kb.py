"""Self-updating knowledge base of error -> fix exemplars.

Retrieval ranks entries by (same error kind first, masked-token Jaccard
similarity, newer id). The reported score is ``0.5 * same_kind + 0.5 *
jaccard``; that keeps scores non-increasing along the ranking, since every
same-kind entry scores at least 0.5 and every other entry at most 0.5.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import os
import re
import tempfile
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable

from .lean.diagnostics import ErrorKind, normalize_error
from .llm_gateway import Gateway, render_prompt

log = logging.getLogger(__name__)

EXPLANATION_PARTS = ("error_type", "root_cause", "fix_description", "why_it_works")
_LABELS = {
    "error_type": "Error Type",
    "root_cause": "Root Cause",
    "fix_description": "Fix Description",
    "why_it_works": "Why It Works",
}
UNPARSED = "unparsed"
SEED_TIMESTAMP = "2025-01-01T00:00:00+00:00"


class CorruptLine(Exception):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class ExplanationUnparseable(ValueError):
    pass


@dataclass(frozen=True)
class Explanation:
    error_type: str
    root_cause: str
    fix_description: str
    why_it_works: str

    def __post_init__(self) -> None:
        for part in EXPLANATION_PARTS:
            if not getattr(self, part).strip():
                raise ValueError(f"explanation part {part} is empty")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def render(self) -> str:
        return "\n".join(f"{_LABELS[p]}: {getattr(self, p)}" for p in EXPLANATION_PARTS)


@dataclass
class KBEntry:
    id: int
    kind: ErrorKind
    message: str
    faulty_snippet: str
    fixed_snippet: str
    explanation: Explanation
    created_at: str
    use_count: int = 0

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind.value,
            "message": self.message,
            "faulty_snippet": self.faulty_snippet,
            "fixed_snippet": self.fixed_snippet,
            "explanation": self.explanation.to_dict(),
            "created_at": self.created_at,
            "use_count": self.use_count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> KBEntry:
        kind = ErrorKind(d["kind"])
        if kind != normalize_error(d["message"]):
            raise ValueError(f"kind {kind.value} disagrees with message classification")
        if not isinstance(d["id"], int) or isinstance(d["id"], bool):
            raise ValueError("id must be an integer")
        return cls(d["id"], kind, d["message"], d["faulty_snippet"], d["fixed_snippet"],
                   Explanation(**{p: d["explanation"][p] for p in EXPLANATION_PARTS}),
                   d["created_at"], int(d.get("use_count", 0)))

    def render_for_prompt(self) -> str:
        return (f"Error: {self.message}\nFaulty code:\n{self.faulty_snippet}\n"
                f"Fixed code:\n{self.fixed_snippet}\n{self.explanation.render()}")


# ---------------------------------------------------------------- similarity

_TOKEN_RE = re.compile(r"[^\W_]+")


def mask_tokens(message: str) -> set[str]:
    out = set()
    for tok in _TOKEN_RE.findall(message.lower()):
        if tok.isdigit():
            out.add("<n>")
        elif len(tok) == 1 and tok.isalpha():
            out.add("<v>")
        else:
            out.add(tok)
    return out


def similarity(a: str, b: str) -> float:
    ta, tb = mask_tokens(a), mask_tokens(b)
    if not ta and not tb:
        return 1.0
    return len(ta & tb) / len(ta | tb)


@dataclass(frozen=True)
class RetrievalResult:
    entries: list[tuple[KBEntry, float]]

    @property
    def ids(self) -> list[int]:
        return [e.id for e, _ in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


# ---------------------------------------------------------------- explanation parsing

_PART_RE = re.compile(
    r"^[ \t>*_#-]*(error type|root cause|fix description|why it works)[*_ \t]*:[*_ \t]*",
    re.IGNORECASE | re.MULTILINE,
)


def parse_explanation(text: str) -> Explanation:
    hits = list(_PART_RE.finditer(text))
    found: dict[str, str] = {}
    for i, m in enumerate(hits):
        key = m.group(1).lower().replace(" ", "_")
        end = hits[i + 1].start() if i + 1 < len(hits) else len(text)
        body = text[m.end():end].strip()
        if key not in found:
            found[key] = body
    missing = [p for p in EXPLANATION_PARTS if not found.get(p)]
    if missing:
        raise ExplanationUnparseable(f"missing {missing}")
    return Explanation(**{p: found[p] for p in EXPLANATION_PARTS})


def degraded_explanation(raw: str) -> Explanation:
    return Explanation(UNPARSED, UNPARSED, raw.strip() or UNPARSED, UNPARSED)


def _now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


# ---------------------------------------------------------------- knowledge base

@dataclass
class KnowledgeBase:
    entries: list[KBEntry] = field(default_factory=list)
    path: Path | None = None
    clock: Callable[[], str] = _now_iso
    load_report: list[CorruptLine] = field(default_factory=list)

    def __post_init__(self) -> None:
        self._lock = threading.RLock()

    def __len__(self) -> int:
        return len(self.entries)

    def snapshot(self) -> list[KBEntry]:
        with self._lock:
            return list(self.entries)

    def get(self, entry_id: int) -> KBEntry:
        for e in self.snapshot():
            if e.id == entry_id:
                return e
        raise KeyError(entry_id)

    def next_id(self) -> int:
        return max((e.id for e in self.entries), default=0) + 1

    # -- retrieval

    @staticmethod
    def rank_key(query_kind: ErrorKind, query: str, entry: KBEntry) -> tuple:
        return (0 if entry.kind == query_kind else 1, -similarity(query, entry.message), -entry.id)

    def retrieve(self, message: str, k: int = 3, kind: ErrorKind | None = None) -> RetrievalResult:
        """Top-k entries; bumps ``use_count`` on the returned ones (best effort)."""
        if k <= 0:
            return RetrievalResult([])
        qkind = kind or normalize_error(message)
        snap = self.snapshot()
        scored = []
        for e in snap:
            same = e.kind == qkind
            sim = similarity(message, e.message)
            scored.append(((0 if same else 1, -sim, -e.id), e, 0.5 * same + 0.5 * sim))
        scored.sort(key=lambda t: t[0])
        top = [(e, score) for _, e, score in scored[:k]]
        with self._lock:
            for e, _ in top:
                e.use_count += 1
        return RetrievalResult(top)

    # -- growth

    def add(self, kind_message: str, faulty: str, fixed: str, explanation: Explanation,
            created_at: str | None = None) -> KBEntry:
        with self._lock:
            entry = KBEntry(self.next_id(), normalize_error(kind_message), kind_message, faulty, fixed,
                            explanation, created_at or self.clock())
            self.entries.append(entry)
            if self.path is not None:
                self._append(entry)
            return entry

    def record_fix(self, message: str, faulty: str, fixed: str, gateway: Gateway) -> KBEntry:
        """Ask the explainer model why ``fixed`` repairs ``faulty`` and store the result."""
        if fixed == faulty:
            raise ValueError("fixed code is identical to faulty code")
        prompt = render_prompt("fix_explanation", {"original_code": faulty, "fixed_code": fixed})
        raw = gateway.complete(prompt)
        try:
            expl = parse_explanation(raw)
        except ExplanationUnparseable as exc:
            log.warning("fix explanation unparseable (%s); storing raw text", exc)
            expl = degraded_explanation(raw)
        return self.add(message, faulty, fixed, expl)

    # -- persistence

    def _append(self, entry: KBEntry) -> None:
        assert self.path is not None
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry.to_dict(), ensure_ascii=False) + "\n")

    def persist(self, path: str | os.PathLike | None = None) -> Path:
        target = Path(path) if path is not None else self.path
        if target is None:
            raise ValueError("no path to persist to")
        target.parent.mkdir(parents=True, exist_ok=True)
        with self._lock:
            lines = [json.dumps(e.to_dict(), ensure_ascii=False) + "\n" for e in self.entries]
            fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=".kb-", suffix=".tmp")
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.writelines(lines)
            os.replace(tmp, target)
        return target

    @classmethod
    def load(cls, path: str | os.PathLike, clock: Callable[[], str] = _now_iso) -> KnowledgeBase:
        """Load a KB file; corrupt lines are skipped and listed in ``load_report``."""
        p = Path(path)
        entries: list[KBEntry] = []
        report: list[CorruptLine] = []
        seen: set[int] = set()
        if p.exists():
            with open(p, encoding="utf-8") as fh:
                for no, line in enumerate(fh, start=1):
                    if not line.strip():
                        continue
                    try:
                        entry = KBEntry.from_dict(json.loads(line))
                        if entry.id in seen:
                            raise ValueError(f"duplicate id {entry.id}")
                    except (ValueError, KeyError, TypeError) as exc:
                        report.append(CorruptLine(no, str(exc)))
                        continue
                    seen.add(entry.id)
                    entries.append(entry)
        for c in report:
            log.warning("knowledge base %s: skipped %s", p, c)
        return cls(entries, p, clock, report)

    # -- seeding and stats

    def seed(self, records: Iterable[dict], skip_existing: bool = False) -> int:
        """Append seed records (extra keys such as ``origin`` are ignored).

        With ``skip_existing``, records whose message and snippets already
        appear in the KB are not added again.
        """
        seen = {(e.message, e.faulty_snippet, e.fixed_snippet) for e in self.snapshot()} if skip_existing else set()
        n = 0
        for r in records:
            if (r["message"], r["faulty_snippet"], r["fixed_snippet"]) in seen:
                continue
            expl = Explanation(**{p: r["explanation"][p] for p in EXPLANATION_PARTS})
            self.add(r["message"], r["faulty_snippet"], r["fixed_snippet"], expl,
                     r.get("created_at", SEED_TIMESTAMP))
            n += 1
        return n

    def stats(self) -> dict[str, int]:
        counts = {k.value: 0 for k in ErrorKind}
        for e in self.snapshot():
            counts[e.kind.value] += 1
        return counts


def default_seed_dir() -> Path:
    return Path(str(resources.files("structform") / "data" / "kb_seed"))


def read_seed_records(seed_dir: str | os.PathLike | None = None) -> list[dict]:
    d = Path(seed_dir) if seed_dir else default_seed_dir()
    files = [d] if d.is_file() else sorted(d.glob("*.jsonl"))
    records = []
    for f in files:
        with open(f, encoding="utf-8") as fh:
            records.extend(json.loads(line) for line in fh if line.strip())
    return records


def seeded_kb(path: str | os.PathLike | None = None, seed_dir: str | os.PathLike | None = None) -> KnowledgeBase:
    kb = KnowledgeBase(path=Path(path) if path else None)
    kb.seed(read_seed_records(seed_dir))
    return kb
