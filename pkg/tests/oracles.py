"""Independent reference implementations used as test oracles."""

from __future__ import annotations

from structform.error_kb import KnowledgeBase
from structform.lean.diagnostics import ErrorKind


def tokens(msg: str) -> set[str]:
    """Independent tokenizer: runs of alphanumeric characters, masked."""
    out, cur = set(), ""
    for ch in msg.lower() + " ":
        if ch.isalnum():
            cur += ch
            continue
        if cur:
            out.add("<n>" if cur.isdigit() else "<v>" if len(cur) == 1 and cur.isalpha() else cur)
        cur = ""
    return out


def jaccard(a: str, b: str) -> float:
    ta, tb = tokens(a), tokens(b)
    return 1.0 if not ta and not tb else len(ta & tb) / len(ta | tb)


def brute_force_rank(kb: KnowledgeBase, query: str, kind: ErrorKind, k: int) -> list[int]:
    rows = []
    for e in kb.entries:
        rows.append((e.kind != kind, -jaccard(query, e.message), -e.id, e.id))
    rows.sort()
    return [r[3] for r in rows[:k]]
