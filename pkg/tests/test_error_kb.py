from __future__ import annotations

import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from structform.error_kb import (SEED_TIMESTAMP, Explanation, ExplanationUnparseable, KBEntry, KnowledgeBase,
                                 degraded_explanation, mask_tokens, parse_explanation, read_seed_records,
                                 seeded_kb, similarity)
from structform.lean.diagnostics import ErrorKind
from oracles import brute_force_rank, jaccard
from structform.llm_gateway import Gateway, ScriptedBackend

EXPL = Explanation("Syntax error", "R", "F", "W")


def _kb(n_syntax=4):
    kb = KnowledgeBase(clock=lambda: SEED_TIMESTAMP)
    kb.add("type mismatch at z", "a", "b", EXPL)
    for i in range(n_syntax):
        kb.add(f"unexpected end of input at line {i}", "a", "b", EXPL)
    return kb


# ---------------------------------------------------------------- similarity

def test_similarity_examples():
    assert similarity("same msg", "same msg") == 1.0
    assert similarity("alpha beta", "gamma delta") == 0.0
    assert similarity("type mismatch at x", "type mismatch at y") == 1.0
    assert mask_tokens("type mismatch at x") == {"type", "mismatch", "at", "<v>"}
    assert mask_tokens("line 42 ?m.7571") == {"line", "<n>", "<v>"}


@settings(max_examples=300)
@given(st.text(max_size=40), st.text(max_size=40))
def test_similarity_matches_oracle(a, b):
    assert similarity(a, b) == pytest.approx(jaccard(a, b))
    assert similarity(a, b) == similarity(b, a)
    assert 0.0 <= similarity(a, b) <= 1.0


# ---------------------------------------------------------------- retrieval

def test_top_k_scores_non_increasing():
    kb = _kb()
    res = kb.retrieve("unexpected end of input at line 9", k=3)
    assert len(res) == 3
    scores = [s for _, s in res.entries]
    assert scores == sorted(scores, reverse=True)


def test_same_kind_first():
    kb = _kb()
    res = kb.retrieve("unexpected end of input at line 1", k=5, kind=ErrorKind.TYPE_MISMATCH)
    assert res.ids[0] == 1
    assert res.ids == brute_force_rank(kb, "unexpected end of input at line 1", ErrorKind.TYPE_MISMATCH, 5)


def test_empty_kb_and_k_zero():
    assert KnowledgeBase().retrieve("anything").entries == []
    assert _kb().retrieve("x", k=0).entries == []


def test_retrieval_bumps_use_count():
    kb = _kb()
    ids = kb.retrieve("type mismatch at q", k=2).ids
    assert all(kb.get(i).use_count == 1 for i in ids)


def test_retrieval_deterministic_and_matches_brute_force():
    kb = seeded_kb()
    msgs = [e.message for e in kb.entries]
    rng = random.Random(3)
    for _ in range(30):
        q = " ".join(rng.choice(msgs).split()[:rng.randint(1, 6)]) or "x"
        kind = rng.choice(list(ErrorKind))
        first = kb.retrieve(q, 3, kind).ids
        assert kb.retrieve(q, 3, kind).ids == first
        assert first == brute_force_rank(kb, q, kind, 3)


# ---------------------------------------------------------------- explanations

def test_parse_explanation_and_markup():
    e = parse_explanation("Error Type: Syntax error\nRoot Cause: R\nFix Description: F\nWhy It Works: W")
    assert e == Explanation("Syntax error", "R", "F", "W")
    e2 = parse_explanation("**Error Type:** T\n\n## Root Cause: multi\nline\n> Fix Description: F\n- Why It Works: W")
    assert e2.root_cause == "multi\nline" and e2.error_type == "T"


def test_parse_explanation_missing_part():
    with pytest.raises(ExplanationUnparseable):
        parse_explanation("Error Type: T\nRoot Cause: R\nFix Description: F\n")


def test_record_fix_parses_and_degrades(tmp_path):
    kb = KnowledgeBase(path=tmp_path / "kb.jsonl", clock=lambda: SEED_TIMESTAMP)
    good = Gateway(ScriptedBackend(responder=lambda p, s: "Error Type: Failed to synthesize\nRoot Cause: R\n"
                                                          "Fix Description: F\nWhy It Works: W"))
    e = kb.record_fix("failed to synthesize\n  HSub (Fin m → ℝ) ℝ", "old", "new", good)
    assert e.kind == ErrorKind.FAILED_TO_SYNTHESIZE and e.explanation.why_it_works == "W"
    bad = Gateway(ScriptedBackend(responder=lambda p, s: "Error Type: T\nRoot Cause: R"))
    e2 = kb.record_fix("unknown identifier 'x'", "old", "new2", bad)
    assert e2.explanation.error_type == "unparsed" and "Root Cause" in e2.explanation.fix_description
    assert [x.id for x in KnowledgeBase.load(tmp_path / "kb.jsonl").entries] == [1, 2]
    with pytest.raises(ValueError):
        kb.record_fix("x", "same", "same", good)


def test_fix_prompt_has_both_snippets():
    seen = []
    g = Gateway(ScriptedBackend(responder=lambda p, s: seen.append(p) or "Error Type: a\nRoot Cause: b\n"
                                                                        "Fix Description: c\nWhy It Works: d"))
    KnowledgeBase().record_fix("no goals", "FAULTY_CODE", "FIXED_CODE", g)
    assert "FAULTY_CODE" in seen[0] and "FIXED_CODE" in seen[0]


def test_degraded_explanation_nonempty():
    assert degraded_explanation("").fix_description == "unparsed"


@settings(max_examples=50)
@given(st.lists(st.sampled_from(["no goals", "unknown identifier 'x'", "type mismatch"]), max_size=6))
def test_monotone_growth(msgs):
    kb = _kb(1)
    before = [e.to_dict() for e in kb.entries]
    g = Gateway(ScriptedBackend(responder=lambda p, s: "Error Type: a\nRoot Cause: b\nFix Description: c\n"
                                                      "Why It Works: d"))
    for i, m in enumerate(msgs):
        kb.record_fix(m, f"f{i}", f"g{i}", g)
    assert [e.to_dict() for e in kb.entries[:len(before)]] == before
    assert len(kb) == len(before) + len(msgs)
    assert [e.id for e in kb.entries] == list(range(1, len(kb) + 1))


# ---------------------------------------------------------------- persistence

def test_empty_round_trip(tmp_path):
    KnowledgeBase().persist(tmp_path / "kb.jsonl")
    assert len(KnowledgeBase.load(tmp_path / "kb.jsonl")) == 0
    assert len(KnowledgeBase.load(tmp_path / "missing.jsonl")) == 0


def test_seed_round_trip(tmp_path):
    kb = seeded_kb()
    assert len(kb) == 75
    p = kb.persist(tmp_path / "kb.jsonl")
    back = KnowledgeBase.load(p)
    assert [e.to_dict() for e in back.entries] == [e.to_dict() for e in kb.entries]


def test_corrupt_line_skipped(tmp_path):
    kb = _kb(1)
    p = kb.persist(tmp_path / "kb.jsonl")
    lines = p.read_text(encoding="utf-8").splitlines()
    p.write_text("\n".join([lines[0], "{not json", lines[1]]) + "\n", encoding="utf-8")
    back = KnowledgeBase.load(p)
    assert len(back) == 2 and len(back.load_report) == 1 and back.load_report[0].line_no == 2


def test_kind_disagreement_and_duplicate_are_corrupt(tmp_path):
    d = _kb(1).entries[0].to_dict()
    bad_kind = dict(d, kind="no_goals")
    p = tmp_path / "kb.jsonl"
    p.write_text("\n".join(json.dumps(x) for x in (d, bad_kind, d)) + "\n", encoding="utf-8")
    back = KnowledgeBase.load(p)
    assert len(back) == 1 and [c.line_no for c in back.load_report] == [2, 3]


def test_entry_round_trip():
    e = _kb(1).entries[0]
    assert KBEntry.from_dict(e.to_dict()) == e


def test_seed_records_and_stats():
    recs = read_seed_records()
    assert len(recs) == 75
    assert sum(1 for r in recs if r.get("origin") == "case_study") == 4
    stats = seeded_kb().stats()
    assert len(stats) == 13 and sum(stats.values()) == 75
