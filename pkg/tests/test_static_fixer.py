from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corpus import TRIGGERS, corpus_sources, mutations
from structform.lean.lexer import mask
from structform.static_fixer import (RULES, apply_rules, close_open_sections, dedup_imports, describe_rules,
                                     drop_unused_variables, normalize_unicode, remove_debug_commands,
                                     remove_empty_sections, strip_fences)


def test_empty_section_removed():
    assert apply_rules("section A\nend A")[0] == ""
    assert remove_empty_sections("section A\n\nend A\n") == ""
    assert remove_empty_sections("section A\n-- keep\nend A\n") == "section A\n-- keep\nend A\n"


def test_duplicate_imports():
    out, applied = apply_rules("import Mathlib\nimport Mathlib\n\ndef a := 1\n")
    assert out.count("import Mathlib") == 1 and applied == ["dedup_imports"]


def test_open_dedup_respects_scope():
    src = "open Real\nsection S\nopen Real\nend S\nopen Real\n"
    assert dedup_imports(src) == "open Real\nsection S\nend S\n"
    src2 = "section S\nopen Real\nend S\nopen Real\n"
    assert dedup_imports(src2) == src2


@pytest.mark.parametrize("name", sorted(corpus_sources()))
def test_shipped_sources_unchanged(name):
    src = corpus_sources()[name]
    assert apply_rules(src) == (src, [])


def test_fences_and_debug():
    assert strip_fences("```lean4\ndef a := 1\n```\n") == "def a := 1\n"
    assert remove_debug_commands("#check foo\n  bar\ndef a := 1\n#eval 2\n") == "def a := 1\n"


def test_unused_variables():
    src = "variable (x : ℕ) (y : ℕ) [inst : Foo]\ndef a := y\n"
    assert drop_unused_variables(src) == "variable (y : ℕ) [inst : Foo]\ndef a := y\n"
    assert drop_unused_variables("variable {z : ℕ}\ndef a := 1\n") == "def a := 1\n"
    assert drop_unused_variables("variable (x : ℕ) -- note\ndef a := 1\n") == "-- note\ndef a := 1\n"


def test_unicode_whitelist_code_only():
    src = 'def f : \\R -> \\R := id -- a -> b\ndef s := "x -> y"\n'
    out = normalize_unicode(src)
    assert out.splitlines()[0] == "def f : ℝ → ℝ := id -- a -> b"
    assert out.splitlines()[1] == 'def s := "x -> y"'
    assert normalize_unicode("a <-> b | x ->> y") == "a <-> b | x ->> y"


def test_close_open_sections():
    assert close_open_sections("namespace A\nsection B\ndef a := 1") == "namespace A\nsection B\ndef a := 1\nend B\nend A\n"
    assert close_open_sections("section\n") == "section\nend\n"


def test_describe_rules():
    d = describe_rules()
    assert [r["id"] for r in d] == [r.id for r in RULES]
    assert all(r["description"] and r["match"] and r["action"] for r in d)


@pytest.mark.parametrize("name,src", mutations(120, seed=7))
def test_idempotent_on_mutations(name, src):
    once, _ = apply_rules(src)
    assert apply_rules(once) == (once, [])


@settings(max_examples=300)
@given(st.lists(st.sampled_from(TRIGGERS + ["def a := 1", "theorem t : True := by", "  trivial"]), max_size=20))
def test_idempotent_property(lines):
    once, _ = apply_rules("\n".join(lines))
    assert apply_rules(once)[0] == once


COMMENTS = ["-- import Mathlib", "-- #check x", "-- \\R -> ℝ", "/- section A\nend A -/", "-- ```"]


@settings(max_examples=300)
@given(st.lists(st.sampled_from(TRIGGERS + ["def a := 1"]), max_size=15),
       st.lists(st.tuples(st.integers(0, 15), st.sampled_from(COMMENTS)), max_size=4))
def test_comments_survive(code_lines, comments):
    lines = list(code_lines)
    for pos, c in comments:
        lines.insert(min(pos, len(lines)), c)
    src = "\n".join(lines) + "\n"
    out, _ = apply_rules(src)

    def noncode(text):
        m = mask(text)
        return "".join(ch for ch, k in zip(text, m.code) if not k and ch != "\n")

    assert noncode(out).replace(" ", "") == noncode(src).replace(" ", "")
