from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from structform.lean.source import INSTANCE, index_declarations
from structform.llm_gateway import Gateway, ScriptedBackend, ScriptRule
from structform.skeleton import (GenerationExhausted, backbone_prompt, build_skeleton, compose_skeleton,
                                 count_declarations)
from structform.templates import Snippets, load_example, load_manifest, load_template, make_template

MINI = make_template("X", "import Mathlib\n\ntheorem t : True := trivial\n", {"t": "T"})
PGM = load_template("PGM")
LASSO = load_manifest().get("pgm_sparse_recovery")


def _gw(*responses):
    return Gateway(ScriptedBackend([ScriptRule(r, sample=i) for i, r in enumerate(responses)]))


def test_compose_starts_with_imports():
    g = _gw("```lean4\nclass P where\n```")
    sk = build_skeleton(LASSO, MINI, "", g)
    assert sk.source.startswith("import Mathlib")
    assert sk.source.count("class P where") == 1
    assert sk.generation_attempt == 1 and sk.provenance == g.last_id


def test_repeated_import_dedup():
    g = _gw("```lean4\nimport Mathlib\n\nclass P where\n```")
    sk = build_skeleton(LASSO, MINI, "", g)
    assert sk.source.count("import Mathlib") == 1


def test_retry_uses_next_sample(tmp_path):
    g = _gw("I cannot help.", "```lean\ndef a := 1\n```")
    sk = build_skeleton(LASSO, MINI, "", g, out_dir=tmp_path)
    assert sk.generation_attempt == 2 and g.calls == 2
    assert (tmp_path / "skeleton_2.lean").read_text(encoding="utf-8") == sk.source


def test_exhausted():
    g = Gateway(ScriptedBackend(responder=lambda p, s: "no code here at all"))
    with pytest.raises(GenerationExhausted):
        build_skeleton(LASSO, MINI, "", g, max_attempts=2)
    assert g.calls == 2


def test_backbone_prompt_has_inputs():
    ex = load_example("pgm_lasso")
    p = backbone_prompt(LASSO, PGM, ex)
    assert LASSO.description in p and PGM.lean_source in p and ex in p


def test_lasso_skeleton_has_pg_instance():
    lasso = load_example("pgm_lasso")
    g = _gw(f"Here.\n```lean4\n{lasso}\n```")
    sk = build_skeleton(LASSO, PGM, lasso, g)
    insts = [s for s in index_declarations(sk.source) if s.category == INSTANCE]
    lines = sk.source.splitlines(keepends=True)
    assert any(s.name == "pg_Lasso.pg" and " pg " in s.text(lines) for s in insts)


def test_count_declarations():
    assert count_declarations("import A\n-- def x\n") == 0
    assert count_declarations("def a := 1\ntheorem b : True := trivial\n") == 2


CODE_LINES = ["import Mathlib", "open Real", "def a := 1", "", "theorem t : True := trivial",
              "  simp", "section S", "end S", "import Other"]


@settings(max_examples=200)
@given(st.lists(st.sampled_from(CODE_LINES), max_size=15),
       st.lists(st.sampled_from(["import Mathlib", "import Other", "open Real", "open Set"]),
                min_size=1, max_size=4, unique=True))
def test_snippet_prefix_invariant(code_lines, snippet_lines):
    snippets = Snippets([s for s in snippet_lines if s.startswith("import")],
                        [s for s in snippet_lines if s.startswith("open")], None, [])
    code = "\n".join(code_lines)
    out = compose_skeleton(snippets, code)
    prefix = snippets.lines()
    assert out.splitlines()[:len(prefix)] == prefix
    assert compose_skeleton(snippets, code) == out
    for s in prefix:
        assert out.splitlines().count(s) == 1
