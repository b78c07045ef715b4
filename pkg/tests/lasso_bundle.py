"""Scripted model and mock checker fixtures for the Lasso end-to-end trace.

The trace, per stage:

* generation: one backbone completion, whose definition of ``Lasso_pro.l`` is broken;
* backbone correction: one fix (clean on recheck) plus one explanation;
* proof generation: three attempts; the first proves ``Lasso_pro.ConvexOn_f``
  with a typo, the other two return the file unchanged;
* proof correction: one fix for the typo plus one explanation;
* harmless fixing: nothing to do; back-translation: one call.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from structform.lean.checker import write_fixture
from structform.llm_gateway import ScriptedBackend, ScriptRule
from structform.repair import normalize_source
from structform.skeleton import compose_skeleton
from structform.static_fixer import apply_rules
from structform.templates import load_example, load_manifest, load_template

PROBLEM_ID = "pgm_sparse_recovery"

GOOD_L = "def Lasso_pro.l (_ : Lasso_pro A b mu) : NNReal := |‖Aᵀ * A|‖"
BAD_L = "def Lasso_pro.l (_ : Lasso_pro A b mu) : NNReal := ‖Aᵀ * A‖₊"

SORRIED_CONVEX = """lemma Lasso_pro.ConvexOn_f (self : Lasso_pro A b mu) :
    ConvexOn ℝ Set.univ self.f := by
  sorry"""
TYPO_CONVEX = """lemma Lasso_pro.ConvexOn_f (self : Lasso_pro A b mu) :
    ConvexOn ℝ Set.univ self.f := by
  unfold Lasso_pro.f
  exact convex_on_affine_sq A b"""
PROVED_CONVEX = """lemma Lasso_pro.ConvexOn_f (self : Lasso_pro A b mu) :
    ConvexOn ℝ Set.univ self.f := by
  unfold Lasso_pro.f
  exact convexOn_affine_sq A b"""

EXPLANATION = ("Error Type: {t}\nRoot Cause: {r}\nFix Description: {f}\n"
               "Why It Works: the corrected term has the type the statement expects.")
REPORT = r"""\begin{definition}[Lasso problem]
Minimize $\frac12\|Ax-b\|_2^2 + \mu\|x\|_1$.
\end{definition}
\begin{lemma}[Convexity of $f$]
$f$ is convex.
\end{lemma}
\begin{proof}
Proof incomplete: the smooth part is an affine square.
\end{proof}
"""


@dataclass
class LassoBundle:
    backend: ScriptedBackend
    fixture_dir: Path
    skeleton: str
    backbone: str
    proved: str
    expected_calls: dict
    expected_explainer_calls: int


def _fence(code: str) -> str:
    return f"Here is the file.\n```lean4\n{code}\n```\n"


def make_bundle(fixture_dir: Path) -> LassoBundle:
    manifest = load_manifest()
    problem = manifest.get(PROBLEM_ID)
    template = load_template(problem.template_ref)
    lasso = load_example("pgm_lasso")
    assert GOOD_L in lasso and SORRIED_CONVEX in lasso

    completion = lasso.replace(GOOD_L, BAD_L)
    skeleton = compose_skeleton(template.snippets, completion)
    fixed_skel = normalize_source(apply_rules(skeleton)[0])
    bad_line = fixed_skel.splitlines().index(BAD_L) + 1
    write_fixture(fixture_dir, fixed_skel,
                  f"Main.lean:{bad_line}:52: error: failed to synthesize\n"
                  f"  Norm (Matrix (Fin n) (Fin n) ℝ)\n"
                  f"Additional diagnostic information may be available using the `set_option diagnostics true` command.\n")
    backbone = fixed_skel.replace(BAD_L, GOOD_L)

    typo = backbone.replace(SORRIED_CONVEX, TYPO_CONVEX)
    typo_line = typo.splitlines().index("  exact convex_on_affine_sq A b") + 1
    write_fixture(fixture_dir, typo,
                  f"Main.lean:{typo_line}:8: error: unknown identifier 'convex_on_affine_sq'\n")
    proved = backbone.replace(SORRIED_CONVEX, PROVED_CONVEX)

    rules = [
        ScriptRule(_fence(completion), contains=("strictly following the structure",)),
        ScriptRule(_fence(backbone), contains=("[Full Current Code]", BAD_L)),
        ScriptRule(_fence(proved), contains=("[Full Current Code]", "convex_on_affine_sq")),
        ScriptRule(EXPLANATION.format(t="Failed to synthesize", r="no norm instance on matrices",
                                      f="use the operator norm notation"),
                   contains=("Error Type", BAD_L)),
        ScriptRule(EXPLANATION.format(t="Unknown identifier", r="misspelled lemma name",
                                      f="use the Mathlib spelling"),
                   contains=("Error Type", "convex_on_affine_sq")),
        ScriptRule(_fence(typo), contains=("REPLACE ALL",), sample=0),
        ScriptRule(_fence(proved), contains=("REPLACE ALL",)),
        ScriptRule(REPORT, contains=("LaTeX technical report",)),
    ]
    expected = {"generation": 1, "backbone_correction": 1, "proof_generation": 3, "proof_correction": 1,
                "harmless_fixing": 0, "backtranslation": 1, "scoring": 0}
    return LassoBundle(ScriptedBackend(rules), fixture_dir, skeleton, backbone, proved, expected, 2)
