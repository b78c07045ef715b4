"""Regenerate src/structform/data/kb_seed/seed.jsonl.

Entries tagged origin=case_study are transcribed error/fix pairs; everything
tagged origin=synthesized is a hand-written placeholder with a realistic
message for its kind.
"""

from __future__ import annotations

import json
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src/structform/data/kb_seed/seed.jsonl"

WHY = {
    "syntax_error": "The parser now sees a complete, well-formed command, so elaboration can start.",
    "type_mismatch": "Both sides now have the same type, so the elaborator accepts the term without coercions.",
    "failed_to_synthesize": "With the types made explicit, instance search finds the required instance.",
    "invalid_field": "The projection is applied to a term whose head constant owns the field.",
    "unknown_identifier": "The name now resolves to a declaration that is in scope.",
    "unexpected_token": "Balanced delimiters let the parser finish the previous command before the next keyword.",
    "unknown_constant": "The proof refers to a lemma that exists in the pinned library version.",
    "unclassified": "The declaration elaborates without leaving internal state unresolved.",
    "missing_definition": "Every field of the structure instance now has a value.",
    "timeout": "The goal is closed by a targeted lemma instead of an expensive search.",
    "no_goals": "No tactic runs after the goal is already closed.",
    "apply_failed": "The lemma's conclusion now unifies syntactically with the goal.",
    "incomplete_proof": "The remaining goal is discharged, so the proof term is complete.",
}

CASE_STUDY = [
    ("failed_to_synthesize", "Failed to synthesize",
     "failed to synthesize HSub (Fin m → ℝ) (EuclideanSpace ℝ (Fin m)) ?m.7571\n"
     "Additional diagnostic information may be available using the `set_option diagnostics true` command.",
     "def Balanced_wavelet_problem.f (self : Balanced_wavelet_problem W A b lam κ) (α : EuclideanSpace ℝ (Fin n)) : ℝ :=\n"
     "  let I_n : Matrix (Fin n) (Fin n) ℝ := 1\n"
     "  let P : Matrix (Fin n) (Fin n) ℝ := I_n - W * Wᵀ\n"
     "  let term1 : ℝ := (κ / 2) * ‖P *ᵥ α‖₂ ^ 2\n"
     "  let term2 : ℝ := (1 / 2) * ‖A *ᵥ (Wᵀ *ᵥ α) - b ‖₂ ^ 2\n"
     "term1 + term2",
     "def Balanced_wavelet_problem.f (self : Balanced_wavelet_problem W A b lam κ) (α : EuclideanSpace ℝ (Fin n)) : ℝ :=\n"
     "  let I_n : Matrix (Fin n) (Fin n) ℝ := 1\n"
     "  let P : Matrix (Fin n) (Fin n) ℝ := I_n - W * Wᵀ\n"
     "  let term1 : ℝ := (κ / 2) * ‖P *ᵥ α‖₂ ^ 2\n"
     "  let term2 : ℝ := (1 / 2) * ‖A *ᵥ (Wᵀ *ᵥ α) - (b : EuclideanSpace ℝ (Fin m))‖₂ ^ 2\n"
     "term1 + term2",
     "b has no type ascription, so the subtraction mixes Fin m → ℝ with EuclideanSpace ℝ (Fin m).",
     "Ascribe b the type EuclideanSpace ℝ (Fin m)."),
    ("unexpected_token", "Syntax error (parenthesis mismatch)",
     "unexpected token 'def'; expected ')', ',' or ':'",
     "def SparseLogisticRegression_problem.f (self : SparseLogisticRegression_problem A b lambda) : EuclideanSpace ℝ (Fin n) → ℝ :=\n"
     "  fun x ↦ ∑ i, Real.log (1 + Real.exp (-b i * (A i ⬝ᵥ x))",
     "def SparseLogisticRegression_problem.f (self : SparseLogisticRegression_problem A b lambda) : EuclideanSpace ℝ (Fin n) → ℝ :=\n"
     "  fun x ↦ ∑ i, Real.log (1 + Real.exp (-b i * (A i ⬝ᵥ x)))",
     "The Real.log application opens a parenthesis that is never closed.",
     "Append the missing closing parenthesis."),
    ("type_mismatch", "Type mismatch",
     "don't know how to synthesize implicit argument 'δ'\n"
     "  @huber_loss (?m.2688 f self x i) (A i ⬝ᵥ x - b i)\n"
     "context:\nm n : ℕ\nA : Matrix (Fin m) (Fin n) ℝ\nb : Fin m → ℝ\nδ lam : ℝ\n"
     "self : RobustRegression_Huber_L1_problem A b δ lam\nx : EuclideanSpace ℝ (Fin n)\ni : Fin m\n⊢ ℝ",
     "def RobustRegression_Huber_L1_problem.f (self : RobustRegression_Huber_L1_problem A b δ lam) : EuclideanSpace ℝ (Fin n) → ℝ :=\n"
     "  fun x ↦ ∑ i, huber_loss (A i ⬝ᵥ x - b i)",
     "def RobustRegression_Huber_L1_problem.f (self : RobustRegression_Huber_L1_problem A b δ lam) : EuclideanSpace ℝ (Fin n) → ℝ :=\n"
     "  fun x ↦ ∑ i, huber_loss δ (A i ⬝ᵥ x - b i)",
     "huber_loss takes the threshold δ explicitly; omitting it leaves an argument Lean cannot infer.",
     "Pass δ before the residual."),
    ("invalid_field", "Invalid field notation",
     "invalid field notation, function 'LinearMap.toContinuousLinearMap' does not have argument with type "
     "(LinearMap ...) that can be used, it must be explicit or implicit with a unique name",
     "def TV_denoising.A₁ (self : TV_denoising n m lam D b) : EuclideanSpace ℝ (Fin n) →L[ℝ] EuclideanSpace ℝ (Fin m) :=\n"
     "  (Matrix.mulVecLin D).toContinuousLinearMap",
     "def TV_denoising.A₁ (self : TV_denoising n m lam D b) : EuclideanSpace ℝ (Fin n) →L[ℝ] EuclideanSpace ℝ (Fin m) :=\n"
     "  LinearMap.toContinuousLinearMap (Matrix.mulVecLin D)",
     "toContinuousLinearMap is a linear equivalence, not a function with a LinearMap argument usable by dot notation.",
     "Apply LinearMap.toContinuousLinearMap as a function."),
]

# (message, faulty, fixed, root cause, fix description)
SYN = {
    "syntax_error": [
        ("unexpected identifier; expected command", "  hA : A ≠ 0\nhmu : mu > 0", "  hA : A ≠ 0\n  hmu : mu > 0",
         "A structure field lost its indentation and reads as a new command.", "Indent the field."),
        ("unexpected end of input; expected ')'", "def f (x : ℝ := (x + 1", "def f (x : ℝ) : ℝ := (x + 1)",
         "The binder and the body are both left open at end of file.", "Close both parentheses."),
        ("expected term", "def g (x : ℝ) : ℝ :=", "def g (x : ℝ) : ℝ := x",
         "The definition body is empty.", "Supply the body."),
        ("expected ':=', 'where' or '|'", "def Lasso_pro.g (_ : Lasso_pro A b mu) : EuclideanSpace ℝ (Fin n) → ℝ\n  fun x ↦ mu * ‖x‖₁",
         "def Lasso_pro.g (_ : Lasso_pro A b mu) : EuclideanSpace ℝ (Fin n) → ℝ :=\n  fun x ↦ mu * ‖x‖₁",
         "The := separating the signature from the body is missing.", "Insert :=."),
        ("unterminated comment", "/- gradient of f\ndef grad := 0", "/- gradient of f -/\ndef grad := 0",
         "A block comment is never closed and swallows the rest of the file.", "Close the comment."),
        ("invalid 'end', insufficient scopes", "end WAVELET\nend WAVELET", "end WAVELET",
         "The section is closed twice.", "Remove the extra end."),
        ("invalid 'end', name mismatch", "noncomputable section LASSO\n\nend Lasso", "noncomputable section LASSO\n\nend LASSO",
         "The end name differs from the section name.", "Match the section name."),
        ("expected '↦', '=>'", "fun x, x + 1", "fun x ↦ x + 1",
         "Lean 3 lambda syntax was used.", "Use the Lean 4 arrow."),
        ("unexpected end of input", "theorem t : True := by\n  exact (trivial", "theorem t : True := by\n  exact trivial",
         "An opening parenthesis runs past the end of the file.", "Drop the stray parenthesis."),
        ("expected ',' or ')'", "(hA : A ≠ 0 (hmu : mu > 0)", "(hA : A ≠ 0) (hmu : mu > 0)",
         "Two binders run together without a closing parenthesis.", "Close the first binder."),
        ("unexpected identifier; expected ':=', 'where' or '|'", "theorem conv (alg : pg_Lasso pro x₀)\n  xm : E :",
         "theorem conv (alg : pg_Lasso pro x₀)\n  (xm : E) :",
         "An explicit binder is written without parentheses.", "Parenthesize the binder."),
        ("expected type", "variable {x₀ : }", "variable {x₀ : EuclideanSpace ℝ (Fin n)}",
         "A binder has an empty type.", "Give the binder its type."),
        ("unterminated string literal", "local notation \"‖\" x \"‖₂ => ‖x‖", "local notation \"‖\" x \"‖₂\" => ‖x‖",
         "A notation token lost its closing quote.", "Close the string literal."),
        ("unexpected '⟩'; expected term", "exact ⟨x0, , h⟩", "exact ⟨x0, h_min, h⟩",
         "An anonymous constructor has an empty component.", "Fill in the missing component."),
        ("expected ']'", "rw [mul_comm, add_comm", "rw [mul_comm, add_comm]",
         "The rewrite list is not closed.", "Close the bracket."),
        ("unexpected identifier; expected '(', '[', '{' or '⦃'", "instance foo self : pg pro x₀ where",
         "instance foo (self : pg_Lasso pro x₀) : pg pro x₀ where",
         "An instance argument is given without a binder.", "Bracket and type the argument."),
        ("expected 'then'", "if ‖y‖₂ ≤ t * mu 0 else y", "if ‖y‖₂ ≤ t * mu then 0 else y",
         "The conditional is missing its then keyword.", "Insert then."),
        ("unexpected 'fun'; expected term", "x (k + 1) = fun i ↦ fun", "x (k + 1) = fun i ↦ w k i",
         "A lambda has no body.", "Complete the lambda body."),
        ("expected '|'", "match groupOf j with\n  none => w k j", "match groupOf j with\n  | none => w k j",
         "Match alternatives need a leading bar.", "Prefix each alternative with |."),
        ("unexpected ':='; expected term", "def l := := 1", "def l := 1",
         "The assignment token is doubled.", "Remove the duplicate :=."),
        ("expected ':'", "structure P where\n  (hA A ≠ 0)", "structure P where\n  (hA : A ≠ 0)",
         "A field binder lost its colon.", "Restore the colon."),
    ],
    "type_mismatch": [
        ("type mismatch\n  h\nhas type\n  x ∈ Set.univ : Prop\nbut is expected to have type\n  x ∈ s : Prop",
         "exact h", "exact hs", "The hypothesis is about the wrong set.", "Use the hypothesis about s."),
        ("application type mismatch\n  HasGradientAt pro.f\nargument\n  pro.f\nhas type\n  EuclideanSpace ℝ (Fin n) → ℝ : Type\n"
         "but is expected to have type\n  (Fin n → ℝ) → ℝ : Type", "HasGradientAt pro.f g x", "HasGradientAt pro.f g (x : EuclideanSpace ℝ (Fin n))",
         "The point lives in Fin n → ℝ while f is defined on EuclideanSpace.", "Ascribe the point type."),
        ("type mismatch\n  lam • x k\nhas type\n  EuclideanSpace ℝ (Fin n) : Type\nbut is expected to have type\n  Fin n → ℝ : Type",
         "Aᵀ *ᵥ v + lam • x k", "let v' : EuclideanSpace ℝ (Fin n) := Aᵀ *ᵥ v\n    v' + lam • x k",
         "The matrix-vector product returns a plain function type.", "Bind the product at the Euclidean type first."),
        ("type mismatch\n  self.update_cor\nhas type\n  ∀ (k : ℕ), prox_prop _ _ _ : Prop\nbut is expected to have type\n  ∀ (k : ℕ+), prox_prop _ _ _ : Prop",
         "update2 := self.update_cor", "update2 := fun k ↦ self.update_cor k",
         "The quantifier ranges over different index types.", "Adapt the index with a lambda."),
        ("don't know how to synthesize placeholder for argument 'f'\ncontext:\nx : EuclideanSpace ℝ (Fin n)\n⊢ EuclideanSpace ℝ (Fin n) → ℝ",
         "exact HasGradientAt.gradient _", "exact HasGradientAt.gradient (pro.hasGradient x)",
         "The function argument cannot be inferred from the goal.", "Supply the gradient witness explicitly."),
        ("type mismatch\n  1 / pro.l\nhas type\n  NNReal : Type\nbut is expected to have type\n  ℝ : Type",
         "teq : ∀ n : ℕ, t n = 1 / pro.l", "teq : ∀ n : ℕ, t n = 1 / (pro.l : ℝ)",
         "The step size is real while l is a nonnegative real.", "Coerce l to ℝ."),
        ("type mismatch\n  x 0\nhas type\n  Fin n → ℝ : Type\nbut is expected to have type\n  EuclideanSpace ℝ (Fin n) : Type",
         "initial : x 0 = x₀", "initial : (x 0 : EuclideanSpace ℝ (Fin n)) = x₀",
         "The iterate is declared at the function type.", "Declare the sequence in EuclideanSpace."),
        ("application type mismatch\n  pg_converge xm L\nargument\n  L\nhas type\n  ℝ : Type\nbut is expected to have type\n  NNReal : Type",
         "apply pg_converge xm L", "apply pg_converge xm ⟨L, hL.le⟩",
         "The Lipschitz constant must be an NNReal.", "Package L with its nonnegativity proof."),
        ("type mismatch\n  hz\nhas type\n  pro.H z ≥ 0 : Prop\nbut is expected to have type\n  0 ≤ pro.H z : Prop",
         "exact hz", "exact ge_iff_le.mp hz", "The inequality direction is stated differently.", "Rewrite with ge_iff_le."),
        ("type mismatch\n  ht\nhas type\n  t > 0 : Prop\nbut is expected to have type\n  0 < alg.t : Prop",
         "tpos := ht", "tpos := self.ht", "The field refers to the bare t instead of the projection.", "Use the projection."),
        ("don't know how to synthesize implicit argument 'l'\n  @Nesterov_first_fix_stepsize E _ _ _ _ f h ?l pro x₀",
         "Nesterov_first_fix_stepsize pro x₀", "Nesterov_first_fix_stepsize (l := pro.l) pro x₀",
         "The step-size constant is implicit and not determined by other arguments.", "Pass l by name."),
        ("type mismatch\n  Real.sign (y k i) * max (|y k i| - t * lambda) 0\nhas type\n  ℝ : Type\nbut is expected to have type\n  EuclideanSpace ℝ (Fin n) : Type",
         "x (k + 1) = Real.sign (y k i) * max (|y k i| - t * lambda) 0",
         "∀ i, x (k + 1) i = Real.sign (y k i) * max (|y k i| - t * lambda) 0",
         "A coordinate formula is equated with the whole vector.", "Quantify over coordinates."),
        ("type mismatch\n  rfl\nhas type\n  ?a = ?a : Prop\nbut is expected to have type\n  pro.target = pro.f + pro.g : Prop",
         "exact rfl", "unfold Wavelet_model.target; rfl", "The definition must be unfolded before rfl applies.", "Unfold the target first."),
        ("application type mismatch\n  ConvexOn ℝ univ pro.g\nargument\n  univ\nhas type\n  Set (Fin n → ℝ) : Type\nbut is expected to have type\n  Set (EuclideanSpace ℝ (Fin n)) : Type",
         "ConvexOn ℝ (univ : Set (Fin n → ℝ)) pro.g", "ConvexOn ℝ univ pro.g",
         "The ascription forces the universe set at the wrong carrier type.", "Drop the ascription."),
        ("type mismatch\n  h.le\nhas type\n  lam ≤ 0 : Prop\nbut is expected to have type\n  0 ≤ lam : Prop",
         "exact h.le", "exact le_of_lt pro.hlam", "The wrong hypothesis was weakened.", "Use the positivity field."),
        ("don't know how to synthesize implicit argument 'n'\n  @EuclideanSpace ℝ (Fin ?n)",
         "def x0 : EuclideanSpace ℝ (Fin _) := 0", "def x0 (n : ℕ) : EuclideanSpace ℝ (Fin n) := 0",
         "The dimension is never bound.", "Bind the dimension explicitly."),
        ("type mismatch\n  alg.z\nhas type\n  ℕ → EuclideanSpace ℝ (Fin n) × EuclideanSpace ℝ (Fin m) : Type\nbut is expected to have type\n  ℕ → WithLp 2 (EuclideanSpace ℝ (Fin n) × EuclideanSpace ℝ (Fin m)) : Type",
         "z := fun k ↦ (x k, y k)", "z := fun k ↦ (WithLp.equiv 2 _).symm (x k, y k)",
         "The product needs the L2 wrapper to carry the right norm.", "Wrap with WithLp.equiv."),
        ("type mismatch\n  pro.lbdf\nhas type\n  BddBelow (pro.f '' univ) : Prop\nbut is expected to have type\n  BddBelow (f '' univ) : Prop",
         "lbdf := pro.lbdf", "lbdf := by simpa using pro.lbdf", "The two image sets differ only by unfolding.", "Close with simpa."),
    ],
    "failed_to_synthesize": [
        ("failed to synthesize\n  HAdd (EuclideanSpace ℝ (Fin n)) (Fin n → ℝ) ?m.812",
         "Aᵀ *ᵥ d + lam • x k", "(WithLp.equiv 2 _).symm (Aᵀ *ᵥ d) + lam • x k",
         "The two summands live in different types.", "Move the matrix product into EuclideanSpace."),
        ("failed to synthesize\n  InnerProductSpace ℝ (Fin n → ℝ)",
         "variable {x : Fin n → ℝ}\n#check ⟪x, x⟫_ℝ", "variable {x : EuclideanSpace ℝ (Fin n)}",
         "Plain function spaces carry no inner product instance.", "Use EuclideanSpace."),
        ("failed to synthesize\n  Decidable (groupOf j = some g)",
         "if groupOf j = some g then x j else 0", "open Classical in\nif groupOf j = some g then x j else 0",
         "Equality on Option (Fin G) needs a decidability instance in this context.", "Open Classical."),
        ("failed to synthesize\n  OfScientific ℕ",
         "γeq : ∀ n : ℕ, γ n = 2.0 / (2 + n)", "γeq : ∀ n : ℕ, γ n = 2 / (2 + n)",
         "A decimal literal is elaborated at type ℕ.", "Use an integer literal."),
        ("failed to synthesize\n  CompleteSpace E",
         "variable {E : Type*} [NormedAddCommGroup E] [InnerProductSpace ℝ E]",
         "variable {E : Type*} [NormedAddCommGroup E] [InnerProductSpace ℝ E] [CompleteSpace E]",
         "The template theorem requires completeness.", "Add the CompleteSpace binder."),
        ("failed to synthesize\n  HSMul ℝ (Matrix (Fin m) (Fin n) ℝ) ?m.3021",
         "t • A", "t • (A *ᵥ x)", "Scalar multiplication was applied to the matrix instead of the vector.", "Scale the vector."),
    ],
    "invalid_field": [
        ("invalid field 'l', the environment does not contain 'Lasso_pro.l'\n  pro",
         "ht2 : alg.t ≤ 1 / pro.l", "def Lasso_pro.l (_ : Lasso_pro A b mu) : NNReal := |‖Aᵀ * A|‖",
         "The Lipschitz constant is used but never defined.", "Define Lasso_pro.l."),
        ("invalid field 'ConvexOn_g', the environment does not contain 'Wavelet_model.ConvexOn_g'\n  pro",
         "pro.ConvexOn_g", "lemma Wavelet_model.ConvexOn_g (pro : Wavelet_model M b lam) :\n    ConvexOn ℝ univ pro.g := by\n  sorry",
         "The final theorem cites a lemma that was never stated.", "State the lemma."),
        ("invalid field notation, type is not of the form (C ...) where C is a constant\n  alg",
         "alg.x k", "(alg : pg_Lasso pro x₀).x k", "The variable's type is a metavariable at this point.", "Annotate the binder type."),
        ("invalid projection, structure expected\n  self.t",
         "self.t.1", "self.t", "The field is a real number, not a structure.", "Drop the projection."),
        ("invalid field 'proximal_gradient_method', the environment does not contain 'pg_Lasso.proximal_gradient_method'\n  alg",
         "alg.proximal_gradient_method", "alg.pg", "The instance is named pg, not proximal_gradient_method.", "Use the declared instance name."),
        ("invalid field 'diff_f', the environment does not contain 'Group_Lasso_problem.diff_f'\n  pro",
         "pro.diff_f", "lemma Group_Lasso_problem.diff_f (pro : Group_Lasso_problem A b lam G group_index) :\n    Differentiable ℝ pro.f := by\n  sorry",
         "The differentiability lemma is missing.", "Add it."),
    ],
    "unknown_identifier": [
        ("unknown identifier 'huber_loss'", "fun x ↦ ∑ i, huber_loss δ (A i ⬝ᵥ x - b i)",
         "def huber_loss (δ r : ℝ) : ℝ := if |r| ≤ δ then r ^ 2 / 2 else δ * (|r| - δ / 2)\n\nfun x ↦ ∑ i, huber_loss δ (A i ⬝ᵥ x - b i)",
         "The loss is used before it is defined.", "Define huber_loss first."),
        ("unknown identifier 'prox_prop'", "update : ∀ k, prox_prop (t • h) (x k) (x (k + 1))",
         "import Optlib.Function.Proximal\n\nupdate : ∀ k, prox_prop (t • h) (x k) (x (k + 1))",
         "The proximal predicate lives in a module that is not imported.", "Import it."),
        ("unknown identifier 'affine_sq_gradient'", "apply affine_sq_gradient", "apply Optlib.affine_sq_gradient",
         "The lemma is namespaced.", "Qualify the name."),
        ("unknown identifier 'x₀'", "initial : x 0 = x₀", "variable {x₀ : EuclideanSpace ℝ (Fin n)}\n\ninitial : x 0 = x₀",
         "The initial point is never bound.", "Declare it as a variable."),
        ("unknown identifier 'sign'", "x (k + 1) i = sign (y k i)", "x (k + 1) i = Real.sign (y k i)",
         "sign is not opened in this scope.", "Use Real.sign."),
        ("unknown identifier 'ψ'", "BddBelow (ψ '' univ)", "BddBelow (alg.ψ '' univ)",
         "The objective is a projection of the algorithm structure.", "Project through alg."),
        ("unknown identifier 'critical_point'", "z_ ∈ critical_point alg.ψ", "z_ ∈ critial_point alg.ψ",
         "The library spells the critical-point set differently.", "Use the library's name."),
    ],
    "unexpected_token": [
        ("unexpected token 'at'; expected command", "rw [h] at\n\ntheorem t", "rw [h] at h2\n\ntheorem t",
         "The rewrite location is empty.", "Name the hypothesis."),
        ("unexpected token ':='; expected '↦', '=>'", "fun x := x + 1", "fun x ↦ x + 1",
         "A lambda uses := instead of the arrow.", "Use ↦."),
        ("unexpected token 'theorem'; expected term", "lemma l : True :=\n\ntheorem t : True := trivial",
         "lemma l : True := trivial\n\ntheorem t : True := trivial", "A lemma body is empty.", "Fill in the body."),
    ],
    "unknown_constant": [
        ("unknown constant 'Matrix.l2_opNorm_mulVec'", "apply Matrix.l2_opNorm_mulVec (Mᵀ * M)",
         "exact Matrix.l2_opNorm_mulVec (Mᵀ * M) _", "The lemma name differs in the pinned library version.", "Use the available lemma."),
        ("unknown constant 'Real.add_pow_le_pow_mul_pow_of_sq_le_sq'", "exact Real.add_pow_le_pow_mul_pow_of_sq_le_sq _ _",
         "nlinarith [sq_nonneg (a - b)]", "The cited lemma does not exist.", "Prove the inequality with nlinarith."),
    ],
    "unclassified": [
        ("maximum recursion depth has been reached\nuse `set_option maxRecDepth <num>` to increase limit",
         "simp [Wavelet_model.f, Wavelet_model.target]", "unfold Wavelet_model.target\nsimp only [Wavelet_model.f]",
         "simp loops on mutually unfolding definitions.", "Unfold once and use simp only."),
        ("(kernel) declaration has metavariables 'Lasso_convergence'",
         "apply proximal_gradient_converge _ _", "apply proximal_gradient_converge xm pro.l",
         "Underscores left unresolved arguments in the final term.", "Supply the arguments."),
    ],
    "missing_definition": [
        ("fields missing: 'update', 'initial'", "instance pg_Lasso.pg (self : pg_Lasso pro x₀) : pg (Lasso_pro.composite_pro pro) x₀ where\n  t := self.t\n  x := self.x",
         "instance pg_Lasso.pg (self : pg_Lasso pro x₀) : pg (Lasso_pro.composite_pro pro) x₀ where\n  t := self.t\n  x := self.x\n  initial := self.initial\n  update := by sorry",
         "The instance omits two fields of pg.", "Provide both fields."),
        ("fields missing: 'lscf₂'", "instance : OptProblem f₁ f₂ A₁ A₂ b where\n  lscf₁ := h1",
         "instance : OptProblem f₁ f₂ A₁ A₂ b where\n  lscf₁ := h1\n  lscf₂ := h2", "One semicontinuity field is missing.", "Add it."),
    ],
    "timeout": [
        ("(deterministic) timeout at `whnf`, maximum number of heartbeats (200000) has been reached\n"
         "use `set_option maxHeartbeats <num>` to set the limit",
         "simp [Matrix.mulVec, dotProduct, Finset.sum_comm]", "rw [Matrix.mulVec_sub]",
         "An unrestricted simp set explodes on matrix sums.", "Rewrite with the specific lemma."),
    ],
    "no_goals": [
        ("no goals to be proved", "  linarith\n  simp", "  linarith",
         "A tactic runs after the goal is already closed.", "Delete the trailing tactic."),
    ],
    "apply_failed": [
        ("tactic 'apply' failed to unify\n  ConvexOn ℝ univ ?f\nwith\n  ConvexOn ℝ Set.univ fun d ↦ ‖fun i ↦ lam i * d i‖₁",
         "apply convexOn_norm", "unfold Wavelet_model.g\napply ConvexOn.comp_linearMap convexOn_norm",
         "The goal is a norm composed with a linear map, not a bare norm.", "Compose with the linear map first."),
    ],
    "incomplete_proof": [
        ("unsolved goals\nx : EuclideanSpace ℝ (Fin n)\n⊢ 0 ≤ ‖x‖", "  apply mul_nonneg\n  exact le_of_lt pro.hlambda1",
         "  apply mul_nonneg\n  exact le_of_lt pro.hlambda1\n  exact norm_nonneg _",
         "The second premise of mul_nonneg is left open.", "Close it with norm_nonneg."),
    ],
}

TYPE_LABEL = {
    "syntax_error": "Syntax error", "type_mismatch": "Type mismatch", "failed_to_synthesize": "Failed to synthesize",
    "invalid_field": "Invalid field", "unknown_identifier": "Unknown identifier", "unexpected_token": "Unexpected token",
    "unknown_constant": "Unknown constant", "unclassified": "Unclassified", "missing_definition": "Missing definition",
    "timeout": "Timeout", "no_goals": "No goals", "apply_failed": "Apply failed", "incomplete_proof": "Incomplete proof",
}


def main() -> None:
    rows = []
    for kind, label, msg, faulty, fixed, root, fix in CASE_STUDY:
        rows.append(dict(kind=kind, message=msg, faulty_snippet=faulty, fixed_snippet=fixed,
                         explanation=dict(error_type=label, root_cause=root, fix_description=fix, why_it_works=WHY[kind]),
                         origin="case_study"))
    for kind, items in SYN.items():
        for msg, faulty, fixed, root, fix in items:
            rows.append(dict(kind=kind, message=msg, faulty_snippet=faulty, fixed_snippet=fixed,
                             explanation=dict(error_type=TYPE_LABEL[kind], root_cause=root, fix_description=fix,
                                              why_it_works=WHY[kind]),
                             origin="synthesized"))
    OUT.parent.mkdir(parents=True, exist_ok=True)
    with open(OUT, "w", encoding="utf-8") as fh:
        for r in rows:
            fh.write(json.dumps(r, ensure_ascii=False) + "\n")
    print(f"wrote {len(rows)} entries to {OUT}")


if __name__ == "__main__":
    main()
