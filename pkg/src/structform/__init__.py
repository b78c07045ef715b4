"""Structure-to-instance Lean formalization pipeline.

Given a natural-language optimization problem, an abstract-structure Lean
template and a worked example, generate a Lean file that instantiates the
structure, repair it against checker feedback, fill in proofs, clean it up
and score it.
"""

from __future__ import annotations

__version__ = "0.1.0"
