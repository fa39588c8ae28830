"""Logically constrained term rewriting: translation from a C subset,
rewriting induction for equivalence proofs, and constraint solving."""

__version__ = "0.1.0"
