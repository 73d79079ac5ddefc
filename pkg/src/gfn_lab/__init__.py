"""Numerical laboratory for diffeomorphism-invariant algebras of
generalized functions: mollifiers, distribution embeddings, the pullback
action on representatives, and epsilon-asymptotic moderateness and
negligibility testing."""

__version__ = "0.1.0"
