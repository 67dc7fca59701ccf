"""prefail: prove that a query on a definite logic program cannot succeed.

The prover searches finite pre-interpretations for one whose least model
falsifies the query, then emits an independently checkable certificate.
"""

__version__ = "0.1.0"
