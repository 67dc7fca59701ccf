"""Store-consistency backends: abduction with failure analysis, and a
finite-domain propagation solver built from scratch."""

from .abductive import AbductiveSolver, abductive_check
from .fd import ConstraintNotEncodable, FDSolver, fd_check

__all__ = [
    "AbductiveSolver",
    "abductive_check",
    "FDSolver",
    "fd_check",
    "ConstraintNotEncodable",
]
