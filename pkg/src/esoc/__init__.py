"""Exact metric projection onto extended second order cones."""

from .core import (AmbientPoint, ConeDims, DimensionError, EsocError,
                   Membership, MoreauCertificate, in_L, in_M,
                   moreau_certificate, neg_part, pos_part, stable_norm)
from .projector import (Case, ProjectionError, ProjectionResult, classify,
                        project_L, project_M, project_soc)
from .psi import (Method, PsiProblem, SolverConfig, SolverError, SolveTrace,
                  Status, bisection_solve, enumerate_solve, newton_solve,
                  picard_solve, psi_eval, psi_subgradient, solve)

__version__ = "0.1.0"
