from .certificate import DualCertificate, dump_problem, primal_residual, verify_certificate
from .ipm import SDPSolution, solve
from .problem import Affine, LMIBlock, ProblemBuilder, SDPProblem, collapse, embed

__all__ = [
    "Affine",
    "DualCertificate",
    "LMIBlock",
    "ProblemBuilder",
    "SDPProblem",
    "SDPSolution",
    "collapse",
    "dump_problem",
    "embed",
    "primal_residual",
    "solve",
    "verify_certificate",
]
