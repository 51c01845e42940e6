"""SOS-convex semialgebraic programming over spectrahedra.

Models nonsmooth convex programs whose pieces are suprema of SOS-convex
polynomial families over spectrahedra, assembles the exact SDP relaxation
and its dual moment problem, solves both with an internal interior-point
method and recovers a provably optimal point from the dual moment vector.
"""

from .poly import (
    MonomialBasis,
    Polynomial,
    basis_size,
    enumerate_basis,
    get_basis,
)
from .sdp import (
    ConeSpec,
    LinExpr,
    Relation,
    SdpBuilder,
    SdpProblem,
    SdpSolution,
    SolveStatus,
    SolverOptions,
    SymMatrix,
    check_feasible,
    export_sdpa,
    min_eig,
    solve,
)

__all__ = [
    "MonomialBasis",
    "Polynomial",
    "basis_size",
    "enumerate_basis",
    "get_basis",
    "ConeSpec",
    "LinExpr",
    "Relation",
    "SdpBuilder",
    "SdpProblem",
    "SdpSolution",
    "SolveStatus",
    "SolverOptions",
    "SymMatrix",
    "check_feasible",
    "export_sdpa",
    "min_eig",
    "solve",
]

__version__ = "0.1.0"
