"""Robust programs under restricted spectrahedron uncertainty.

A robust constraint couples SOS-convex pieces g^(1)..g^(t) with sign-
restricted weights u^(1..t) >= 0 and affine pieces g^(t+1)..g^(s) with free
weights, the weights ranging over a compact LMI-described set.  Embedding the
sign restrictions into the pencil as paired diagonal entries turns each
robust constraint into a supremum over a spectrahedron, so the whole program
reduces to an SOS-convex semialgebraic program and is solved exactly through
its SDP relaxation, recovery included.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .poly import Polynomial
from .relax import ProgramOptions, SolveReport, solve_program
from .sdp import SolverOptions, SymMatrix
from .soscert import Verdict, is_sos_convex
from .spectra import Spectrahedron
from .ssafunc import CertificationError, CertInfo, SsaFunction, SsaProgram, from_polynomial


@dataclass
class UncertainConstraint:
    """g0(x) + sum_j u_j g_j(x) <= 0 for every u in the uncertainty set.

    Pieces g1..g_t must be SOS-convex (their weights are sign-restricted to
    be nonnegative); g_{t+1}..g_s must be affine.  The uncertainty set is
    {u : A0 + sum u_j A_j >= 0, u_1..u_t >= 0} and must be nonempty and
    bounded.
    """

    g: list[Polynomial]
    t: int
    U: list[SymMatrix]
    _embedded: Spectrahedron | None = field(default=None, repr=False)

    def __post_init__(self):
        s = len(self.g) - 1
        if not 0 <= self.t <= s:
            raise ValueError(f"sign split t={self.t} out of range 0..{s}")
        if len(self.U) != s + 1:
            raise ValueError(f"need {s + 1} uncertainty matrices, got {len(self.U)}")
        self.U = [M if isinstance(M, SymMatrix) else SymMatrix.from_full(M)
                  for M in self.U]
        for j in range(0, self.t + 1):
            res = is_sos_convex(self.g[j])
            if res.verdict is not Verdict.YES:
                raise CertificationError(
                    f"piece g^({j}) must be SOS-convex but certification "
                    f"returned {res.verdict.value}")
        for j in range(self.t + 1, s + 1):
            if self.g[j].degree > 1:
                raise CertificationError(
                    f"piece g^({j}) carries a sign-free weight and must be "
                    f"affine (degree {self.g[j].degree})")
        # embedding validates nonemptiness and boundedness of the set
        self._embedded = embed_uncertainty(self)

    @property
    def s(self) -> int:
        return len(self.g) - 1

    @property
    def n(self) -> int:
        return self.g[0].n

    def uncertainty_set(self) -> Spectrahedron:
        return self._embedded

    def evaluate(self, x, u) -> float:
        u = np.asarray(u, dtype=float)
        v = float(self.g[0].evaluate(x))
        for j in range(self.s):
            v += u[j] * float(self.g[j + 1].evaluate(x))
        return v


def embed_uncertainty(c: UncertainConstraint) -> Spectrahedron:
    """Fold the sign restrictions u_1..u_t >= 0 into the pencil as paired
    diagonal blocks diag(e_j)."""
    t_i, s = c.t, c.s
    q = c.U[0].dim

    def emb(M, j):
        out = np.zeros((t_i + q, t_i + q))
        out[t_i:, t_i:] = M
        if 1 <= j <= t_i:
            out[j - 1, j - 1] = 1.0
        return out

    A = [SymMatrix.from_full(emb(c.U[0].full(), 0))]
    A += [SymMatrix.from_full(emb(c.U[j].full(), j)) for j in range(1, s + 1)]
    return Spectrahedron(A, validate=True)


@dataclass
class RobustProgram:
    objective: Polynomial
    constraints: list[UncertainConstraint]

    def __post_init__(self):
        res = is_sos_convex(self.objective)
        if res.verdict is not Verdict.YES:
            raise CertificationError(
                f"objective must be SOS-convex but certification returned "
                f"{res.verdict.value}")
        n = self.objective.n
        if any(c.n != n for c in self.constraints):
            raise ValueError("all pieces must share the variable count")

    @property
    def n(self) -> int:
        return self.objective.n


def to_ssa_program(rp: RobustProgram) -> SsaProgram:
    """Each robust constraint becomes sup over its embedded spectrahedron."""
    f0 = from_polynomial(rp.objective, certify=False)
    f0.certified = CertInfo(policy="structural", checked=1,
                            detail="objective certified at construction")
    constraints = []
    for c in rp.constraints:
        cert = CertInfo(policy="structural", checked=c.t + 1,
                        detail="sign-restricted SOS-convex pieces, affine tail")
        constraints.append(SsaFunction(list(c.g), c.uncertainty_set(), cert=cert))
    return SsaProgram(f0, constraints)


def verify_robust(x, rp: RobustProgram, samples: int = 50,
                  seed: int = 0, opts: SolverOptions | None = None) -> np.ndarray:
    """Worst sampled violation per constraint.

    Scenarios mix extreme points of the uncertainty set (linear optimization
    along random directions) with random convex combinations of them.
    """
    rng = np.random.default_rng(seed)
    x = np.asarray(x, dtype=float)
    margins = np.zeros(len(rp.constraints))
    for k, c in enumerate(rp.constraints):
        om = c.uncertainty_set()
        extremes = []
        n_dirs = max(2, samples // 3)
        for _ in range(n_dirs):
            d = rng.normal(size=om.m)
            extremes.append(om.maximize_linear(d, opts).y)
        us = list(extremes)
        while len(us) < samples:
            w = rng.dirichlet(np.ones(len(extremes)))
            us.append(np.tensordot(w, np.stack(extremes), axes=(0, 0)))
        margins[k] = max(c.evaluate(x, u) for u in us)
    return margins


def solve_robust(rp: RobustProgram,
                 opts: ProgramOptions | None = None,
                 samples: int = 50, seed: int = 0) -> tuple[SolveReport, np.ndarray | None]:
    """Reduce, solve, and sample-check robust feasibility of the solution."""
    prog = to_ssa_program(rp)
    report = solve_program(prog, opts)
    margins = None
    if report.x_star is not None:
        sdp_opts = opts.sdp if opts is not None else None
        margins = verify_robust(report.x_star, rp, samples=samples,
                                seed=seed, opts=sdp_opts)
    return report, margins
