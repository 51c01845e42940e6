"""Exact SDP relaxation of SOS-convex semialgebraic programs and its dual.

For a program  min f0(x) s.t. f_i(x) <= 0  with every piece of the form
sup_{y in Omega_i} {h0^i + sum_j y_j h_j^i}, the relaxation maximizes mu
subject to

    h0^0 + sum_j lam_j^0 h_j^0 + sum_i (lam_0^i h0^i + sum_j lam_j^i h_j^i) - mu

being a sum of squares (Gram block W) while (lam^0, z^0) and the homogenized
(lam_0^i, lam^i, z^i) satisfy the index sets' pencils.  The conic dual is a
moment problem over y in R^{s(d,n)} with y_1 = 1, M_{d/2}(y) PSD and one PSD
multiplier Z_i per index set; an optimal point of the original program is
read off the optimal moment vector as x*_k = y*_{k+1}.

Pieces are padded to a common index dimension m; padding pins the new
coordinates to zero and provably changes neither optimal values nor the
optimal moment set.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .poly import Polynomial, basis_size, get_basis, gram_pairs
from .sdp import (
    LinExpr,
    Relation,
    SdpBuilder,
    SdpProblem,
    SdpSolution,
    SolveStatus,
    SolverOptions,
)
from . import sdp as _sdp
from .soscert import Verdict, is_sos_convex
from .spectra import Spectrahedron
from .ssafunc import SlaterWitness, SsaFunction, SsaProgram, find_slater


class SlaterError(RuntimeError):
    """No strictly feasible point was found and none was assumed."""


# ---------------------------------------------------------------------------
# moment machinery
# ---------------------------------------------------------------------------


def moment_matrix(y, r: int, n: int | None = None) -> np.ndarray:
    """The s(r,n) x s(r,n) matrix with (beta,gamma) entry y at
    position(i(beta) + i(gamma))."""
    y = np.asarray(y, dtype=float)
    if n is None:
        n = _infer_vars(len(y), 2 * r)
    if len(y) != basis_size(n, 2 * r):
        raise ValueError(f"moment vector has length {len(y)}, expected "
                         f"{basis_size(n, 2 * r)}")
    full = get_basis(n, 2 * r)
    half = get_basis(n, r)
    M = np.empty((half.size, half.size))
    for b, eb in enumerate(half.exponents):
        for g in range(b, half.size):
            a = full.index[tuple(x + z for x, z in zip(eb, half.exponents[g]))]
            M[b, g] = M[g, b] = y[a]
    return M


def _infer_vars(length: int, d: int) -> int:
    from .poly import MAX_VARS

    for n in range(1, MAX_VARS + 1):
        if basis_size(n, d) == length:
            return n
    raise ValueError(f"no variable count matches a length-{length} "
                     f"degree-{d} moment vector")


@dataclass
class MomentVector:
    """Pseudo-moment sequence y over the degree-2r basis with y_1 = 1."""

    y: np.ndarray
    r: int
    n: int

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        if len(self.y) != basis_size(self.n, 2 * self.r):
            raise ValueError("moment vector length does not match (n, 2r)")

    @classmethod
    def dirac(cls, x, d: int) -> "MomentVector":
        """Moments of a point mass: y_alpha = x^{i(alpha)}."""
        x = np.asarray(x, dtype=float)
        if d % 2 != 0:
            raise ValueError("degree must be even")
        basis = get_basis(len(x), d)
        y = np.array([np.prod(x ** np.array(e)) for e in basis.exponents])
        return cls(y, d // 2, len(x))

    def matrix(self) -> np.ndarray:
        return moment_matrix(self.y, self.r, self.n)

    def validate(self, tol: float = 1e-8) -> bool:
        if abs(self.y[0] - 1.0) > tol:
            return False
        return float(np.linalg.eigvalsh(self.matrix())[0]) >= -tol

    def point(self) -> np.ndarray:
        """First-order moments (L_y(X_1), ..., L_y(X_n))."""
        return self.y[1: self.n + 1].copy()


def riesz(moments: MomentVector, u: Polynomial) -> float:
    """L_y(u) = sum_alpha u_alpha y_alpha."""
    if u.n != moments.n:
        raise ValueError("variable counts differ")
    d = 2 * moments.r
    if u.degree > d:
        raise ValueError(f"degree {u.degree} exceeds the moment degree {d}")
    return float(u.pad_to_degree(d).coeffs @ moments.y)


def jensen_gap(moments: MomentVector, f: Polynomial, cert=None) -> float:
    """L_y(f) - f(L_y(X_1), ..., L_y(X_n)); nonnegative for certified f."""
    if cert is None:
        res = is_sos_convex(f)
        if res.verdict is not Verdict.YES:
            raise ValueError(f"polynomial is not certified SOS-convex "
                             f"({res.verdict.value})")
    return riesz(moments, f) - float(f.evaluate(moments.point()))


# ---------------------------------------------------------------------------
# padding to the common index dimension
# ---------------------------------------------------------------------------


def _pad_program(prog: SsaProgram) -> list[SsaFunction]:
    pieces = prog.pieces()
    m = max(f.m for f in pieces)
    out = []
    for f in pieces:
        if f.m == m:
            out.append(f)
            continue
        h = list(f.h) + [Polynomial.zero(f.n) for _ in range(m - f.m)]
        out.append(SsaFunction(h, f.omega.pad(m), cert=f.certified))
    return out


def _kept(piece: SsaFunction) -> bool:
    return piece.m > 0 or piece.omega.p > 0


def _tri(t: int):
    for i in range(t):
        for j in range(i + 1):
            yield i, j


def _entry(t: int, i: int, j: int) -> np.ndarray:
    E = np.zeros((t, t))
    if i == j:
        E[i, i] = 1.0
    else:
        E[i, j] = E[j, i] = 0.5
    return E


# ---------------------------------------------------------------------------
# primal assembly
# ---------------------------------------------------------------------------


@dataclass
class PrimalRelaxation:
    problem: SdpProblem
    n: int
    d: int
    m: int
    s: int
    gram_block: int
    omega_blocks: list[int | None]
    mu_idx: int
    lam_free: list[list[int]]     # per piece, the R^m multipliers
    lam0_nonneg: list[int]        # per constraint (i >= 1)
    z_free: list[list[int]]
    coeff_rows: list[int]         # one per basis position alpha
    tie_rows: list[list[int]]

    def multipliers(self, sol: SdpSolution):
        """(mu, per-piece lambda vectors, per-constraint lambda_0)."""
        mu = float(sol.point.free[self.mu_idx])
        lams = [np.array([sol.point.free[k] for k in idx]) for idx in self.lam_free]
        lam0 = np.array([sol.point.nonneg[k] for k in self.lam0_nonneg])
        return mu, lams, lam0

    def gram_matrix(self, sol: SdpSolution) -> np.ndarray:
        return sol.point.psd[self.gram_block]


def build_primal(prog: SsaProgram) -> PrimalRelaxation:
    pieces = _pad_program(prog)
    n, d = prog.n, prog.d
    r = d // 2
    full = get_basis(n, d)
    half = get_basis(n, r)
    pairs = gram_pairs(n, d)
    s = len(pieces) - 1
    m = pieces[0].m

    hc = []  # per piece: (m+1, s(d,n)) coefficient rows
    for f in pieces:
        hc.append(np.stack([p.pad_to_degree(d).coeffs for p in f.h]))

    bld = SdpBuilder()
    gram_block = bld.add_psd(half.size)
    omega_blocks: list[int | None] = []
    for f in pieces:
        omega_blocks.append(bld.add_psd(f.omega.t) if _kept(f) else None)

    (mu_idx,) = bld.add_free(1)
    lam_free, lam0_nonneg, z_free = [], [], []
    for i, f in enumerate(pieces):
        if i > 0:
            lam0_nonneg.append(bld.add_nonneg(1)[0])
        lam_free.append(bld.add_free(m))
        z_free.append(bld.add_free(f.omega.p))

    coeff_rows = []
    for a in range(full.size):
        ex = LinExpr()
        for i, f in enumerate(pieces):
            if i > 0 and hc[i][0, a]:
                ex.add_nonneg(lam0_nonneg[i - 1], float(hc[i][0, a]))
            for j in range(m):
                if hc[i][j + 1, a]:
                    ex.add_free(lam_free[i][j], float(hc[i][j + 1, a]))
        if a == 0:
            ex.add_free(mu_idx, -1.0)
        M = np.zeros((half.size, half.size))
        for bta, gma in pairs[a]:
            M[bta, gma] += 1.0
        ex.add_psd(gram_block, -M)
        coeff_rows.append(bld.add_eq(ex, -float(hc[0][0, a])))

    tie_rows: list[list[int]] = []
    for i, f in enumerate(pieces):
        rows = []
        if omega_blocks[i] is not None:
            om = f.omega
            for ii, jj in _tri(om.t):
                ex = LinExpr().add_psd(omega_blocks[i], _entry(om.t, ii, jj))
                rhs = 0.0
                if i == 0:
                    rhs = float(om._A_full[0][ii, jj])
                else:
                    if om._A_full[0][ii, jj]:
                        ex.add_nonneg(lam0_nonneg[i - 1],
                                      -float(om._A_full[0][ii, jj]))
                for j in range(m):
                    if om._A_full[j + 1][ii, jj]:
                        ex.add_free(lam_free[i][j], -float(om._A_full[j + 1][ii, jj]))
                for l in range(om.p):
                    if om._B_full[l][ii, jj]:
                        ex.add_free(z_free[i][l], -float(om._B_full[l][ii, jj]))
                rows.append(bld.add_eq(ex, rhs))
        tie_rows.append(rows)

    bld.maximize(LinExpr().add_free(mu_idx, 1.0))
    return PrimalRelaxation(bld.build(), n, d, m, s, gram_block, omega_blocks,
                            mu_idx, lam_free, lam0_nonneg, z_free,
                            coeff_rows, tie_rows)


# ---------------------------------------------------------------------------
# dual (moment) assembly
# ---------------------------------------------------------------------------


@dataclass
class DualRelaxation:
    problem: SdpProblem
    n: int
    d: int
    m: int
    s: int
    moment_block: int
    z_blocks: list[int | None]
    y_free: list[int]
    norm_row: int
    ineq_rows: list[int]
    coupling_rows: list[list[int]]  # per piece, one row per j = 1..m
    bmat_rows: list[list[int]]
    tie_rows: list[int]

    def extract_moment(self, sol: SdpSolution) -> MomentVector:
        y = np.array([sol.point.free[k] for k in self.y_free])
        return MomentVector(y, self.d // 2, self.n)

    def z_matrices(self, sol: SdpSolution) -> list[np.ndarray | None]:
        return [None if b is None else sol.point.psd[b] for b in self.z_blocks]


def build_dual(prog: SsaProgram) -> DualRelaxation:
    pieces = _pad_program(prog)
    n, d = prog.n, prog.d
    r = d // 2
    full = get_basis(n, d)
    half = get_basis(n, r)
    s = len(pieces) - 1
    m = pieces[0].m

    hc = []
    for f in pieces:
        hc.append(np.stack([p.pad_to_degree(d).coeffs for p in f.h]))

    bld = SdpBuilder()
    moment_block = bld.add_psd(half.size)
    z_blocks: list[int | None] = []
    for f in pieces:
        z_blocks.append(bld.add_psd(f.omega.t) if _kept(f) else None)
    y_free = bld.add_free(full.size)

    def riesz_expr(coeffs) -> LinExpr:
        ex = LinExpr()
        for a in np.nonzero(coeffs)[0]:
            ex.add_free(y_free[a], float(coeffs[a]))
        return ex

    norm_row = bld.add_eq(LinExpr().add_free(y_free[0], 1.0), 1.0)

    ineq_rows = []
    for i in range(1, s + 1):
        ex = riesz_expr(hc[i][0])
        if z_blocks[i] is not None:
            ex.add_psd(z_blocks[i], pieces[i].omega._A_full[0])
        ineq_rows.append(bld.add_ineq(ex, 0.0, Relation.LE))

    coupling_rows: list[list[int]] = []
    for i, f in enumerate(pieces):
        rows = []
        for j in range(m):
            ex = riesz_expr(hc[i][j + 1])
            if z_blocks[i] is not None:
                ex.add_psd(z_blocks[i], f.omega._A_full[j + 1])
            rows.append(bld.add_eq(ex, 0.0))
        coupling_rows.append(rows)

    bmat_rows: list[list[int]] = []
    for i, f in enumerate(pieces):
        rows = []
        for l in range(f.omega.p):
            ex = LinExpr().add_psd(z_blocks[i], f.omega._B_full[l])
            rows.append(bld.add_eq(ex, 0.0))
        bmat_rows.append(rows)

    tie_rows = []
    for bta, gma in _tri(half.size):
        a = full.index[tuple(x + z for x, z in zip(half.exponents[bta],
                                                   half.exponents[gma]))]
        ex = LinExpr().add_psd(moment_block, _entry(half.size, bta, gma))
        ex.add_free(y_free[a], -1.0)
        tie_rows.append(bld.add_eq(ex, 0.0))

    ob = riesz_expr(hc[0][0])
    if z_blocks[0] is not None:
        ob.add_psd(z_blocks[0], pieces[0].omega._A_full[0])
    bld.minimize(ob)
    return DualRelaxation(bld.build(), n, d, m, s, moment_block, z_blocks,
                          y_free, norm_row, ineq_rows, coupling_rows,
                          bmat_rows, tie_rows)


# ---------------------------------------------------------------------------
# recovery and end-to-end solve
# ---------------------------------------------------------------------------


RECOVERY_MARGIN = 1e-8


def recover(rel: DualRelaxation, sol: SdpSolution) -> np.ndarray:
    """Optimal point from the dual moments: x*_k = y*_{k+1}."""
    if sol.status is not SolveStatus.OPTIMAL:
        raise ValueError(f"dual relaxation not solved to optimality "
                         f"({sol.status.value})")
    return rel.extract_moment(sol).point()


def check_recovery_condition(prog: SsaProgram,
                             opts: SolverOptions | None = None) -> tuple[bool, str]:
    """Interior condition on every index set's pencil (pre-padding)."""
    for i, f in enumerate(prog.pieces()):
        t = f.omega.strict_interior_margin(opts)
        if t <= RECOVERY_MARGIN:
            return False, (f"index set of piece {i} has no strictly feasible "
                           f"pencil point (margin {t:.2e})")
    return True, ""


@dataclass(frozen=True)
class ProgramOptions:
    sdp: SolverOptions = SolverOptions()
    assume_slater: bool = False
    recovery: bool = True
    slater_hint: tuple | None = None


@dataclass
class SolveReport:
    status: str  # "optimal" | "infeasible_or_unbounded" | "numerical_failure"
    val_primal: float
    val_dual: float
    x_star: np.ndarray | None
    margins: np.ndarray | None
    objective_gap: float | None
    moment: MomentVector | None
    primal_status: SolveStatus
    dual_status: SolveStatus
    iterations: tuple[int, int]
    wallclock_ms: float
    slater: SlaterWitness | None = None
    recovery_ok: bool = False
    recovery_reason: str = ""
    gap_flag: bool = False
    warnings: list[str] = field(default_factory=list)


GAP_TOL = 1e-5
MARGIN_TOL = 1e-6


def solve_program(prog: SsaProgram,
                  opts: ProgramOptions | None = None) -> SolveReport:
    """Both relaxations end to end, with solution recovery and verification."""
    opts = opts or ProgramOptions()
    t0 = time.perf_counter()
    warnings: list[str] = []

    slater = None
    if opts.assume_slater:
        warnings.append("strict feasibility assumed, not verified")
    else:
        slater = find_slater(prog, hint=opts.slater_hint, opts=opts.sdp)
        if slater is None:
            raise SlaterError("no strictly feasible point found; pass "
                              "assume_slater to proceed anyway")

    rel_p = build_primal(prog)
    sol_p = _sdp.solve(rel_p.problem, opts.sdp)
    rel_d = build_dual(prog)
    sol_d = _sdp.solve(rel_d.problem, opts.sdp)

    bad = {SolveStatus.PRIMAL_INFEASIBLE, SolveStatus.DUAL_INFEASIBLE}
    if sol_p.status in bad or sol_d.status in bad:
        status = "infeasible_or_unbounded"
    elif (sol_p.status is not SolveStatus.OPTIMAL
          or sol_d.status is not SolveStatus.OPTIMAL):
        status = "numerical_failure"
    else:
        status = "optimal"

    report = SolveReport(
        status=status,
        val_primal=sol_p.primal_value,
        val_dual=sol_d.primal_value,
        x_star=None,
        margins=None,
        objective_gap=None,
        moment=None,
        primal_status=sol_p.status,
        dual_status=sol_d.status,
        iterations=(sol_p.iterations, sol_d.iterations),
        wallclock_ms=0.0,
        slater=slater,
        warnings=warnings,
    )
    if status != "optimal":
        report.wallclock_ms = (time.perf_counter() - t0) * 1e3
        return report

    report.moment = rel_d.extract_moment(sol_d)
    report.gap_flag = (abs(report.val_primal - report.val_dual)
                       > GAP_TOL * (1.0 + abs(report.val_dual)))
    if report.gap_flag:
        warnings.append("primal/dual relaxation values disagree beyond tolerance")

    if opts.recovery:
        ok, reason = check_recovery_condition(prog, opts.sdp)
        if ok:
            report.x_star = recover(rel_d, sol_d)
            report.recovery_ok = True
            report.margins = prog.margins(report.x_star, opts.sdp)
            f0 = prog.objective.eval(report.x_star, opts.sdp)
            report.objective_gap = abs(f0 - report.val_dual)
            if report.margins.size and report.margins.max() > MARGIN_TOL:
                warnings.append("recovered point violates a constraint "
                                "beyond tolerance")
        else:
            report.recovery_reason = reason
            warnings.append(f"recovery withheld: {reason}")
    else:
        report.recovery_reason = "recovery disabled"

    report.wallclock_ms = (time.perf_counter() - t0) * 1e3
    return report
