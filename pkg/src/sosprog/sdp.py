"""Conic problems with PSD matrix blocks, nonnegative and free scalars.

Problems are stated as linear equality/inequality constraints over a product
cone and solved by the dense interior-point engine in ipm.py.  The PSD part
of every linear functional is given by symmetric coefficient matrices paired
with the variable blocks through the trace inner product Tr[MN].
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import ipm

# Problem-size caps for the dense factorizations.
MAX_PSD_DIM = 200
MAX_ROWS = 5000

FREE_SPLIT_REG = 1e-8


class SdpInputError(ValueError):
    """Ill-posed problem data (NaN/Inf coefficients, bad dimensions)."""


# ---------------------------------------------------------------------------
# symmetric matrices
# ---------------------------------------------------------------------------


def _pack_lower(M: np.ndarray) -> np.ndarray:
    t = M.shape[0]
    idx = np.tril_indices(t)
    return M[idx].copy()


def _unpack_lower(dim: int, lower: np.ndarray) -> np.ndarray:
    M = np.zeros((dim, dim))
    M[np.tril_indices(dim)] = lower
    return M + np.tril(M, -1).T


class SymMatrix:
    """Real symmetric matrix stored as its packed lower triangle."""

    __slots__ = ("dim", "lower")

    def __init__(self, dim: int, lower: np.ndarray):
        lower = np.asarray(lower, dtype=float)
        if lower.shape != (dim * (dim + 1) // 2,):
            raise ValueError(f"lower triangle of a {dim}x{dim} matrix needs "
                             f"{dim * (dim + 1) // 2} entries, got {lower.shape}")
        lower = lower.copy()
        lower.flags.writeable = False
        self.dim = dim
        self.lower = lower

    @classmethod
    def from_full(cls, M, tol: float = 1e-10) -> "SymMatrix":
        M = np.asarray(M, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {M.shape}")
        if not np.all(np.isfinite(M)):
            raise SdpInputError("matrix has non-finite entries")
        skew = np.abs(M - M.T).max(initial=0.0)
        if skew > tol * (1.0 + np.abs(M).max(initial=0.0)):
            raise ValueError(f"matrix is not symmetric (skew {skew:.3e})")
        return cls(M.shape[0], _pack_lower((M + M.T) / 2.0))

    @classmethod
    def zeros(cls, dim: int) -> "SymMatrix":
        return cls(dim, np.zeros(dim * (dim + 1) // 2))

    @classmethod
    def identity(cls, dim: int) -> "SymMatrix":
        return cls.from_full(np.eye(dim))

    def full(self) -> np.ndarray:
        return _unpack_lower(self.dim, self.lower)

    def eigenvalues(self) -> np.ndarray:
        """All eigenvalues, sorted descending."""
        return np.linalg.eigvalsh(self.full())[::-1].copy()

    def norm(self) -> float:
        return float(np.linalg.norm(self.full()))

    def __eq__(self, other) -> bool:
        if not isinstance(other, SymMatrix):
            return NotImplemented
        return self.dim == other.dim and np.array_equal(self.lower, other.lower)

    def __repr__(self) -> str:
        return f"SymMatrix(dim={self.dim})"


def min_eig(M) -> float:
    """Smallest eigenvalue of a symmetric matrix (SymMatrix or array)."""
    A = M.full() if isinstance(M, SymMatrix) else np.asarray(M, dtype=float)
    if A.size == 0:
        return 0.0
    return float(np.linalg.eigvalsh((A + A.T) / 2.0)[0])


# ---------------------------------------------------------------------------
# problem description
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConeSpec:
    psd_dims: tuple[int, ...] = ()
    nonneg: int = 0
    free: int = 0

    def __post_init__(self):
        if any(t < 1 for t in self.psd_dims):
            raise ValueError("PSD block dims must be >= 1")
        if self.nonneg < 0 or self.free < 0:
            raise ValueError("scalar counts must be >= 0")


class Relation(enum.Enum):
    LE = "<="
    GE = ">="


@dataclass
class LinExpr:
    """Linear functional on the scalarized variable of a ConeSpec."""

    psd: dict[int, np.ndarray] = field(default_factory=dict)
    nonneg: dict[int, float] = field(default_factory=dict)
    free: dict[int, float] = field(default_factory=dict)

    def add_psd(self, block: int, mat) -> "LinExpr":
        mat = np.asarray(mat, dtype=float)
        mat = (mat + mat.T) / 2.0
        if block in self.psd:
            self.psd[block] = self.psd[block] + mat
        else:
            self.psd[block] = mat
        return self

    def add_nonneg(self, idx: int, coef: float) -> "LinExpr":
        self.nonneg[idx] = self.nonneg.get(idx, 0.0) + float(coef)
        return self

    def add_free(self, idx: int, coef: float) -> "LinExpr":
        self.free[idx] = self.free.get(idx, 0.0) + float(coef)
        return self

    def value(self, point: "ConePoint") -> float:
        v = 0.0
        for b, mat in self.psd.items():
            v += float(np.tensordot(mat, point.psd[b]))
        for i, c in self.nonneg.items():
            v += c * point.nonneg[i]
        for i, c in self.free.items():
            v += c * point.free[i]
        return v

    def is_finite(self) -> bool:
        return (
            all(np.all(np.isfinite(m)) for m in self.psd.values())
            and all(map(math.isfinite, self.nonneg.values()))
            and all(map(math.isfinite, self.free.values()))
        )


@dataclass
class ConePoint:
    """A point of the scalarized variable space."""

    psd: list[np.ndarray]
    nonneg: np.ndarray
    free: np.ndarray

    def scalarized(self) -> np.ndarray:
        parts = [_pack_lower(X) for X in self.psd]
        parts.append(self.nonneg)
        parts.append(self.free)
        return np.concatenate(parts) if parts else np.zeros(0)


@dataclass
class SdpProblem:
    cone: ConeSpec
    objective: LinExpr
    sense: str = "min"
    eq_constraints: list[tuple[LinExpr, float]] = field(default_factory=list)
    ineq_constraints: list[tuple[LinExpr, float, Relation]] = field(default_factory=list)

    def __post_init__(self):
        if self.sense not in ("min", "max"):
            raise ValueError(f"sense must be 'min' or 'max', got {self.sense!r}")
        self._validate()

    def _validate(self):
        exprs = [self.objective]
        exprs += [e for e, _ in self.eq_constraints]
        exprs += [e for e, _, _ in self.ineq_constraints]
        rhss = [r for _, r in self.eq_constraints] + [r for _, r, _ in self.ineq_constraints]
        if not all(map(math.isfinite, rhss)):
            raise SdpInputError("non-finite right-hand side")
        for e in exprs:
            if not e.is_finite():
                raise SdpInputError("non-finite coefficient in a linear functional")
            for b, mat in e.psd.items():
                if b < 0 or b >= len(self.cone.psd_dims):
                    raise SdpInputError(f"bad PSD block index {b}")
                t = self.cone.psd_dims[b]
                if mat.shape != (t, t):
                    raise SdpInputError(f"coefficient for block {b} has shape "
                                        f"{mat.shape}, expected {(t, t)}")
            for i in e.nonneg:
                if not 0 <= i < self.cone.nonneg:
                    raise SdpInputError(f"bad nonneg index {i}")
            for i in e.free:
                if not 0 <= i < self.cone.free:
                    raise SdpInputError(f"bad free index {i}")

    @property
    def n_rows(self) -> int:
        return len(self.eq_constraints) + len(self.ineq_constraints)


class SdpBuilder:
    """Incremental construction of an SdpProblem."""

    def __init__(self):
        self.psd_dims: list[int] = []
        self.nonneg = 0
        self.free = 0
        self.eqs: list[tuple[LinExpr, float]] = []
        self.ineqs: list[tuple[LinExpr, float, Relation]] = []
        self.objective = LinExpr()
        self.sense = "min"

    def add_psd(self, dim: int) -> int:
        self.psd_dims.append(dim)
        return len(self.psd_dims) - 1

    def add_nonneg(self, count: int = 1) -> list[int]:
        idx = list(range(self.nonneg, self.nonneg + count))
        self.nonneg += count
        return idx

    def add_free(self, count: int = 1) -> list[int]:
        idx = list(range(self.free, self.free + count))
        self.free += count
        return idx

    def add_eq(self, expr: LinExpr, rhs: float) -> int:
        self.eqs.append((expr, float(rhs)))
        return len(self.eqs) - 1

    def add_ineq(self, expr: LinExpr, rhs: float, rel: Relation) -> int:
        self.ineqs.append((expr, float(rhs), rel))
        return len(self.ineqs) - 1

    def minimize(self, expr: LinExpr):
        self.objective, self.sense = expr, "min"

    def maximize(self, expr: LinExpr):
        self.objective, self.sense = expr, "max"

    def build(self) -> SdpProblem:
        return SdpProblem(
            cone=ConeSpec(tuple(self.psd_dims), self.nonneg, self.free),
            objective=self.objective,
            sense=self.sense,
            eq_constraints=self.eqs,
            ineq_constraints=self.ineqs,
        )


# ---------------------------------------------------------------------------
# solving
# ---------------------------------------------------------------------------


class SolveStatus(enum.Enum):
    OPTIMAL = "Optimal"
    PRIMAL_INFEASIBLE = "PrimalInfeasible"
    DUAL_INFEASIBLE = "DualInfeasible"  # unbounded objective
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass(frozen=True)
class SolverOptions:
    gap_tol: float = 1e-8
    feas_tol: float = 1e-8
    max_iter: int = 200
    step_frac: float = 0.98
    inf_tol: float = 1e-10
    inf_consecutive: int = 5
    free_reg: float = FREE_SPLIT_REG
    trace: bool = False
    verbose: bool = False


@dataclass
class SdpSolution:
    status: SolveStatus
    primal_value: float
    dual_value: float
    point: ConePoint | None
    dual_eq: np.ndarray
    dual_ineq: np.ndarray
    iterations: int
    info: dict = field(default_factory=dict)

    @property
    def variables(self) -> np.ndarray:
        return self.point.scalarized() if self.point is not None else np.zeros(0)

    @property
    def dual_multipliers(self) -> np.ndarray:
        return np.concatenate([self.dual_eq, self.dual_ineq])


@dataclass
class _BackMap:
    """Bookkeeping to map a standardized solution back to the user problem."""

    sense_sign: float
    nonneg: int
    free: int
    n_eq: int
    n_ineq: int
    # lp layout: [user nonneg][free u][free v][slacks]
    u_off: int
    v_off: int
    slack_off: int


def _standardize(p: SdpProblem, reg: float) -> tuple[ipm.StandardConic, _BackMap]:
    """Rewrite into min <C,X> s.t. A(X)=b, X in PSD^k x R^q_+.

    Inequality rows get slacks; free scalars are split u-v with a mild
    regularization on the split halves.
    """
    sign = 1.0 if p.sense == "min" else -1.0
    q0 = p.cone.nonneg
    f = p.cone.free
    n_eq = len(p.eq_constraints)
    n_ineq = len(p.ineq_constraints)
    q = q0 + 2 * f + n_ineq
    dims = list(p.cone.psd_dims)
    m = n_eq + n_ineq
    if any(t > MAX_PSD_DIM for t in dims):
        raise SdpInputError(f"PSD block exceeds cap {MAX_PSD_DIM}")
    if m > MAX_ROWS:
        raise SdpInputError(f"{m} rows exceed cap {MAX_ROWS}")

    u_off, v_off, slack_off = q0, q0 + f, q0 + 2 * f
    A_psd = [np.zeros((m, t, t)) for t in dims]
    A_lp = np.zeros((m, q))
    b = np.zeros(m)

    def fill_row(i: int, expr: LinExpr, rhs: float):
        for blk, mat in expr.psd.items():
            A_psd[blk][i] = mat
        for j, c in expr.nonneg.items():
            A_lp[i, j] = c
        for j, c in expr.free.items():
            A_lp[i, u_off + j] = c
            A_lp[i, v_off + j] = -c
        b[i] = rhs

    for i, (expr, rhs) in enumerate(p.eq_constraints):
        fill_row(i, expr, rhs)
    for k, (expr, rhs, rel) in enumerate(p.ineq_constraints):
        i = n_eq + k
        fill_row(i, expr, rhs)
        A_lp[i, slack_off + k] = 1.0 if rel is Relation.LE else -1.0

    C_psd = [np.zeros((t, t)) for t in dims]
    c_lp = np.zeros(q)
    for blk, mat in p.objective.psd.items():
        C_psd[blk] = sign * mat
    for j, c in p.objective.nonneg.items():
        c_lp[j] = sign * c
    for j, c in p.objective.free.items():
        c_lp[u_off + j] = sign * c
        c_lp[v_off + j] = -sign * c
    c_lp[u_off: v_off] += reg
    c_lp[v_off: slack_off] += reg

    sc = ipm.StandardConic(psd_dims=dims, lp_dim=q, A_psd=A_psd, A_lp=A_lp,
                           b=b, C_psd=C_psd, c_lp=c_lp)
    back = _BackMap(sense_sign=sign, nonneg=q0, free=f, n_eq=n_eq,
                    n_ineq=n_ineq, u_off=u_off, v_off=v_off, slack_off=slack_off)
    return sc, back


def solve(p: SdpProblem, opts: SolverOptions | None = None) -> SdpSolution:
    """Solve the conic program; deterministic for fixed inputs and options."""
    opts = opts or SolverOptions()
    sc, back = _standardize(p, opts.free_reg)
    raw = ipm.solve_standard(sc, opts)
    sign = back.sense_sign

    info = dict(raw.info)
    if raw.status is ipm.Status.OPTIMAL:
        tau = raw.tau
        psd = [X / tau for X in raw.Xp]
        lp = raw.Xl / tau
        point = ConePoint(
            psd=psd,
            nonneg=lp[: back.nonneg].copy(),
            free=lp[back.u_off: back.v_off] - lp[back.v_off: back.slack_off],
        )
        primal = p.objective.value(point)
        # reported dual bound: subtract the free-split regularization mass so
        # the published pair keeps the internal gap (see docs)
        reg_mass = opts.free_reg * float(np.sum(lp[back.u_off: back.slack_off]))
        dual_int = float(sc.b @ raw.y) / tau - reg_mass
        dual = sign * dual_int
        y = sign * raw.y / tau
        return SdpSolution(
            status=SolveStatus.OPTIMAL,
            primal_value=primal,
            dual_value=dual,
            point=point,
            dual_eq=y[: back.n_eq].copy(),
            dual_ineq=y[back.n_eq:].copy(),
            iterations=raw.iterations,
            info=info,
        )

    if raw.status is ipm.Status.PRIMAL_INFEASIBLE:
        status = SolveStatus.PRIMAL_INFEASIBLE
    elif raw.status is ipm.Status.DUAL_INFEASIBLE:
        status = SolveStatus.DUAL_INFEASIBLE
    else:
        status = SolveStatus.NUMERICAL_FAILURE

    point = None
    if status is SolveStatus.DUAL_INFEASIBLE and "ray_Xp" in info:
        # improving ray for the user problem (objective unbounded)
        lp = info["ray_Xl"]
        point = ConePoint(
            psd=list(info["ray_Xp"]),
            nonneg=lp[: back.nonneg].copy(),
            free=lp[back.u_off: back.v_off] - lp[back.v_off: back.slack_off],
        )
        info["ray_point"] = point
    if status is SolveStatus.PRIMAL_INFEASIBLE and "ray_y" in info:
        info["ray_y_user"] = sign * info["ray_y"]

    return SdpSolution(
        status=status,
        primal_value=math.nan,
        dual_value=math.nan,
        point=point,
        dual_eq=np.full(back.n_eq, math.nan),
        dual_ineq=np.full(back.n_ineq, math.nan),
        iterations=raw.iterations,
        info=info,
    )


# ---------------------------------------------------------------------------
# feasibility via the max-margin reformulation
# ---------------------------------------------------------------------------


@dataclass
class FeasibilityResult:
    kind: str  # "feasible" | "infeasible" | "unknown"
    point: ConePoint | None = None
    margin: float | None = None


def _identity_value(expr: LinExpr) -> float:
    """Value of the functional at the cone's identity element."""
    v = 0.0
    for mat in expr.psd.values():
        v += float(np.trace(mat))
    v += sum(expr.nonneg.values())
    return v


def check_feasible(p: SdpProblem, opts: SolverOptions | None = None) -> FeasibilityResult:
    """Feasibility through max t with every constraint shifted by t.

    The PSD blocks are shifted to X + t*I, user nonnegatives to x + t and
    inequality rows get a margin t; t is capped at 1 to keep the auxiliary
    problem bounded.
    """
    opts = opts or SolverOptions()
    bld = SdpBuilder()
    for t in p.cone.psd_dims:
        bld.add_psd(t)
    bld.add_nonneg(p.cone.nonneg)
    bld.add_free(p.cone.free)
    (t_idx,) = bld.add_free(1)

    def with_margin(expr: LinExpr, extra: float) -> LinExpr:
        out = LinExpr(psd=dict(expr.psd), nonneg=dict(expr.nonneg), free=dict(expr.free))
        out.add_free(t_idx, _identity_value(expr) + extra)
        return out

    for expr, rhs in p.eq_constraints:
        bld.add_eq(with_margin(expr, 0.0), rhs)
    for expr, rhs, rel in p.ineq_constraints:
        extra = 1.0 if rel is Relation.LE else -1.0
        bld.add_ineq(with_margin(expr, extra), rhs, rel)
    bld.add_ineq(LinExpr().add_free(t_idx, 1.0), 1.0, Relation.LE)
    bld.maximize(LinExpr().add_free(t_idx, 1.0))

    sol = solve(bld.build(), opts)
    if sol.status is SolveStatus.OPTIMAL:
        t_star = sol.point.free[-1]
        if t_star >= -opts.feas_tol:
            point = ConePoint(
                psd=[X + t_star * np.eye(X.shape[0]) for X in sol.point.psd],
                nonneg=sol.point.nonneg + t_star,
                free=sol.point.free[:-1].copy(),
            )
            return FeasibilityResult("feasible", point=point, margin=float(t_star))
        return FeasibilityResult("infeasible", margin=float(t_star))
    if sol.status is SolveStatus.PRIMAL_INFEASIBLE:
        return FeasibilityResult("infeasible")
    return FeasibilityResult("unknown")


# ---------------------------------------------------------------------------
# SDPA sparse export
# ---------------------------------------------------------------------------


def export_sdpa(p: SdpProblem, reg: float = FREE_SPLIT_REG) -> str:
    """Serialize the standardized form in SDPA sparse (.dat-s) layout.

    The file encodes the standardized problem as the SDPA dual pair
    (F_i = A_i, c_i = b_i, F_0 = -C), so an external SDPA solver's reported
    optimal value is the negative of this solver's primal value.
    """
    sc, _ = _standardize(p, reg)
    blocks = list(sc.psd_dims)
    sizes = blocks + ([-sc.lp_dim] if sc.lp_dim else [])
    lines = [f"{len(sc.b)}", f"{len(sizes)}"]
    lines.append(" ".join(str(t) for t in sizes))
    lines.append(" ".join(f"{v:.17g}" for v in sc.b))

    def emit(matno: int, Mp: list[np.ndarray], mlp: np.ndarray, neg: bool):
        s = -1.0 if neg else 1.0
        for blk, M in enumerate(Mp):
            t = M.shape[0]
            for i in range(t):
                for j in range(i, t):
                    v = s * M[i, j]
                    if v != 0.0:
                        lines.append(f"{matno} {blk + 1} {i + 1} {j + 1} {v:.17g}")
        lp_block = len(blocks) + 1
        for i, v in enumerate(mlp):
            if v != 0.0:
                lines.append(f"{matno} {lp_block} {i + 1} {i + 1} {s * v:.17g}")

    emit(0, sc.C_psd, sc.c_lp, neg=True)
    for r in range(len(sc.b)):
        emit(r + 1, [A[r] for A in sc.A_psd], sc.A_lp[r], neg=False)
    return "\n".join(lines) + "\n"
