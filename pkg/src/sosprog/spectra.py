"""Spectrahedral index sets  Omega = {y : exists z, A0 + sum y_j A_j + sum z_l B_l >= 0}.

Sets are validated at construction: nonemptiness through a max-margin
feasibility solve and boundedness of the y-projection through coordinate
range solves.  Compactness of the lifted (y, z) set is not required.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sdp import (
    LinExpr,
    Relation,
    SdpBuilder,
    SolveStatus,
    SolverOptions,
    SymMatrix,
    min_eig,
    solve,
)


class SpectrahedronError(ValueError):
    pass


class EmptySetError(SpectrahedronError):
    pass


class UnboundedSetError(SpectrahedronError):
    def __init__(self, msg, direction=None):
        super().__init__(msg)
        self.direction = direction


class SolverFailure(RuntimeError):
    """An internal conic solve did not reach a certified status."""


@dataclass
class ContainsResult:
    inside: bool
    margin: float
    z: np.ndarray | None = None


@dataclass
class LinOptResult:
    status: str  # "optimal" | "unbounded" | "failed"
    value: float = float("nan")
    y: np.ndarray | None = None
    z: np.ndarray | None = None
    dual_matrix: np.ndarray | None = None
    ray: tuple[np.ndarray, np.ndarray] | None = None


@dataclass
class BoundednessResult:
    bounded: bool
    direction: tuple[np.ndarray, np.ndarray] | None = None  # (lam, v) recession ray


def _tri_entries(t: int):
    for i in range(t):
        for j in range(i + 1):
            yield i, j


def _entry_matrix(t: int, i: int, j: int) -> np.ndarray:
    E = np.zeros((t, t))
    if i == j:
        E[i, i] = 1.0
    else:
        E[i, j] = E[j, i] = 0.5
    return E


class Spectrahedron:
    """LMI-described compact set in R^m with p lifting variables."""

    def __init__(self, A: list[SymMatrix], B: list[SymMatrix] = (),
                 validate: bool = True, opts: SolverOptions | None = None):
        if not A:
            raise SpectrahedronError("need at least the constant pencil matrix A0")
        t = A[0].dim
        if any(M.dim != t for M in A) or any(M.dim != t for M in B):
            raise SpectrahedronError("all pencil matrices must share one size")
        self.A = list(A)
        self.B = list(B)
        self.t = t
        self.m = len(A) - 1
        self.p = len(B)
        self._A_full = np.stack([M.full() for M in self.A])
        self._B_full = (np.stack([M.full() for M in self.B])
                        if self.B else np.zeros((0, t, t)))
        if validate:
            o = opts or SolverOptions()
            res = self._feasibility_margin(o)
            if res is None:
                raise SolverFailure("nonemptiness check did not converge")
            if res < -o.feas_tol:
                raise EmptySetError(f"spectrahedron is empty (margin {res:.3e})")
            bd = self.assert_bounded(o)
            if not bd.bounded:
                raise UnboundedSetError("spectrahedron has an unbounded coordinate",
                                        direction=bd.direction)

    # -- constructors --------------------------------------------------------

    @classmethod
    def from_lmi(cls, A, B=(), validate: bool = True) -> "Spectrahedron":
        A = [M if isinstance(M, SymMatrix) else SymMatrix.from_full(M) for M in A]
        B = [M if isinstance(M, SymMatrix) else SymMatrix.from_full(M) for M in B]
        return cls(A, B, validate=validate)

    @classmethod
    def trivial(cls) -> "Spectrahedron":
        """The single point of R^0; used for plain polynomial pieces."""
        return cls([SymMatrix.from_full([[1.0]])], validate=False)

    @classmethod
    def simplex(cls, m: int) -> "Spectrahedron":
        """{y >= 0, sum y = 1}; the equality is two opposed diagonal rows."""
        if m < 1:
            raise SpectrahedronError("simplex needs m >= 1")
        t = m + 2
        A0 = np.zeros((t, t))
        A0[m, m] = 1.0
        A0[m + 1, m + 1] = -1.0
        As = [SymMatrix.from_full(A0)]
        for j in range(m):
            M = np.zeros((t, t))
            M[j, j] = 1.0
            M[m, m] = -1.0
            M[m + 1, m + 1] = 1.0
            As.append(SymMatrix.from_full(M))
        return cls(As, validate=False)

    @classmethod
    def l2_ball(cls, m: int) -> "Spectrahedron":
        """{||y|| <= 1} through the arrow pencil [[I, y], [y^T, 1]]."""
        if m < 1:
            raise SpectrahedronError("ball needs m >= 1")
        t = m + 1
        As = [SymMatrix.from_full(np.eye(t))]
        for j in range(m):
            M = np.zeros((t, t))
            M[j, m] = M[m, j] = 1.0
            As.append(SymMatrix.from_full(M))
        return cls(As, validate=False)

    @classmethod
    def box(cls, lo, hi) -> "Spectrahedron":
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1 or lo.size < 1:
            raise SpectrahedronError("box needs matching lo/hi vectors")
        if np.any(hi < lo):
            raise EmptySetError("box has hi < lo")
        m = lo.size
        t = 2 * m
        A0 = np.zeros((t, t))
        for j in range(m):
            A0[2 * j, 2 * j] = -lo[j]
            A0[2 * j + 1, 2 * j + 1] = hi[j]
        As = [SymMatrix.from_full(A0)]
        for j in range(m):
            M = np.zeros((t, t))
            M[2 * j, 2 * j] = 1.0
            M[2 * j + 1, 2 * j + 1] = -1.0
            As.append(SymMatrix.from_full(M))
        return cls(As, validate=False)

    @classmethod
    def psd_trace_one(cls, k: int) -> "Spectrahedron":
        """Unit-trace PSD matrices of S^k, vectorized to R^{k(k+1)/2}.

        Coordinate order is the lower triangle, row-major; off-diagonal
        coordinates carry a sqrt(2) scale so the trace pairing on S^k is the
        dot product on the vectorization.
        """
        if k < 1:
            raise SpectrahedronError("psd_trace_one needs k >= 1")
        t = k + 2
        A0 = np.zeros((t, t))
        A0[k, k] = 1.0
        A0[k + 1, k + 1] = -1.0
        As = [SymMatrix.from_full(A0)]
        for i in range(k):
            for j in range(i + 1):
                M = np.zeros((t, t))
                if i == j:
                    M[i, i] = 1.0
                    M[k, k] = -1.0
                    M[k + 1, k + 1] = 1.0
                else:
                    M[i, j] = M[j, i] = 1.0 / np.sqrt(2.0)
                As.append(SymMatrix.from_full(M))
        return cls(As, validate=False)

    @classmethod
    def singleton(cls, y) -> "Spectrahedron":
        y = np.asarray(y, dtype=float)
        return cls.box(y, y)

    # -- queries ---------------------------------------------------------------

    def pencil(self, y, z=None) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        M = self._A_full[0].copy()
        if self.m:
            M += np.tensordot(y, self._A_full[1:], axes=(0, 0))
        if z is not None and self.p:
            M += np.tensordot(np.asarray(z, dtype=float), self._B_full, axes=(0, 0))
        return M

    def _feasibility_margin(self, opts: SolverOptions) -> float | None:
        """max t (capped at 1) with the pencil shifted by t*I, y and z free."""
        bld = SdpBuilder()
        blk = bld.add_psd(self.t)
        yv = bld.add_free(self.m)
        zv = bld.add_free(self.p)
        (tv,) = bld.add_free(1)
        for i, j in _tri_entries(self.t):
            ex = LinExpr().add_psd(blk, _entry_matrix(self.t, i, j))
            for a in range(self.m):
                ex.add_free(yv[a], -self._A_full[a + 1][i, j])
            for l in range(self.p):
                ex.add_free(zv[l], -self._B_full[l][i, j])
            if i == j:
                ex.add_free(tv, 1.0)
            bld.add_eq(ex, self._A_full[0][i, j])
        bld.add_ineq(LinExpr().add_free(tv, 1.0), 1.0, Relation.LE)
        bld.maximize(LinExpr().add_free(tv, 1.0))
        sol = solve(bld.build(), opts)
        if sol.status is not SolveStatus.OPTIMAL:
            return None
        return float(sol.point.free[-1])

    def contains(self, y, opts: SolverOptions | None = None) -> ContainsResult:
        y = np.asarray(y, dtype=float)
        if y.shape != (self.m,):
            raise ValueError(f"point has dimension {y.shape}, expected ({self.m},)")
        opts = opts or SolverOptions()
        if self.p == 0:
            margin = min_eig(self.pencil(y))
            return ContainsResult(margin >= -opts.feas_tol, margin,
                                  np.zeros(0) if margin >= -opts.feas_tol else None)
        M = self.pencil(y)
        bld = SdpBuilder()
        blk = bld.add_psd(self.t)
        zv = bld.add_free(self.p)
        (tv,) = bld.add_free(1)
        for i, j in _tri_entries(self.t):
            ex = LinExpr().add_psd(blk, _entry_matrix(self.t, i, j))
            for l in range(self.p):
                ex.add_free(zv[l], -self._B_full[l][i, j])
            if i == j:
                ex.add_free(tv, 1.0)
            bld.add_eq(ex, M[i, j])
        bld.add_ineq(LinExpr().add_free(tv, 1.0), 1.0, Relation.LE)
        bld.maximize(LinExpr().add_free(tv, 1.0))
        sol = solve(bld.build(), opts)
        if sol.status is not SolveStatus.OPTIMAL:
            raise SolverFailure("membership solve failed")
        margin = float(sol.point.free[-1])
        if margin >= -opts.feas_tol:
            return ContainsResult(True, margin, sol.point.free[: self.p].copy())
        return ContainsResult(False, margin)

    def maximize_linear(self, c, opts: SolverOptions | None = None,
                        allow_unbounded: bool = False) -> LinOptResult:
        """max c'y over the set; also returns the PSD dual matrix Z of the
        pencil, which satisfies Tr(Z A_j) = -c_j, Tr(Z B_l) = 0 and has
        objective value Tr(Z A_0)."""
        c = np.asarray(c, dtype=float)
        if c.shape != (self.m,):
            raise ValueError(f"direction has dimension {c.shape}, expected ({self.m},)")
        opts = opts or SolverOptions()
        if self.m == 0:
            return LinOptResult("optimal", 0.0, np.zeros(0), np.zeros(0),
                                np.zeros((self.t, self.t)))
        bld = SdpBuilder()
        blk = bld.add_psd(self.t)
        yv = bld.add_free(self.m)
        zv = bld.add_free(self.p)
        tie_rows = []
        for i, j in _tri_entries(self.t):
            ex = LinExpr().add_psd(blk, _entry_matrix(self.t, i, j))
            for a in range(self.m):
                ex.add_free(yv[a], -self._A_full[a + 1][i, j])
            for l in range(self.p):
                ex.add_free(zv[l], -self._B_full[l][i, j])
            tie_rows.append(bld.add_eq(ex, self._A_full[0][i, j]))
        ob = LinExpr()
        for a in range(self.m):
            if c[a]:
                ob.add_free(yv[a], c[a])
        bld.maximize(ob)
        sol = solve(bld.build(), opts)
        if sol.status is SolveStatus.OPTIMAL:
            nu = sol.dual_eq
            Z = np.zeros((self.t, self.t))
            for r, (i, j) in zip(tie_rows, _tri_entries(self.t)):
                if i == j:
                    Z[i, i] = nu[r]
                else:
                    Z[i, j] = Z[j, i] = 0.5 * nu[r]
            return LinOptResult("optimal", float(sol.primal_value),
                                sol.point.free[: self.m].copy(),
                                sol.point.free[self.m: self.m + self.p].copy(),
                                Z)
        if sol.status is SolveStatus.DUAL_INFEASIBLE:
            ray = None
            pt = sol.info.get("ray_point")
            if pt is not None:
                ray = (pt.free[: self.m].copy(),
                       pt.free[self.m: self.m + self.p].copy())
            if allow_unbounded:
                return LinOptResult("unbounded", ray=ray)
            raise UnboundedSetError("linear objective unbounded over the set",
                                    direction=ray)
        raise SolverFailure(f"linear optimization failed ({sol.status.value})")

    def assert_bounded(self, opts: SolverOptions | None = None) -> BoundednessResult:
        """Check both coordinate extremes of every y_j (2m solves)."""
        opts = opts or SolverOptions()
        for j in range(self.m):
            for sgn in (1.0, -1.0):
                c = np.zeros(self.m)
                c[j] = sgn
                res = self.maximize_linear(c, opts, allow_unbounded=True)
                if res.status == "unbounded":
                    return BoundednessResult(False, direction=res.ray)
                if res.status == "failed":
                    raise SolverFailure("boundedness check solve failed")
        return BoundednessResult(True)

    def coordinate_range(self, j: int, opts: SolverOptions | None = None) -> tuple[float, float]:
        c = np.zeros(self.m)
        c[j] = 1.0
        hi = self.maximize_linear(c, opts).value
        lo = -self.maximize_linear(-c, opts).value
        return lo, hi

    # -- combinators -------------------------------------------------------------

    def product(self, other: "Spectrahedron") -> "Spectrahedron":
        """Block-diagonal product in R^{m1+m2} with concatenated liftings."""
        t1, t2 = self.t, other.t
        t = t1 + t2

        def emb1(M):
            out = np.zeros((t, t))
            out[:t1, :t1] = M
            return out

        def emb2(M):
            out = np.zeros((t, t))
            out[t1:, t1:] = M
            return out

        A = [SymMatrix.from_full(emb1(self._A_full[0]) + emb2(other._A_full[0]))]
        A += [SymMatrix.from_full(emb1(M)) for M in self._A_full[1:]]
        A += [SymMatrix.from_full(emb2(M)) for M in other._A_full[1:]]
        B = [SymMatrix.from_full(emb1(M)) for M in self._B_full]
        B += [SymMatrix.from_full(emb2(M)) for M in other._B_full]
        return Spectrahedron(A, B, validate=False)

    def pad(self, m_new: int) -> "Spectrahedron":
        """Extend to R^{m_new} by pinning the new coordinates to zero."""
        k = m_new - self.m
        if k < 0:
            raise ValueError("cannot shrink the index dimension")
        if k == 0:
            return self
        drop_base = self.m == 0 and self.p == 0  # the trivial factor carries no variables
        t0 = 0 if drop_base else self.t
        t = t0 + 2 * k

        def emb(M):
            out = np.zeros((t, t))
            if t0:
                out[:t0, :t0] = M
            return out

        A = [SymMatrix.from_full(emb(self._A_full[0]))]
        A += [SymMatrix.from_full(emb(M)) for M in self._A_full[1:]]
        for c in range(k):
            M = np.zeros((t, t))
            M[t0 + 2 * c, t0 + 2 * c] = 1.0
            M[t0 + 2 * c + 1, t0 + 2 * c + 1] = -1.0
            A.append(SymMatrix.from_full(M))
        B = [SymMatrix.from_full(emb(M)) for M in self._B_full]
        return Spectrahedron(A, B, validate=False)

    # -- recovery-side strict feasibility -----------------------------------------

    def components(self) -> list[list[int]]:
        """Connected components of the pencil's off-diagonal support."""
        t = self.t
        adj = [set() for _ in range(t)]
        for M in list(self._A_full) + list(self._B_full):
            nz = np.argwhere(np.abs(M) > 0)
            for i, j in nz:
                if i != j:
                    adj[i].add(j)
                    adj[j].add(i)
        seen = [False] * t
        comps = []
        for s in range(t):
            if seen[s]:
                continue
            stack, comp = [s], []
            seen[s] = True
            while stack:
                u = stack.pop()
                comp.append(u)
                for v in adj[u]:
                    if not seen[v]:
                        seen[v] = True
                        stack.append(v)
            comps.append(sorted(comp))
        return comps

    def strict_interior_margin(self, opts: SolverOptions | None = None) -> float:
        """Margin of the mixed polyhedral/conic interior condition.

        1x1 diagonal components of the pencil are linear inequalities and only
        need feasibility; every coupled component must admit a strictly PSD
        point.  Returns max t (capped at 1) with t*I applied to the coupled
        components only.
        """
        opts = opts or SolverOptions()
        comps = self.components()
        shift = np.zeros((self.t, self.t))
        for comp in comps:
            if len(comp) > 1:
                for i in comp:
                    shift[i, i] = 1.0
        if not shift.any():
            # fully polyhedral; nonemptiness is all that is needed
            return 1.0
        bld = SdpBuilder()
        blk = bld.add_psd(self.t)
        yv = bld.add_free(self.m)
        zv = bld.add_free(self.p)
        (tv,) = bld.add_free(1)
        for i, j in _tri_entries(self.t):
            ex = LinExpr().add_psd(blk, _entry_matrix(self.t, i, j))
            for a in range(self.m):
                ex.add_free(yv[a], -self._A_full[a + 1][i, j])
            for l in range(self.p):
                ex.add_free(zv[l], -self._B_full[l][i, j])
            if i == j and shift[i, i]:
                ex.add_free(tv, 1.0)
            bld.add_eq(ex, self._A_full[0][i, j])
        bld.add_ineq(LinExpr().add_free(tv, 1.0), 1.0, Relation.LE)
        bld.maximize(LinExpr().add_free(tv, 1.0))
        sol = solve(bld.build(), opts)
        if sol.status is not SolveStatus.OPTIMAL:
            raise SolverFailure("interior-margin solve failed")
        return float(sol.point.free[-1])

    def __repr__(self):
        return f"Spectrahedron(m={self.m}, p={self.p}, t={self.t})"


def sym_to_vec(X) -> np.ndarray:
    """Vectorize S^k with sqrt(2)-scaled off-diagonals (trace pairing -> dot)."""
    X = np.asarray(X, dtype=float)
    k = X.shape[0]
    out = []
    for i in range(k):
        for j in range(i + 1):
            out.append(X[i, i] if i == j else np.sqrt(2.0) * X[i, j])
    return np.array(out)


def vec_to_sym(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    k = int((np.sqrt(8 * v.size + 1) - 1) / 2)
    if k * (k + 1) // 2 != v.size:
        raise ValueError(f"length {v.size} is not a triangular number")
    X = np.zeros((k, k))
    c = 0
    for i in range(k):
        for j in range(i + 1):
            if i == j:
                X[i, i] = v[c]
            else:
                X[i, j] = X[j, i] = v[c] / np.sqrt(2.0)
            c += 1
    return X
