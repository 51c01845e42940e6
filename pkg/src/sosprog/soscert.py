"""SOS and SOS-convexity certificates through Gram-matrix feasibility.

A polynomial f of even degree d is a sum of squares iff there is a PSD W
over the half-degree monomial basis with f_alpha = sum of W entries over the
pairing class of alpha.  Feasibility is decided by a max-margin solve
(maximize t with W - t*I PSD subject to the coefficient equations); t* >= -1e-9
counts as a yes.  A no is only reported together with a numerically verified
separating pseudo-moment functional; otherwise the answer is unknown.

SOS-convexity of f reduces to SOS membership of
f(x) - f(y) - grad f(y) . (x - y) over R^{2n}, with the constant monomial
dropped from the Gram basis (the difference vanishes on the diagonal).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .poly import DegreeCapError, MAX_VARS, Polynomial, get_basis, gram_pairs
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

YES_MARGIN = -1e-9


class Verdict(enum.Enum):
    YES = "yes"
    NO = "no"
    UNKNOWN = "unknown"


@dataclass
class GramCertificate:
    """PSD Gram matrix witnessing f = (monomials)^T W (monomials)."""

    n: int
    d: int
    indices: tuple[int, ...]  # positions into the half-degree basis
    W: SymMatrix
    residual: float

    def monomials(self) -> list[tuple[int, ...]]:
        half = get_basis(self.n, self.d // 2)
        return [half.exponents[i] for i in self.indices]

    def to_coeffs(self) -> Polynomial:
        return _gram_to_poly(self.n, self.d, self.indices, self.W.full())


@dataclass
class MomentWitness:
    """Pseudo-moment functional separating f from the SOS cone."""

    y: np.ndarray  # indexed like the degree-d coefficient vector
    value: float   # L_y(f) < 0
    min_eig: float
    trace: float


@dataclass
class SosResult:
    verdict: Verdict
    margin: float | None = None
    certificate: GramCertificate | None = None
    witness: MomentWitness | None = None
    reason: str = ""

    def __bool__(self) -> bool:
        return self.verdict is Verdict.YES


@dataclass
class SosDecomposition:
    terms: list[Polynomial]

    def reconstruct(self) -> Polynomial:
        if not self.terms:
            raise ValueError("empty decomposition")
        n = self.terms[0].n
        out = Polynomial.zero(n)
        for t in self.terms:
            out = out + t * t
        return out


def _sub_pairs(n: int, d: int, indices: tuple[int, ...]):
    """Pairing classes restricted to a subset of half-basis positions."""
    pos = {b: k for k, b in enumerate(indices)}
    table = gram_pairs(n, d)
    out = []
    for pairs in table:
        kept = [(pos[b], pos[g]) for b, g in pairs if b in pos and g in pos]
        out.append(kept)
    return out


def _gram_to_poly(n: int, d: int, indices: tuple[int, ...], W: np.ndarray) -> Polynomial:
    full = get_basis(n, d)
    coeffs = np.zeros(full.size)
    for a, pairs in enumerate(_sub_pairs(n, d, indices)):
        coeffs[a] = sum(W[i, j] for i, j in pairs)
    return Polynomial(full, coeffs)


#: The max-margin solve needs to separate a zero margin from -1e-9, so it
#: runs tighter than the general-purpose solver defaults.
MARGIN_OPTS = SolverOptions(gap_tol=1e-10, feas_tol=1e-9)


def is_sos(f: Polynomial, indices: tuple[int, ...] | None = None,
           opts: SolverOptions | None = None) -> SosResult:
    """Decide SOS membership; odd degree is rejected outright."""
    opts = opts or MARGIN_OPTS
    deg = f.degree
    if deg % 2 != 0:
        return SosResult(Verdict.NO, reason="odd degree cannot be a sum of squares")
    d = max(f.basis.d, deg)
    if d % 2 != 0:
        d += 1
    half = get_basis(f.n, d // 2)
    if indices is None:
        indices = tuple(range(half.size))
    fc = f.pad_to_degree(d).coeffs
    fnorm = float(np.linalg.norm(fc))
    pairs_by_alpha = _sub_pairs(f.n, d, indices)

    # rows with an empty pairing class cannot carry a nonzero coefficient
    for a, pairs in enumerate(pairs_by_alpha):
        if not pairs and abs(fc[a]) > 1e-9 * (1.0 + fnorm):
            return SosResult(Verdict.NO,
                             reason="coefficient outside the Gram basis span")

    k = len(indices)
    bld = SdpBuilder()
    blk = bld.add_psd(k)
    (tv,) = bld.add_free(1)
    rows = []
    half_exps = [half.exponents[i] for i in indices]
    for a, pairs in enumerate(pairs_by_alpha):
        if not pairs:
            continue
        M = np.zeros((k, k))
        for i, j in pairs:
            M[i, j] += 1.0
        ex = LinExpr().add_psd(blk, M)
        ndiag = sum(1 for i, j in pairs if i == j)
        if ndiag:
            ex.add_free(tv, float(ndiag))
        rows.append((a, bld.add_eq(ex, float(fc[a]))))
    bld.maximize(LinExpr().add_free(tv, 1.0))
    sol = solve(bld.build(), opts)

    if sol.status is not SolveStatus.OPTIMAL:
        return SosResult(Verdict.UNKNOWN, reason=f"margin solve: {sol.status.value}")
    t_prim = float(sol.point.free[0])
    # the dual value bounds the true margin from above; use the better of the
    # two estimates for the decision, the primal point for the certificate
    t_est = max(t_prim, float(sol.dual_value))
    if t_est >= YES_MARGIN:
        W = sol.point.psd[0] + t_prim * np.eye(k)
        W = (W + W.T) / 2.0
        res = float(np.linalg.norm(
            _gram_to_poly(f.n, d, indices, W).coeffs - fc))
        cert = GramCertificate(f.n, d, indices, SymMatrix.from_full(W), res)
        return SosResult(Verdict.YES, margin=t_est, certificate=cert)

    # verify the separating functional before answering no
    full = get_basis(f.n, d)
    y = np.zeros(full.size)
    for (a, r) in rows:
        y[a] = sol.dual_eq[r]
    My = np.zeros((k, k))
    for a, pairs in enumerate(pairs_by_alpha):
        for i, j in pairs:
            My[i, j] += y[a]
    emin = min_eig(My)
    tr = float(np.trace(My))
    value = float(y @ fc)
    scale = max(1.0, float(np.abs(My).max()))
    # the separation must carry a real share of the claimed negative margin
    if emin >= -1e-7 * scale and abs(tr - 1.0) <= 1e-6 and value <= 0.5 * t_est:
        wit = MomentWitness(y=y, value=value, min_eig=emin, trace=tr)
        return SosResult(Verdict.NO, margin=t_est, witness=wit)
    return SosResult(Verdict.UNKNOWN, margin=t_est,
                     reason="separating functional failed verification")


def convexity_gap(f: Polynomial) -> Polynomial:
    """The polynomial (x, y) -> f(x) - f(y) - grad f(y).(x - y) on R^{2n}."""
    if 2 * f.n > MAX_VARS:
        raise DegreeCapError(f"{2 * f.n} lifted variables exceed cap {MAX_VARS}")
    n = f.n
    F = f.lift_to_xy("x") - f.lift_to_xy("y")
    for k, gk in enumerate(f.gradient()):
        xk = Polynomial.coordinate(2 * n, k)
        yk = Polynomial.coordinate(2 * n, n + k)
        F = F - gk.lift_to_xy("y") * (xk - yk)
    return F


def is_sos_convex(f: Polynomial, opts: SolverOptions | None = None) -> SosResult:
    """SOS certificate of convexity via the first-order difference form."""
    deg = f.degree
    if deg <= 1:
        # affine: the difference form is identically zero
        cert = GramCertificate(2 * f.n, 2, (1,), SymMatrix.zeros(1), 0.0)
        return SosResult(Verdict.YES, margin=0.0, certificate=cert)
    F = convexity_gap(f)
    d = F.degree
    if d % 2 != 0:
        return SosResult(Verdict.NO, reason="odd-degree difference form")
    d = max(d, 2)
    half = get_basis(F.n, d // 2)
    indices = tuple(range(1, half.size))  # constant monomial cannot appear
    return is_sos(F.pad_to_degree(d), indices=indices, opts=opts)


def extract_decomposition(cert: GramCertificate, cutoff: float = 1e-12) -> SosDecomposition:
    """Factor W into sum of rank-ones and map them to polynomials."""
    W = cert.W.full()
    emin = min_eig(W)
    scale = max(1.0, float(np.abs(W).max()))
    if emin < -1e-7 * scale:
        raise ValueError(f"Gram matrix is indefinite (min eig {emin:.3e})")
    w, V = np.linalg.eigh(W)
    half = get_basis(cert.n, cert.d // 2)
    terms = []
    top = max(w.max(initial=0.0), 1.0)
    for lam, vec in zip(w, V.T):
        if lam <= cutoff * top:
            continue
        coeffs = np.zeros(half.size)
        for pos, b in enumerate(cert.indices):
            coeffs[b] = np.sqrt(lam) * vec[pos]
        terms.append(Polynomial(half, coeffs))
    return SosDecomposition(terms)
