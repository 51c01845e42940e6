"""Nonsmooth convex functions of the form f(x) = sup_{y in Omega} {h0(x) + sum y_j h_j(x)}.

Each admissible combination h0 + sum y_j h_j must be an SOS-convex
polynomial.  That universal condition over Omega is not finitely checkable
in general, so construction certifies it by one of four recorded policies:

* "affine-tail": every h_j (j >= 1) is affine, so the combination differs
  from h0 by an affine term and inherits h0's certificate for every y.
* "generators": Omega is a simplex whose vertices select individually
  certified pieces; convex combinations preserve SOS-convexity.
* "inherited": built by sum/scaling of certified functions.
* "sampled": combinations checked at extreme points found by linear
  optimization along random directions (user-supplied Omega fallback).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .poly import Polynomial, get_basis
from .soscert import SosResult, Verdict, is_sos_convex
from .spectra import Spectrahedron, sym_to_vec
from .sdp import SolverOptions

DEFAULT_SAMPLES = 8


class CertificationError(ValueError):
    """A required SOS-convexity certificate could not be produced."""


@dataclass
class CertInfo:
    policy: str
    checked: int = 0
    ok: bool = True
    detail: str = ""


def _even(d: int) -> int:
    return d if d % 2 == 0 else d + 1


class SsaFunction:
    """f(x) = h0(x) + sup over the spectrahedron of sum y_j h_j(x)."""

    def __init__(self, h: list[Polynomial], omega: Spectrahedron,
                 certify: bool = True, cert: CertInfo | None = None,
                 opts: SolverOptions | None = None, seed: int = 0):
        if len(h) != omega.m + 1:
            raise ValueError(f"need {omega.m + 1} polynomials for an index set "
                             f"in R^{omega.m}, got {len(h)}")
        n = h[0].n
        if any(p.n != n for p in h):
            raise ValueError("all pieces must share the variable count")
        self.n = n
        self.m = omega.m
        self.h = list(h)
        self.omega = omega
        self.d = _even(max((p.degree for p in h), default=0))
        if cert is not None:
            self.certified = cert
        elif certify:
            self.certified = self._certify(opts or SolverOptions(), seed)
        else:
            self.certified = CertInfo(policy="unchecked", ok=False)

    def _certify(self, opts: SolverOptions, seed: int) -> CertInfo:
        tail_affine = all(p.degree <= 1 for p in self.h[1:])
        if tail_affine:
            res = is_sos_convex(self.h[0])
            if res.verdict is not Verdict.YES:
                raise CertificationError(
                    f"base piece failed SOS-convexity ({res.verdict.value})")
            return CertInfo(policy="affine-tail", checked=1)
        rng = np.random.default_rng(seed)
        checked = 0
        for _ in range(DEFAULT_SAMPLES):
            c = rng.normal(size=self.m)
            res = self.omega.maximize_linear(c, opts)
            comb = self.h[0]
            for j in range(self.m):
                comb = comb + self.h[j + 1].scale(float(res.y[j]))
            v = is_sos_convex(comb)
            if v.verdict is not Verdict.YES:
                raise CertificationError(
                    f"combination at a sampled extreme point failed "
                    f"SOS-convexity ({v.verdict.value})")
            checked += 1
        return CertInfo(policy="sampled", checked=checked,
                        detail=f"{DEFAULT_SAMPLES} extreme points, seed {seed}")

    # -- evaluation -----------------------------------------------------------

    def inner_coeffs(self, x) -> np.ndarray:
        return np.array([p.evaluate(x) for p in self.h[1:]])

    def eval_full(self, x, opts: SolverOptions | None = None):
        """Value plus the maximizing (y, z) and the pencil's dual matrix."""
        base = float(self.h[0].evaluate(x))
        if self.m == 0:
            return base, np.zeros(0), np.zeros(0), None
        res = self.omega.maximize_linear(self.inner_coeffs(x), opts)
        return base + res.value, res.y, res.z, res.dual_matrix

    def eval(self, x, opts: SolverOptions | None = None) -> float:
        return self.eval_full(x, opts)[0]

    __call__ = eval

    def subgradient(self, x, opts: SolverOptions | None = None) -> np.ndarray:
        """A subgradient: gradient of the active combination at x."""
        _, y, _, _ = self.eval_full(x, opts)
        comb = self.h[0]
        for j in range(self.m):
            comb = comb + self.h[j + 1].scale(float(y[j]))
        return np.array([g.evaluate(x) for g in comb.gradient()])

    # -- algebra ----------------------------------------------------------------

    def scale(self, c: float) -> "SsaFunction":
        if c < 0:
            raise ValueError("only nonnegative scaling preserves the class")
        cert = CertInfo(policy="inherited", ok=self.certified.ok,
                        detail=f"scaled from {self.certified.policy}")
        return SsaFunction([p.scale(c) for p in self.h], self.omega, cert=cert)

    def add(self, other: "SsaFunction") -> "SsaFunction":
        """Sum over the product index set, pieces concatenated."""
        if self.n != other.n:
            raise ValueError("variable counts differ")
        h0 = self.h[0] + other.h[0]
        h = [h0] + list(self.h[1:]) + list(other.h[1:])
        omega = self.omega.product(other.omega)
        cert = CertInfo(policy="inherited",
                        ok=self.certified.ok and other.certified.ok,
                        detail=f"sum of {self.certified.policy} + {other.certified.policy}")
        return SsaFunction(h, omega, cert=cert)

    __add__ = add

    def __repr__(self):
        return (f"SsaFunction(n={self.n}, m={self.m}, d={self.d}, "
                f"cert={self.certified.policy})")


# -- builders -------------------------------------------------------------------


def from_polynomial(f: Polynomial, certify: bool = True) -> SsaFunction:
    """A plain SOS-convex polynomial as a degenerate (m = 0) function."""
    if certify:
        res = is_sos_convex(f)
        if res.verdict is not Verdict.YES:
            raise CertificationError(f"polynomial failed SOS-convexity "
                                     f"({res.verdict.value})")
    cert = CertInfo(policy="generators", checked=1 if certify else 0, ok=certify)
    return SsaFunction([f], Spectrahedron.trivial(), cert=cert)


def from_max_of_polys(pieces: list[Polynomial]) -> SsaFunction:
    """max_i f_i over the simplex: h0 = 0 and h_j = f_j."""
    if not pieces:
        raise ValueError("need at least one piece")
    n = pieces[0].n
    for f in pieces:
        res = is_sos_convex(f)
        if res.verdict is not Verdict.YES:
            raise CertificationError(f"piece {f} failed SOS-convexity "
                                     f"({res.verdict.value})")
    h = [Polynomial.zero(n)] + list(pieces)
    cert = CertInfo(policy="generators", checked=len(pieces))
    return SsaFunction(h, Spectrahedron.simplex(len(pieces)), cert=cert)


def euclidean_norm(n: int) -> SsaFunction:
    """||x|| = sup_{||y|| <= 1} x.y."""
    h = [Polynomial.zero(n)] + [Polynomial.coordinate(n, k) for k in range(n)]
    cert = CertInfo(policy="affine-tail", checked=0, detail="linear pieces")
    return SsaFunction(h, Spectrahedron.l2_ball(n), cert=cert)


def abs_coordinate(n: int, k: int) -> SsaFunction:
    """|x_k| = max(x_k, -x_k) over the 1-simplex in R^2."""
    xk = Polynomial.coordinate(n, k)
    h = [Polynomial.zero(n), xk, -xk]
    cert = CertInfo(policy="generators", checked=2, detail="affine pieces")
    return SsaFunction(h, Spectrahedron.simplex(2), cert=cert)


def l1_norm(n: int) -> SsaFunction:
    """Sum of per-coordinate absolute values over a product of 1-simplices."""
    f = abs_coordinate(n, 0)
    for k in range(1, n):
        f = f.add(abs_coordinate(n, k))
    return f


def lambda_max(k: int) -> SsaFunction:
    """Largest eigenvalue on vectorized S^k (sqrt(2)-scaled off-diagonals)."""
    n = k * (k + 1) // 2
    h = [Polynomial.zero(n)] + [Polynomial.coordinate(n, c) for c in range(n)]
    cert = CertInfo(policy="affine-tail", checked=0, detail="linear pieces")
    return SsaFunction(h, Spectrahedron.psd_trace_one(k), cert=cert)


def quadratic_poly(Q, b=None, c: float = 0.0) -> Polynomial:
    """x'Qx + b'x + c as a Polynomial."""
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[0]
    Q = (Q + Q.T) / 2.0
    terms: list[tuple[tuple[int, ...], float]] = []
    if c:
        terms.append(((0,) * n, float(c)))
    if b is not None:
        b = np.asarray(b, dtype=float)
        for k in range(n):
            if b[k]:
                e = [0] * n
                e[k] = 1
                terms.append((tuple(e), float(b[k])))
    for i in range(n):
        for j in range(i, n):
            v = Q[i, i] if i == j else 2.0 * Q[i, j]
            if v:
                e = [0] * n
                e[i] += 1
                e[j] += 1
                terms.append((tuple(e), float(v)))
    return Polynomial.from_terms(n, terms, d=2)


def least_squares(A, b) -> Polynomial:
    """||Ax - b||^2 expanded to a convex quadratic."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    return quadratic_poly(A.T @ A, -2.0 * A.T @ b, float(b @ b))


def least_squares_l1(A, b, mu: float) -> SsaFunction:
    """||Ax - b||^2 + mu * ||x||_1."""
    if mu <= 0:
        raise ValueError("mu must be positive")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[1]
    return from_polynomial(least_squares(A, b)).add(l1_norm(n).scale(mu))


def least_squares_elastic(A, b, mu1: float, mu2: float) -> SsaFunction:
    """||Ax - b||^2 + mu1 * ||x||_1 + mu2 * ||x||^2."""
    if mu1 <= 0 or mu2 <= 0:
        raise ValueError("mu1 and mu2 must be positive")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[1]
    quad = least_squares(A, b) + quadratic_poly(mu2 * np.eye(n))
    return from_polynomial(quad).add(l1_norm(n).scale(mu1))


# -- programs ---------------------------------------------------------------------


@dataclass
class SlaterWitness:
    x0: np.ndarray
    margins: np.ndarray


@dataclass
class SsaProgram:
    """min f0(x) subject to f_i(x) <= 0."""

    objective: SsaFunction
    constraints: list[SsaFunction] = field(default_factory=list)

    def __post_init__(self):
        n = self.objective.n
        if any(f.n != n for f in self.constraints):
            raise ValueError("all pieces must share the variable count")

    @property
    def n(self) -> int:
        return self.objective.n

    @property
    def d(self) -> int:
        return _even(max([self.objective.d] + [f.d for f in self.constraints]))

    def pieces(self) -> list[SsaFunction]:
        return [self.objective] + list(self.constraints)

    def margins(self, x, opts: SolverOptions | None = None) -> np.ndarray:
        return np.array([f.eval(x, opts) for f in self.constraints])


STRICT_MARGIN = -1e-8


def find_slater(prog: SsaProgram, hint=None,
                opts: SolverOptions | None = None,
                iters: int = 100) -> SlaterWitness | None:
    """Point with every constraint strictly negative, or None.

    Tries the hint and the origin, then runs a short subgradient descent on
    max_i f_i with step 1/k.  A convenience search, not a completeness claim.
    """
    if not prog.constraints:
        x0 = np.zeros(prog.n) if hint is None else np.asarray(hint, dtype=float)
        return SlaterWitness(x0, np.zeros(0))
    candidates = []
    if hint is not None:
        candidates.append(np.asarray(hint, dtype=float))
    candidates.append(np.zeros(prog.n))
    for x in candidates:
        mg = prog.margins(x, opts)
        if np.all(mg < STRICT_MARGIN):
            return SlaterWitness(x, mg)
    x = candidates[-1] if hint is None else candidates[0]
    for k in range(1, iters + 1):
        mg = prog.margins(x, opts)
        if np.all(mg < STRICT_MARGIN):
            return SlaterWitness(x, mg)
        worst = int(np.argmax(mg))
        g = prog.constraints[worst].subgradient(x, opts)
        gn = np.linalg.norm(g)
        if gn < 1e-14:
            break
        x = x - (1.0 / k) * g / gn
    mg = prog.margins(x, opts)
    if np.all(mg < STRICT_MARGIN):
        return SlaterWitness(x, mg)
    return None
