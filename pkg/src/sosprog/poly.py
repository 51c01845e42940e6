"""Dense multivariate polynomials over a graded monomial basis.

Monomials of R_d[x_1..x_n] are ordered by total degree and, within a degree,
graded-lexicographically with x1 > x2 > ... > xn, i.e.

    1, x1, ..., xn, x1^2, x1*x2, ..., x2^2, ..., xn^2, ..., xn^d.

Position 0 is the constant monomial; positions 1..n are the coordinates.
The basis for degree d is a prefix of the basis for degree d+1, so a
monomial's position never changes when the degree bound grows.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Iterable, Iterator, Sequence

import numpy as np

# Exponent tuple, one entry per variable.
MultiIndex = tuple[int, ...]

# Construction caps; they keep the half-degree Gram blocks dense-solvable.
MAX_VARS = 8
MAX_DEGREE = 10

_SIZE_LIMIT = 2**31
_PRINT_TOL = 1e-12


class SizeLimitError(ValueError):
    """Monomial count exceeds the representable limit."""


class DegreeCapError(ValueError):
    """Variable count or degree exceeds the configured caps."""


def basis_size(n: int, d: int) -> int:
    """Number of monomials of degree <= d in n variables, binom(n+d, d)."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    if d < 0:
        raise ValueError(f"need d >= 0, got {d}")
    size = math.comb(n + d, d)
    if size > _SIZE_LIMIT:
        raise SizeLimitError(f"basis of {size} monomials exceeds limit {_SIZE_LIMIT}")
    return size


def _degree_monomials(n: int, k: int) -> Iterator[MultiIndex]:
    """Multi-indices of total degree exactly k, x1-major."""
    if n == 1:
        yield (k,)
        return
    for e in range(k, -1, -1):
        for rest in _degree_monomials(n - 1, k - e):
            yield (e,) + rest


def enumerate_basis(n: int, d: int) -> list[MultiIndex]:
    """All multi-indices with |i| <= d, graded, constant first."""
    basis_size(n, d)  # validates n, d and the size limit
    out: list[MultiIndex] = []
    for k in range(d + 1):
        out.extend(_degree_monomials(n, k))
    return out


class MonomialBasis:
    """The graded monomial basis of R_d[x_1..x_n]; obtain via get_basis()."""

    __slots__ = ("n", "d", "exponents", "index", "size")

    def __init__(self, n: int, d: int):
        if n > MAX_VARS or d > MAX_DEGREE:
            raise DegreeCapError(
                f"basis ({n} vars, degree {d}) exceeds caps "
                f"(n <= {MAX_VARS}, d <= {MAX_DEGREE})"
            )
        self.n = n
        self.d = d
        self.exponents: tuple[MultiIndex, ...] = tuple(enumerate_basis(n, d))
        self.index: dict[MultiIndex, int] = {e: a for a, e in enumerate(self.exponents)}
        self.size = len(self.exponents)

    def index_of(self, exps: Sequence[int]) -> int:
        return self.index[tuple(exps)]

    def __len__(self) -> int:
        return self.size

    def __eq__(self, other) -> bool:
        return isinstance(other, MonomialBasis) and (self.n, self.d) == (other.n, other.d)

    def __hash__(self) -> int:
        return hash((self.n, self.d))

    def __repr__(self) -> str:
        return f"MonomialBasis(n={self.n}, d={self.d}, size={self.size})"


@lru_cache(maxsize=None)
def get_basis(n: int, d: int) -> MonomialBasis:
    return MonomialBasis(n, d)


@lru_cache(maxsize=None)
def gram_pairs(n: int, d: int) -> tuple[tuple[tuple[int, int], ...], ...]:
    """For each position alpha of the degree-d basis, the ordered pairs
    (beta, gamma) of half-degree positions with i(beta) + i(gamma) = i(alpha).

    d must be even.  The table is shared by SOS certification, relaxation
    assembly and moment matrices so that all three use one pairing index.
    """
    if d % 2 != 0:
        raise ValueError(f"gram pairing needs even degree, got {d}")
    full = get_basis(n, d)
    half = get_basis(n, d // 2)
    pairs: list[tuple[tuple[int, int], ...]] = []
    by_alpha: list[list[tuple[int, int]]] = [[] for _ in range(full.size)]
    for b, eb in enumerate(half.exponents):
        for g, eg in enumerate(half.exponents):
            s = tuple(x + y for x, y in zip(eb, eg))
            by_alpha[full.index[s]].append((b, g))
    for lst in by_alpha:
        pairs.append(tuple(lst))
    return tuple(pairs)


def pair_matrix(n: int, d: int, alpha: int) -> np.ndarray:
    """0/1 symmetric matrix M_alpha with Tr(M_alpha W) = sum over the
    pairing class of alpha of W entries."""
    half = get_basis(n, d // 2)
    M = np.zeros((half.size, half.size))
    for b, g in gram_pairs(n, d)[alpha]:
        M[b, g] = 1.0
    return M


class Polynomial:
    """A polynomial stored as a dense coefficient vector over get_basis(n, d)."""

    __slots__ = ("basis", "coeffs")

    def __init__(self, basis: MonomialBasis, coeffs: np.ndarray):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (basis.size,):
            raise ValueError(f"expected {basis.size} coefficients, got {coeffs.shape}")
        coeffs = coeffs.copy()
        coeffs.flags.writeable = False
        self.basis = basis
        self.coeffs = coeffs

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, n: int, d: int = 0) -> "Polynomial":
        return cls(get_basis(n, d), np.zeros(basis_size(n, d)))

    @classmethod
    def constant(cls, n: int, value: float, d: int = 0) -> "Polynomial":
        c = np.zeros(basis_size(n, d))
        c[0] = value
        return cls(get_basis(n, d), c)

    @classmethod
    def coordinate(cls, n: int, k: int, d: int = 1) -> "Polynomial":
        """The polynomial x_{k+1} (0-based k)."""
        if not 0 <= k < n:
            raise ValueError(f"coordinate {k} out of range for n={n}")
        c = np.zeros(basis_size(n, d))
        c[1 + k] = 1.0
        return cls(get_basis(n, d), c)

    @classmethod
    def from_terms(
        cls,
        n: int,
        terms: Iterable[tuple[Sequence[int], float]],
        d: int | None = None,
    ) -> "Polynomial":
        """Build from (exponent-tuple, coefficient) pairs; duplicates are summed."""
        terms = [(tuple(int(e) for e in exps), float(c)) for exps, c in terms]
        for exps, _ in terms:
            if len(exps) != n:
                raise ValueError(f"exponent tuple {exps} has length != n={n}")
            if any(e < 0 for e in exps):
                raise ValueError(f"negative exponent in {exps}")
        if d is None:
            d = max((sum(exps) for exps, _ in terms), default=0)
        basis = get_basis(n, d)
        c = np.zeros(basis.size)
        for exps, coef in terms:
            if sum(exps) > d:
                raise ValueError(f"term {exps} exceeds degree bound {d}")
            c[basis.index[exps]] += coef
        return cls(basis, c)

    # -- basic queries -----------------------------------------------------

    @property
    def n(self) -> int:
        return self.basis.n

    @property
    def degree(self) -> int:
        nz = np.nonzero(self.coeffs)[0]
        if nz.size == 0:
            return 0
        return max(sum(self.basis.exponents[a]) for a in nz)

    def coeff_norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def terms(self) -> list[tuple[MultiIndex, float]]:
        return [
            (self.basis.exponents[a], float(c))
            for a, c in enumerate(self.coeffs)
            if c != 0.0
        ]

    def pad_to_degree(self, d: int) -> "Polynomial":
        if d < self.basis.d:
            raise ValueError(f"cannot shrink degree bound {self.basis.d} -> {d}")
        if d == self.basis.d:
            return self
        basis = get_basis(self.n, d)
        c = np.zeros(basis.size)
        c[: self.basis.size] = self.coeffs  # prefix property of the graded order
        return Polynomial(basis, c)

    # -- evaluation --------------------------------------------------------

    def evaluate(self, x) -> float | np.ndarray:
        """Evaluate at a point of R^n or row-wise at an (N, n) array."""
        pts = np.asarray(x, dtype=float)
        single = pts.ndim == 1
        if single:
            pts = pts[None, :]
        if pts.shape[1] != self.n:
            raise ValueError(f"point dimension {pts.shape[1]} != n={self.n}")
        powers = [
            np.power.outer(pts[:, k], np.arange(self.basis.d + 1))
            for k in range(self.n)
        ]
        total = np.zeros(pts.shape[0])
        for a in np.nonzero(self.coeffs)[0]:
            exps = self.basis.exponents[a]
            term = np.full(pts.shape[0], self.coeffs[a])
            for k, e in enumerate(exps):
                if e:
                    term = term * powers[k][:, e]
            total += term
        return float(total[0]) if single else total

    __call__ = evaluate

    # -- arithmetic --------------------------------------------------------

    def _aligned(self, other: "Polynomial") -> tuple[np.ndarray, np.ndarray, MonomialBasis]:
        if self.n != other.n:
            raise ValueError(f"variable counts differ: {self.n} vs {other.n}")
        d = max(self.basis.d, other.basis.d)
        a = self.pad_to_degree(d)
        b = other.pad_to_degree(d)
        return a.coeffs, b.coeffs, a.basis

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = Polynomial.constant(self.n, float(other))
        ca, cb, basis = self._aligned(other)
        return Polynomial(basis, ca + cb)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            other = Polynomial.constant(self.n, float(other))
        ca, cb, basis = self._aligned(other)
        return Polynomial(basis, ca - cb)

    def __neg__(self):
        return Polynomial(self.basis, -self.coeffs)

    def scale(self, c: float) -> "Polynomial":
        return Polynomial(self.basis, float(c) * self.coeffs)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return self.scale(float(other))
        if self.n != other.n:
            raise ValueError(f"variable counts differ: {self.n} vs {other.n}")
        da, db = self.degree, other.degree
        d = da + db
        if d > MAX_DEGREE:
            raise DegreeCapError(f"product degree {d} exceeds cap {MAX_DEGREE}")
        basis = get_basis(self.n, d)
        out = np.zeros(basis.size)
        nza = np.nonzero(self.coeffs)[0]
        nzb = np.nonzero(other.coeffs)[0]
        for a in nza:
            ea = self.basis.exponents[a]
            ca = self.coeffs[a]
            for b in nzb:
                eb = other.basis.exponents[b]
                s = tuple(x + y for x, y in zip(ea, eb))
                out[basis.index[s]] += ca * other.coeffs[b]
        return Polynomial(basis, out)

    __rmul__ = __mul__

    def gradient(self) -> tuple["Polynomial", ...]:
        """Partial derivatives, each over the basis of degree max(d-1, 0)."""
        dg = max(self.basis.d - 1, 0)
        basis = get_basis(self.n, dg)
        grads = [np.zeros(basis.size) for _ in range(self.n)]
        for a in np.nonzero(self.coeffs)[0]:
            exps = self.basis.exponents[a]
            c = self.coeffs[a]
            for k, e in enumerate(exps):
                if e:
                    low = list(exps)
                    low[k] -= 1
                    grads[k][basis.index[tuple(low)]] += c * e
        return tuple(Polynomial(basis, g) for g in grads)

    def lift_to_xy(self, block: str) -> "Polynomial":
        """View over R^{2n}: 'x' keeps the first n variables, 'y' the last n."""
        if block not in ("x", "y"):
            raise ValueError(f"block must be 'x' or 'y', got {block!r}")
        n2 = 2 * self.n
        basis = get_basis(n2, self.basis.d)
        zeros = (0,) * self.n
        out = np.zeros(basis.size)
        for a in np.nonzero(self.coeffs)[0]:
            exps = self.basis.exponents[a]
            lifted = exps + zeros if block == "x" else zeros + exps
            out[basis.index[lifted]] = self.coeffs[a]
        return Polynomial(basis, out)

    # -- misc ----------------------------------------------------------------

    def __eq__(self, other) -> bool:
        if not isinstance(other, Polynomial):
            return NotImplemented
        if self.n != other.n:
            return False
        ca, cb, _ = self._aligned(other)
        return bool(np.array_equal(ca, cb))

    def __hash__(self):
        return hash((self.basis, self.coeffs.tobytes()))

    def __str__(self) -> str:
        parts = []
        for a, c in enumerate(self.coeffs):
            if abs(c) <= _PRINT_TOL:
                continue
            exps = self.basis.exponents[a]
            mono = "*".join(
                f"x{k + 1}" + (f"^{e}" if e > 1 else "")
                for k, e in enumerate(exps)
                if e
            )
            if not mono:
                parts.append(f"{c:g}")
            elif c == 1.0:
                parts.append(mono)
            elif c == -1.0:
                parts.append(f"-{mono}")
            else:
                parts.append(f"{c:g}*{mono}")
        return " + ".join(parts).replace("+ -", "- ") if parts else "0"

    def __repr__(self) -> str:
        return f"Polynomial({self})"
