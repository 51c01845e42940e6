"""Versioned JSON problem files: schema validation, parsing, serialization.

Version "1" files carry either an SOS-convex semialgebraic program
(objective + constraints, each {"h": [poly...], "omega": {...}}) or a robust
program ({"robust": {...}}).  Polynomials are exponent/coefficient records;
duplicate exponent tuples are summed.  LMI matrices travel as dense symmetric
lower triangles, row-major.  Unknown fields are rejected before any numeric
work happens.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .poly import Polynomial
from .robust import RobustProgram, UncertainConstraint
from .sdp import SymMatrix
from .spectra import Spectrahedron
from . import ssafunc as sf

SCHEMA_VERSION = "1"

OMEGA_BUILDERS = ("simplex", "l2_ball", "box", "psd_trace_one", "trivial", "lmi")
FUNCTION_BUILDERS = ("l1_norm", "euclidean_norm", "lambda_max")


class SchemaError(ValueError):
    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}")
        self.path = path


def _need(obj, path, keys: set[str], optional: set[str] = frozenset()):
    if not isinstance(obj, dict):
        raise SchemaError(path, f"expected an object, got {type(obj).__name__}")
    for k in obj:
        if k not in keys and k not in optional:
            raise SchemaError(f"{path}.{k}", "unknown field")
    for k in keys:
        if k not in obj:
            raise SchemaError(path, f"missing required field {k!r}")


def _num(v, path) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SchemaError(path, f"expected a number, got {type(v).__name__}")
    return float(v)


def _int(v, path, lo=None) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise SchemaError(path, f"expected an integer, got {type(v).__name__}")
    if lo is not None and v < lo:
        raise SchemaError(path, f"must be >= {lo}")
    return v


def _poly(obj, path, n: int) -> Polynomial:
    if not isinstance(obj, list):
        raise SchemaError(path, "a polynomial is a list of term records")
    terms = []
    for k, t in enumerate(obj):
        tp = f"{path}[{k}]"
        _need(t, tp, {"exps", "coef"})
        exps = t["exps"]
        if (not isinstance(exps, list) or len(exps) != n
                or any(isinstance(e, bool) or not isinstance(e, int) or e < 0
                       for e in exps)):
            raise SchemaError(f"{tp}.exps",
                              f"expected {n} nonnegative integers")
        terms.append((tuple(exps), _num(t["coef"], f"{tp}.coef")))
    return Polynomial.from_terms(n, terms)


def _tri_matrix(obj, path) -> SymMatrix:
    if not isinstance(obj, list) or any(
            isinstance(v, bool) or not isinstance(v, (int, float)) for v in obj):
        raise SchemaError(path, "expected a flat list of numbers "
                               "(symmetric lower triangle, row-major)")
    t = int((np.sqrt(8 * len(obj) + 1) - 1) / 2)
    if t * (t + 1) // 2 != len(obj):
        raise SchemaError(path, f"length {len(obj)} is not a triangular number")
    return SymMatrix(t, np.array(obj, dtype=float))


def _omega(obj, path, n: int) -> Spectrahedron:
    _need(obj, path, {"type"}, {"m", "k", "lo", "hi", "t", "A", "B"})
    kind = obj["type"]
    if kind == "simplex":
        _need(obj, path, {"type", "m"})
        return Spectrahedron.simplex(_int(obj["m"], f"{path}.m", lo=1))
    if kind == "l2_ball":
        _need(obj, path, {"type", "m"})
        return Spectrahedron.l2_ball(_int(obj["m"], f"{path}.m", lo=1))
    if kind == "box":
        _need(obj, path, {"type", "lo", "hi"})
        lo = [_num(v, f"{path}.lo") for v in obj["lo"]]
        hi = [_num(v, f"{path}.hi") for v in obj["hi"]]
        return Spectrahedron.box(lo, hi)
    if kind == "psd_trace_one":
        _need(obj, path, {"type", "k"})
        return Spectrahedron.psd_trace_one(_int(obj["k"], f"{path}.k", lo=1))
    if kind == "trivial":
        _need(obj, path, {"type"})
        return Spectrahedron.trivial()
    if kind == "lmi":
        _need(obj, path, {"type", "A"}, {"B", "t"})
        A = [_tri_matrix(M, f"{path}.A[{i}]") for i, M in enumerate(obj["A"])]
        B = [_tri_matrix(M, f"{path}.B[{i}]") for i, M in enumerate(obj.get("B", []))]
        if "t" in obj:
            t = _int(obj["t"], f"{path}.t", lo=1)
            if any(M.dim != t for M in A + B):
                raise SchemaError(f"{path}.t", "matrix sizes disagree with t")
        return Spectrahedron(A, B, validate=True)
    raise SchemaError(f"{path}.type",
                      f"unknown spectrahedron type {kind!r}; expected one of "
                      f"{OMEGA_BUILDERS + FUNCTION_BUILDERS}")


def _function(obj, path, n: int) -> sf.SsaFunction:
    _need(obj, path, {"omega"}, {"h"})
    om = obj["omega"]
    if isinstance(om, dict) and om.get("type") in FUNCTION_BUILDERS:
        if "h" in obj:
            raise SchemaError(f"{path}.h",
                              f"builder {om['type']!r} supplies its own pieces")
        kind = om["type"]
        if kind == "l1_norm":
            _need(om, f"{path}.omega", {"type"})
            return sf.l1_norm(n)
        if kind == "euclidean_norm":
            _need(om, f"{path}.omega", {"type"})
            return sf.euclidean_norm(n)
        _need(om, f"{path}.omega", {"type", "k"})
        k = _int(om["k"], f"{path}.omega.k", lo=1)
        if n != k * (k + 1) // 2:
            raise SchemaError(f"{path}.omega.k",
                              f"lambda_max of S^{k} needs n = {k * (k + 1) // 2}")
        return sf.lambda_max(k)
    if "h" not in obj:
        raise SchemaError(path, "missing required field 'h'")
    omega = _omega(om, f"{path}.omega", n)
    h = [_poly(p, f"{path}.h[{i}]", n) for i, p in enumerate(obj["h"])]
    if len(h) != omega.m + 1:
        raise SchemaError(f"{path}.h",
                          f"need {omega.m + 1} polynomials for this index set, "
                          f"got {len(h)}")
    return sf.SsaFunction(h, omega)


@dataclass
class ParsedProblem:
    version: str
    n: int
    kind: str  # "ssa" | "robust"
    program: sf.SsaProgram | None
    robust: RobustProgram | None
    options: dict = field(default_factory=dict)
    canonical: dict = field(default_factory=dict)


def parse(text: str) -> ParsedProblem:
    """Parse and validate a problem file; json.JSONDecodeError surfaces
    syntax problems with line/column positions."""
    data = json.loads(text)
    _need(data, "$", {"version", "n"},
          {"objective", "constraints", "robust", "options"})
    if data["version"] != SCHEMA_VERSION:
        raise SchemaError("$.version",
                          f"unsupported version {data['version']!r} "
                          f"(expected {SCHEMA_VERSION!r})")
    n = _int(data["n"], "$.n", lo=1)

    options = {}
    if "options" in data:
        _need(data["options"], "$.options", set(), {"tol", "max_iter"})
        if "tol" in data["options"]:
            options["tol"] = _num(data["options"]["tol"], "$.options.tol")
        if "max_iter" in data["options"]:
            options["max_iter"] = _int(data["options"]["max_iter"],
                                       "$.options.max_iter", lo=1)

    if "robust" in data:
        if "objective" in data or "constraints" in data:
            raise SchemaError("$", "a file is either robust or plain, not both")
        rob = data["robust"]
        _need(rob, "$.robust", {"objective", "constraints"})
        obj = _poly(rob["objective"], "$.robust.objective", n)
        constraints = []
        for i, c in enumerate(rob["constraints"]):
            cp = f"$.robust.constraints[{i}]"
            _need(c, cp, {"g", "t", "U"})
            g = [_poly(p, f"{cp}.g[{j}]", n) for j, p in enumerate(c["g"])]
            t = _int(c["t"], f"{cp}.t", lo=0)
            U = [_tri_matrix(M, f"{cp}.U[{j}]") for j, M in enumerate(c["U"])]
            constraints.append(UncertainConstraint(g, t, U))
        rp = RobustProgram(obj, constraints)
        return ParsedProblem(data["version"], n, "robust", None, rp,
                             options, _canonicalize(data))

    if "objective" not in data:
        raise SchemaError("$", "missing required field 'objective'")
    objective = _function(data["objective"], "$.objective", n)
    constraints = [
        _function(c, f"$.constraints[{i}]", n)
        for i, c in enumerate(data.get("constraints", []))
    ]
    prog = sf.SsaProgram(objective, constraints)
    return ParsedProblem(data["version"], n, "ssa", prog, None,
                         options, _canonicalize(data))


def _canonicalize(data):
    """Normalized copy: numbers as floats in term/matrix positions."""
    return json.loads(json.dumps(data))


def serialize(p: ParsedProblem) -> str:
    return json.dumps(p.canonical, indent=2, sort_keys=True) + "\n"


def load(path: str) -> ParsedProblem:
    with open(path, "r", encoding="utf-8") as fh:
        return parse(fh.read())


# -- inline polynomial expressions (check-sos convenience) ----------------------


class ExprError(ValueError):
    pass


def _tokenize(s: str):
    import re

    token_re = re.compile(r"\s*(?:(\d+\.\d*|\.\d+|\d+)|(x\d+)|([()+\-*^]))")
    pos, out = 0, []
    while pos < len(s):
        mo = token_re.match(s, pos)
        if not mo or mo.end() == pos:
            raise ExprError(f"bad character at position {pos}: {s[pos]!r}")
        num, var, op = mo.groups()
        if num is not None:
            out.append(("num", float(num)))
        elif var is not None:
            out.append(("var", int(var[1:])))
        else:
            out.append((op, None))
        pos = mo.end()
    out.append(("end", None))
    return out


def parse_poly_expr(s: str) -> Polynomial:
    """Small infix grammar: numbers, x1..xn, + - * ^, parentheses."""
    import re

    vars_seen = [int(v[1:]) for v in re.findall(r"x\d+", s)]
    if any(v < 1 for v in vars_seen):
        raise ExprError("variables are numbered from x1")
    n = max(vars_seen, default=1)
    toks = _tokenize(s)
    pos = 0

    def peek():
        return toks[pos][0]

    def take(kind=None):
        nonlocal pos
        t = toks[pos]
        if kind is not None and t[0] != kind:
            raise ExprError(f"expected {kind!r}, found {t[0]!r} (token {pos})")
        pos += 1
        return t

    def atom() -> Polynomial:
        k = peek()
        if k == "num":
            return Polynomial.constant(n, take()[1])
        if k == "var":
            return Polynomial.coordinate(n, take()[1] - 1)
        if k == "(":
            take("(")
            e = expr()
            take(")")
            return e
        raise ExprError(f"unexpected token {k!r}")

    def factor() -> Polynomial:
        sign = 1.0
        while peek() in ("+", "-"):
            if take()[0] == "-":
                sign = -sign
        base = atom()
        if peek() == "^":
            take("^")
            t = take("num")
            e = t[1]
            if e != int(e) or e < 0:
                raise ExprError("exponent must be a nonnegative integer")
            out = Polynomial.constant(n, 1.0)
            for _ in range(int(e)):
                out = out * base
            base = out
        return base.scale(sign)

    def term() -> Polynomial:
        out = factor()
        while peek() == "*":
            take("*")
            out = out * factor()
        return out

    def expr() -> Polynomial:
        out = term()
        while peek() in ("+", "-"):
            if take()[0] == "+":
                out = out + term()
            else:
                out = out - term()
        return out

    result = expr()
    take("end")
    return result
