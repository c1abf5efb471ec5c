"""Exact vector-field algebra: brackets, closures, prolongations, rank tests.

Components are Laurent polynomials with rational exponents and
:class:`~fractions.Fraction` coefficients, optionally divided by a common
polynomial denominator so that rational fields such as ``x/(1+x^2) d/dv``
can be bracketed exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from . import exprlang as el

__all__ = ["Poly", "PolyVectorField", "LieClosureResult", "bracket",
           "lie_closure", "diagonal_prolongation", "minimal_m",
           "verify_structure_constants", "table_to_constants", "rank", "in_span",
           "lincomb", "generic_rank",
           "NoMFound", "presets"]


def _frac(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, (int, np.integer)):
        return Fraction(int(c))
    return Fraction(float(c))


class Poly:
    """Sparse Laurent polynomial: ``{exponents: coefficient}`` in ``nvars``."""

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars: int, terms=None):
        self.nvars = nvars
        clean = {}
        for k, c in (terms or {}).items():
            c = _frac(c)
            if c:
                clean[tuple(Fraction(e) for e in k)] = c
        self.terms = clean

    @classmethod
    def const(cls, nvars, c):
        return cls(nvars, {(0,) * nvars: c})

    @classmethod
    def var(cls, nvars, i, power=1):
        e = [0] * nvars
        e[i] = power
        return cls(nvars, {tuple(e): 1})

    def is_zero(self):
        return not self.terms

    def is_one(self):
        return len(self.terms) == 1 and self.terms.get((Fraction(0),) * self.nvars) == 1

    def monomial(self):
        """``(exps, coeff)`` if a single term, else ``None``."""
        if len(self.terms) == 1:
            return next(iter(self.terms.items()))
        return None

    def __eq__(self, other):
        return isinstance(other, Poly) and self.nvars == other.nvars and self.terms == other.terms

    def __hash__(self):
        return hash((self.nvars, frozenset(self.terms.items())))

    def __add__(self, other):
        out = dict(self.terms)
        for k, c in other.terms.items():
            out[k] = out.get(k, 0) + c
        return Poly(self.nvars, out)

    def __neg__(self):
        return Poly(self.nvars, {k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        c = _frac(c)
        return Poly(self.nvars, {k: c * v for k, v in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, Poly):
            out = {}
            for k1, c1 in self.terms.items():
                for k2, c2 in other.terms.items():
                    k = tuple(a + b for a, b in zip(k1, k2))
                    out[k] = out.get(k, 0) + c1 * c2
            return Poly(self.nvars, out)
        return self.scale(other)

    __rmul__ = __mul__

    def shift(self, exps, c=1):
        """Multiply by the monomial ``c * x^exps``."""
        c = _frac(c)
        return Poly(self.nvars, {tuple(a + b for a, b in zip(k, exps)): v * c
                                 for k, v in self.terms.items()})

    def diff(self, i):
        out = {}
        for k, c in self.terms.items():
            if k[i]:
                kk = list(k)
                kk[i] -= 1
                out[tuple(kk)] = c * k[i]
        return Poly(self.nvars, out)

    def rename(self, nvars, offset):
        """Embed into ``nvars`` variables starting at index ``offset``."""
        out = {}
        for k, c in self.terms.items():
            e = [Fraction(0)] * nvars
            e[offset:offset + self.nvars] = k
            out[tuple(e)] = c
        return Poly(nvars, out)

    def __call__(self, x) -> float:
        s = 0.0
        for k, c in self.terms.items():
            term = float(c)
            for xi, e in zip(x, k):
                if e:
                    term *= xi ** int(e) if e.denominator == 1 else math.pow(xi, float(e))
            s += term
        return s

    def norm(self) -> float:
        return max((abs(float(c)) for c in self.terms.values()), default=0.0)

    def __repr__(self):
        return f"Poly({self.nvars}, {self.terms})"


def _normalize(nums, den):
    """Absorb a monomial denominator into Laurent numerators."""
    mono = den.monomial()
    if mono is not None:
        exps, c = mono
        neg = tuple(-e for e in exps)
        return [p.shift(neg, 1 / c) for p in nums], Poly.const(den.nvars, 1)
    return nums, den


class PolyVectorField:
    """Vector field ``sum_i (P_i / Q) d/dx_i`` with exact coefficients."""

    __slots__ = ("dim", "comps", "den", "names")

    def __init__(self, comps: Sequence[Poly], den: Poly | None = None,
                 names: Sequence[str] | None = None):
        if not comps:
            raise ValueError("need at least one component")
        self.dim = comps[0].nvars
        if len(comps) != self.dim:
            raise ValueError("number of components must equal number of variables")
        den = den if den is not None else Poly.const(self.dim, 1)
        if den.is_zero():
            raise ZeroDivisionError("zero denominator")
        comps, den = _normalize(list(comps), den)
        self.comps = tuple(comps)
        self.den = den
        self.names = tuple(names) if names else tuple(f"x{i + 1}" for i in range(self.dim))

    # construction -----------------------------------------------------
    @classmethod
    def from_exprs(cls, comps, names: Sequence[str], params: dict | None = None):
        """Build from exprlang sources, e.g. ``["v", "-x^3"]`` with names ``("x", "v")``."""
        n = len(names)
        rats = [_to_rational(el.as_expr(c), list(names), params or {}) for c in comps]
        dens = []
        for _, d in rats:
            if not d.is_one() and d not in dens:
                dens.append(d)
        one = Poly.const(n, 1)
        common = one
        for d in dens:
            common = common * d
        nums = []
        for p, d in rats:
            mult = one
            for dd in dens:
                if dd != d:
                    mult = mult * dd
            nums.append(p * mult)
        return cls(nums, common, names)

    @classmethod
    def zero(cls, n, names=None):
        return cls([Poly(n) for _ in range(n)], None, names)

    # algebra ----------------------------------------------------------
    def is_polynomial(self):
        return self.den.is_one()

    def __add__(self, other):
        return lincomb([1, 1], [self, other])

    def __sub__(self, other):
        return lincomb([1, -1], [self, other])

    def __neg__(self):
        return PolyVectorField([-p for p in self.comps], self.den, self.names)

    def scale(self, c):
        return PolyVectorField([p.scale(c) for p in self.comps], self.den, self.names)

    def __mul__(self, c):
        return self.scale(c)

    __rmul__ = __mul__

    def is_zero(self):
        return all(p.is_zero() for p in self.comps)

    def __eq__(self, other):
        if not isinstance(other, PolyVectorField) or other.dim != self.dim:
            return False
        return all((p * other.den) == (q * self.den)
                   for p, q in zip(self.comps, other.comps))

    __hash__ = None

    def __call__(self, x):
        d = self.den(x)
        return np.array([p(x) for p in self.comps]) / d

    def norm(self):
        return max(p.norm() for p in self.comps)

    def __repr__(self):
        return f"PolyVectorField({list(self.comps)}, den={self.den})"


def _const_fraction(e):
    """Exact rational value of a literal-only subtree, else ``None``."""
    if isinstance(e, el.Const):
        return Fraction(repr(e.value))
    if isinstance(e, el.Unary) and e.op == "neg":
        v = _const_fraction(e.arg)
        return None if v is None else -v
    if isinstance(e, el.Binary) and e.op in "+-*/":
        a, b = _const_fraction(e.left), _const_fraction(e.right)
        if a is None or b is None:
            return None
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        return a / b if b else None
    if isinstance(e, el.Binary) and e.op == "^":
        a, b = _const_fraction(e.left), _const_fraction(e.right)
        if a is not None and b is not None and b.denominator == 1:
            return a ** int(b)
    return None


def _to_rational(e, names, params):
    n = len(names)
    one = Poly.const(n, 1)
    c = _const_fraction(e)
    if c is not None:
        return Poly.const(n, c), one
    if isinstance(e, el.Var):
        if e.name in names:
            return Poly.var(n, names.index(e.name)), one
        if e.name in params:
            return Poly.const(n, _frac(params[e.name])), one
        raise el.UnknownIdentifier(f"unknown symbol {e.name!r}", e.pos or 0)
    if isinstance(e, el.Unary):
        if e.op != "neg":
            raise ValueError(f"{e.op} is not a rational function")
        p, q = _to_rational(e.arg, names, params)
        return -p, q
    p, q = _to_rational(e.left, names, params)
    if e.op == "^":
        k = _const_fraction(e.right)
        if k is None and isinstance(e.right, el.Var) and e.right.name in params:
            k = _frac(params[e.right.name])
        if k is None:
            raise ValueError("exponent must be constant")
        return _rat_pow(p, q, k)
    r, s = _to_rational(e.right, names, params)
    if e.op == "*":
        return p * r, q * s
    if e.op == "/":
        if r.is_zero():
            raise ZeroDivisionError("division by zero polynomial")
        num, den = p * s, q * r
    elif q == s:
        num, den = (p + r if e.op == "+" else p - r), q
    else:
        num = p * s + r * q if e.op == "+" else p * s - r * q
        den = q * s
    (num,), den = _normalize([num], den)
    return num, den


def _rat_pow(p, q, k):
    n = p.nvars
    one = Poly.const(n, 1)
    if k.denominator == 1:
        kk = int(k)
        base_n, base_d = (p, q) if kk >= 0 else (q, p)
        rn, rd = one, one
        for _ in range(abs(kk)):
            rn, rd = rn * base_n, rd * base_d
        (rn,), rd = _normalize([rn], rd)
        return rn, rd
    mp, mq = p.monomial(), q.monomial()
    if mp is None or mq is None:
        raise ValueError("fractional power of a non-monomial")
    (ep, cp), (eq, cq) = mp, mq
    ratio = cp / cq
    if ratio != 1:
        raise ValueError("fractional power needs unit coefficient")
    exps = tuple((a - b) * k for a, b in zip(ep, eq))
    return Poly(n, {exps: 1}), one


# ---------------------------------------------------------------- bracket

def bracket(X: PolyVectorField, Y: PolyVectorField) -> PolyVectorField:
    """Exact Lie bracket ``[X,Y]^i = sum_j X^j d_j Y^i - Y^j d_j X^i``."""
    if X.dim != Y.dim:
        raise ValueError("dimension mismatch")
    n = X.dim
    P, Q, R, S = X.comps, X.den, Y.comps, Y.den
    if X.is_polynomial() and Y.is_polynomial():
        comps = []
        for i in range(n):
            acc = Poly(n)
            for j in range(n):
                if not P[j].is_zero():
                    acc = acc + P[j] * R[i].diff(j)
                if not R[j].is_zero():
                    acc = acc - R[j] * P[i].diff(j)
            comps.append(acc)
        return PolyVectorField(comps, None, X.names)
    if Q == S:
        # X^j d_j(R^i/Q) - Y^j d_j(P^i/Q) over Q^3
        comps = []
        for i in range(n):
            acc = Poly(n)
            for j in range(n):
                dQ = Q.diff(j)
                acc = acc + P[j] * (R[i].diff(j) * Q - R[i] * dQ)
                acc = acc - R[j] * (P[i].diff(j) * Q - P[i] * dQ)
            comps.append(acc)
        return PolyVectorField(comps, Q * Q * Q, X.names)
    comps = []
    for i in range(n):
        a = Poly(n)
        b = Poly(n)
        for j in range(n):
            a = a + P[j] * (R[i].diff(j) * S - R[i] * S.diff(j))
            b = b + R[j] * (P[i].diff(j) * Q - P[i] * Q.diff(j))
        comps.append(a * Q - b * S)
    return PolyVectorField(comps, Q * Q * S * S, X.names)


def lincomb(coeffs, fields: Sequence[PolyVectorField]) -> PolyVectorField:
    """Exact ``sum_k c_k X_k`` over a common denominator."""
    fields = list(fields)
    if not fields:
        raise ValueError("empty combination")
    n = fields[0].dim
    dens = _distinct_dens(fields)
    common, mults = _common(dens, fields)
    comps = [Poly(n) for _ in range(n)]
    for c, f, m in zip(coeffs, fields, mults):
        c = _frac(c)
        if not c:
            continue
        for i in range(n):
            comps[i] = comps[i] + (f.comps[i] * m).scale(c)
    return PolyVectorField(comps, common, fields[0].names)


def _distinct_dens(fields):
    dens = []
    for f in fields:
        if not f.den.is_one() and f.den not in dens:
            dens.append(f.den)
    return dens


def _common(dens, fields):
    n = fields[0].dim
    one = Poly.const(n, 1)
    common = one
    for d in dens:
        common = common * d
    mults = []
    for f in fields:
        m = one
        for d in dens:
            if d != f.den:
                m = m * d
        mults.append(m)
    return common, mults


# ------------------------------------------------------- exact linear span

class _Echelon:
    """Incremental sparse row echelon form over the rationals."""

    def __init__(self):
        self.rows = []  # (pivot key, row dict)

    def reduce(self, vec):
        v = dict(vec)
        for p, row in self.rows:
            c = v.get(p)
            if c:
                f = c / row[p]
                for k, rv in row.items():
                    nv = v.get(k, 0) - f * rv
                    if nv:
                        v[k] = nv
                    else:
                        v.pop(k, None)
        return v

    def add(self, vec) -> bool:
        v = self.reduce(vec)
        if not v:
            return False
        self.rows.append((min(v), v))
        return True

    def __len__(self):
        return len(self.rows)


def _vector(f, mult):
    vec = {}
    for i, p in enumerate(f.comps):
        for k, c in (p * mult).terms.items():
            vec[(i, k)] = c
    return vec


class _Span:
    """Exact span of vector fields, rebuilt when a new denominator appears."""

    def __init__(self, fields=()):
        self.fields = []
        self.dens = []
        self.ech = _Echelon()
        for f in fields:
            self.add(f)

    def _mult(self, f):
        one = Poly.const(f.dim, 1)
        m = one
        for d in self.dens:
            if d != f.den:
                m = m * d
        return m

    def _extend_dens(self, f):
        if f.den.is_one() or f.den in self.dens:
            return
        self.dens.append(f.den)
        self.ech = _Echelon()
        for g in self.fields:
            self.ech.add(_vector(g, self._mult(g)))

    def contains(self, f) -> bool:
        if f.is_zero():
            return True
        if not f.den.is_one() and f.den not in self.dens:
            probe = _Span(self.fields + [])
            probe._extend_dens(f)
            return probe.contains(f)
        return not self.ech.reduce(_vector(f, self._mult(f)))

    def add(self, f) -> bool:
        self._extend_dens(f)
        if self.ech.add(_vector(f, self._mult(f))):
            self.fields.append(f)
            return True
        return False

    def __len__(self):
        return len(self.fields)


def rank(fields: Iterable[PolyVectorField]) -> int:
    """Exact dimension of the real span of ``fields``."""
    return len(_Span(list(fields)))


def in_span(f: PolyVectorField, fields: Iterable[PolyVectorField]) -> bool:
    return _Span(list(fields)).contains(f)


# ---------------------------------------------------------------- closure

@dataclass
class LieClosureResult:
    status: str
    basis: list
    dimension: int
    log: list = field(default_factory=list)

    @property
    def finite(self):
        return self.status == "finite"


def lie_closure(gens: Sequence[PolyVectorField], cap: int = 32) -> LieClosureResult:
    """Extend ``gens`` by brackets until closed or the dimension exceeds ``cap``.

    ``log`` entries are ``(i, j, k)``: basis element ``k`` is ``[basis_i, basis_j]``.
    """
    gens = list(gens)
    if cap < len(gens):
        raise ValueError("cap must be at least the number of generators")
    span = _Span()
    basis, log = [], []
    for g in gens:
        if span.add(g):
            basis.append(g)
            log.append(("gen", len(basis) - 1))
    i = 0
    pairs_done = set()
    while True:
        new = False
        for a in range(len(basis)):
            for b in range(a + 1, len(basis)):
                if (a, b) in pairs_done:
                    continue
                pairs_done.add((a, b))
                br = bracket(basis[a], basis[b])
                if span.contains(br):
                    continue
                if len(basis) + 1 > cap:
                    return LieClosureResult("exceeded-cap", basis, len(basis), log)
                span.add(br)
                basis.append(br)
                log.append((a, b, len(basis) - 1))
                new = True
        if not new:
            break
        i += 1
    return LieClosureResult("finite", basis, len(basis), log)


# ------------------------------------------------------------ prolongation

def diagonal_prolongation(X: PolyVectorField, m: int) -> PolyVectorField:
    """Copy ``X`` onto each of ``m`` blocks of variables of R^(n*m)."""
    if m < 1:
        raise ValueError("m must be >= 1")
    n = X.dim
    N = n * m
    dens = [X.den.rename(N, a * n) for a in range(m)]
    one = Poly.const(N, 1)
    comps = []
    for a in range(m):
        mult = one
        if not X.den.is_one():
            for b in range(m):
                if b != a:
                    mult = mult * dens[b]
        for p in X.comps:
            comps.append(p.rename(N, a * n) * mult)
    common = one
    if not X.den.is_one():
        for d in dens:
            common = common * d
    names = [f"{nm}_{a + 1}" for a in range(m) for nm in X.names]
    return PolyVectorField(comps, common, names)


class NoMFound(ValueError):
    pass


def _sample_point(rng, dim, fields):
    for _ in range(1000):
        x = rng.uniform(-2.0, 2.0, size=dim)
        if dim > 1:
            d = np.abs(x[:, None] - x[None, :]) + np.eye(dim) * 10
            if d.min() < 1e-3:
                continue
        if any(abs(f.den(x)) < 1e-6 for f in fields):
            continue
        return x
    raise RuntimeError("could not draw a generic sample point")


def generic_rank(fields, m, samples=7, rng=None):
    """Numerical rank of the m-fold prolongations at random points (list)."""
    rng = rng if rng is not None else np.random.default_rng(0)
    n = fields[0].dim
    ranks = []
    for _ in range(samples):
        pts = [_sample_point(rng, n, fields) for _ in range(m)]
        # avoid coincidences across blocks too
        flat = np.concatenate(pts)
        while len(flat) > 1 and (np.abs(flat[:, None] - flat[None, :]) + np.eye(len(flat)) * 10).min() < 1e-3:
            pts = [_sample_point(rng, n, fields) for _ in range(m)]
            flat = np.concatenate(pts)
        M = np.array([np.concatenate([f(p) for p in pts]) for f in fields])
        if not np.all(np.isfinite(M)):
            continue
        sv = np.linalg.svd(M, compute_uv=False)
        ranks.append(int(np.sum(sv > 1e-8 * sv[0])) if sv[0] > 0 else 0)
    return ranks


def minimal_m(fields: Sequence[PolyVectorField], max_m: int = 8,
              samples: int = 7, seed: int = 0) -> int:
    """Smallest number of copies whose prolongations are generically independent."""
    fields = list(fields)
    r = len(fields)
    rng = np.random.default_rng(seed)
    for m in range(1, max_m + 1):
        ranks = generic_rank(fields, m, samples, rng)
        if ranks and sum(1 for k in ranks if k == r) * 2 > len(ranks):
            return m
    raise NoMFound(f"no m <= {max_m} gives full rank {r}")


# ----------------------------------------------------- structure constants

def verify_structure_constants(fields: Sequence[PolyVectorField], c) -> float:
    """Max coefficient norm of ``[X_a,X_b] - sum_g c[a][b][g] X_g``."""
    fields = list(fields)
    r = len(fields)
    c = np.asarray(c, dtype=object)
    if c.shape != (r, r, r):
        raise ValueError("structure constants must have shape (r, r, r)")
    worst = 0.0
    for a in range(r):
        for b in range(r):
            diff = lincomb([1] + [-_frac(c[a, b, g]) for g in range(r)],
                           [bracket(fields[a], fields[b])] + fields)
            worst = max(worst, diff.norm())
    return worst


def table_to_constants(r, table):
    """Antisymmetric 3-index array from ``{(a, b): {g: coeff}}`` (1-based)."""
    c = np.zeros((r, r, r), dtype=object)
    c[...] = Fraction(0)
    for (a, b), row in table.items():
        for g, v in row.items():
            c[a - 1, b - 1, g - 1] = _frac(v) if not isinstance(v, str) else Fraction(v)
            c[b - 1, a - 1, g - 1] = -c[a - 1, b - 1, g - 1]
    return c


# ----------------------------------------------------------------- presets

def _f(names, *comps, params=None):
    return PolyVectorField.from_exprs(list(comps), names, params)


def presets():
    """Named field families and structure tables used across the package."""
    x1 = ("x",)
    xv = ("x", "v")
    riccati = [_f(x1, "1"), _f(x1, "x"), _f(x1, "x^2")]
    painleve = [
        _f(xv, "v", "-(3*x*v + x^3)"), _f(xv, "0", "1"),
        _f(xv, "-1", "3*x"), _f(xv, "x", "-2*x^2"),
        _f(xv, "v + 2*x^2", "-x*(v + 3*x^2)"),
        _f(xv, "2*x*(v + x^2)", "2*(v^2 - x^4)"),
        _f(xv, "1", "-x"), _f(xv, "2*x", "4*v"),
    ]
    tdho = [_f(xv, "v", "0"), _f(xv, "x/2", "-v/2"), _f(xv, "0", "-x")]
    erm = ("x", "y", "vx", "vy")
    # f(u) = 1 + u, g(u) = u^2 with u = y/x
    ermakov = [
        _f(erm, "vx", "vy", "x^(-3)*(1 + y/x)", "y^(-3)*(y/x)^2"),
        _f(erm, "x/2", "y/2", "-vx/2", "-vy/2"),
        _f(erm, "0", "0", "-x", "-y"),
    ]
    linear2 = [_f(("x1", "x2"), *c) for c in
               (("x1", "0"), ("x2", "0"), ("0", "x1"), ("0", "x2"))]
    affine2 = linear2 + [_f(("x1", "x2"), "1", "0"), _f(("x1", "x2"), "0", "1")]
    abel = [_f(x1, "x^2"), _f(x1, "x^3")]
    return {
        "riccati": (riccati, {(1, 2): {1: 1}, (1, 3): {2: 2}, (2, 3): {3: 1}}),
        "painleve": (painleve, PAINLEVE_TABLE),
        "tdho": (tdho, {(1, 3): {2: 2}, (2, 3): {3: 1}, (1, 2): {1: 1}}),
        "ermakov": (ermakov, {(1, 3): {2: 2}, (1, 2): {1: 1}, (2, 3): {3: 1}}),
        "linear2": (linear2, None),
        "affine2": (affine2, None),
        "abel": (abel, None),
    }


PAINLEVE_TABLE = {
    (1, 2): {3: 1}, (1, 3): {4: -3}, (1, 4): {5: 1}, (1, 5): {6: 1},
    (1, 6): {}, (1, 7): {8: Fraction(1, 2)}, (1, 8): {1: -2}, (2, 3): {},
    (2, 4): {}, (2, 5): {7: 1}, (2, 6): {8: 1}, (2, 7): {},
    (2, 8): {2: 4}, (3, 4): {7: -1}, (3, 5): {8: Fraction(-1, 2)},
    (3, 6): {1: -2}, (3, 7): {2: -2}, (3, 8): {3: 2}, (4, 5): {1: -1},
    (4, 6): {}, (4, 7): {3: 1}, (4, 8): {}, (5, 6): {}, (5, 7): {4: -3},
    (5, 8): {5: -2}, (6, 7): {5: -2}, (6, 8): {6: -4}, (7, 8): {7: 2},
}
