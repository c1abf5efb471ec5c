"""Closed-form superposition rules, first integrals and a numerical verifier.

Every rule pairs a forward map ``forward(t, sols, consts)`` with a constant
extractor ``extract(t, target, sols)``; :func:`verify_rule` integrates
particular solutions and a held-out one, extracts the constants at ``t0`` and
measures how well the rule reconstructs the held-out solution afterwards.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import exprlang as el
from .numerics import QuadratureError, quad
from .odecore import StepUnderflow, StoppedAtSingularity, TDVectorField, integrate

__all__ = [
    "SuperpositionRule", "VerificationReport", "SingularConfiguration",
    "BranchAmbiguity",
    "Inadmissible", "INFINITY", "riccati_rule", "riccati_constant",
    "linear_rule", "affine_rule", "linear_constants", "affine_constants",
    "pinney_I3", "pinney_invariant", "pinney_two_solution_rule",
    "pinney_sr4_constants", "pinney_classic_rule", "pinney_classic_constants",
    "pinney_from_riccati", "pinney_mixed_constants", "ermakov_lewis",
    "generalized_ermakov", "sode_velocity_free_examples", "verify_rule",
    "get_rule", "RULE_NAMES", "riccati_system", "linear_system",
    "affine_system", "milne_pinney_system", "harmonic_system",
    "riccati_unit_system", "ermakov_system",
]


class SingularConfiguration(ValueError):
    """Particular solutions are dependent or coincide."""


class Inadmissible(ValueError):
    """Constants or states fall outside the rule's admissible region."""


class _Infinity:
    """Point at infinity of the extended real line."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "INFINITY"


INFINITY = _Infinity()


@dataclass(frozen=True)
class SuperpositionRule:
    name: str
    m: int
    n: int
    forward: Callable
    extract: Callable
    sampler: Callable | None = None
    observe: Callable = staticmethod(lambda s: np.asarray(s, dtype=float))
    t_dependent: bool = False
    params: dict = field(default_factory=dict)
    description: str = ""

    def __call__(self, t, sols, consts):
        return self.forward(t, sols, consts)


# ---------------------------------------------------------------- Riccati

def riccati_rule(x1, x2, x3, k):
    """General Riccati solution from three particular ones and a cross ratio."""
    if x1 == x2 or x2 == x3 or x1 == x3:
        raise SingularConfiguration("coincident particular solutions")
    den = (x3 - x2) - k * (x3 - x1)
    num = x1 * (x3 - x2) - k * x2 * (x3 - x1)
    if den == 0:
        return INFINITY
    return num / den


def riccati_constant(x, x1, x2, x3):
    """Inverse of :func:`riccati_rule` (a cross ratio)."""
    if x1 == x2 or x2 == x3 or x1 == x3:
        raise SingularConfiguration("coincident particular solutions")
    if x is INFINITY:
        return (x3 - x2) / (x3 - x1)
    den = (x2 - x) * (x3 - x1)
    if den == 0:
        raise Inadmissible("target coincides with the second particular solution")
    return (x1 - x) * (x3 - x2) / den


def _riccati_fwd(t, sols, c):
    r = riccati_rule(sols[0][0], sols[1][0], sols[2][0], c[0])
    return np.array([math.inf if r is INFINITY else r])


def _riccati_ext(t, target, sols):
    return (riccati_constant(target[0], sols[0][0], sols[1][0], sols[2][0]),)


def _riccati_sampler(rng):
    while True:
        xs = rng.uniform(-0.6, 0.6, size=4)
        if np.min(np.abs(xs[:, None] - xs[None, :]) + np.eye(4)) > 0.1:
            return [np.array([v]) for v in xs[:3]], np.array([xs[3]])


# ---------------------------------------------------------- linear/affine

def linear_constants(x, sols):
    X = np.column_stack([np.asarray(s, dtype=float) for s in sols])
    if X.shape[0] != X.shape[1]:
        raise ValueError("need n particular solutions in R^n")
    if abs(np.linalg.det(X)) < 1e-14 * max(1.0, np.abs(X).max()) ** X.shape[0]:
        raise SingularConfiguration("particular solutions are dependent")
    return np.linalg.solve(X, np.asarray(x, dtype=float))


def linear_rule(sols, k):
    """``sum_j k_j x_(j)``."""
    return np.column_stack([np.asarray(s, dtype=float) for s in sols]) @ np.asarray(k, dtype=float)


def affine_constants(x, sols):
    x0 = np.asarray(sols[0], dtype=float)
    return linear_constants(np.asarray(x, dtype=float) - x0,
                            [np.asarray(s, dtype=float) - x0 for s in sols[1:]])


def affine_rule(sols, k):
    """``sum_j k_j (x_(j) - x_(0)) + x_(0)``."""
    x0 = np.asarray(sols[0], dtype=float)
    return x0 + linear_rule([np.asarray(s, dtype=float) - x0 for s in sols[1:]], k)


def _linear(n):
    def sampler(rng):
        while True:
            sols = [rng.uniform(-1, 1, size=n) for _ in range(n)]
            if abs(np.linalg.det(np.column_stack(sols))) > 0.2:
                return sols, rng.uniform(-1, 1, size=n)
    return SuperpositionRule(
        "linear", n, n, lambda t, s, k: linear_rule(s, k),
        lambda t, x, s: tuple(linear_constants(x, s)), sampler,
        description="homogeneous linear system")


def _affine(n):
    def sampler(rng):
        while True:
            sols = [rng.uniform(-1, 1, size=n) for _ in range(n + 1)]
            if abs(np.linalg.det(np.column_stack([s - sols[0] for s in sols[1:]]))) > 0.2:
                return sols, rng.uniform(-1, 1, size=n)
    return SuperpositionRule(
        "affine", n + 1, n, lambda t, s, k: affine_rule(s, k),
        lambda t, x, s: tuple(affine_constants(x, s)), sampler,
        description="inhomogeneous linear system")


# ------------------------------------------------------------ Milne-Pinney

def pinney_invariant(a, va, b, vb, k):
    """``(a vb - b va)^2 + k((b/a)^2 + (a/b)^2)`` for two Milne-Pinney states."""
    if a == 0 or b == 0:
        raise ZeroDivisionError("Milne-Pinney states must be nonzero")
    r = b / a
    return (a * vb - b * va) ** 2 + k * (r * r + 1.0 / (r * r))


def pinney_I3(x1, x2, v1, v2, k):
    """Generalised Wronskian of two Milne-Pinney solutions."""
    return pinney_invariant(x1, v1, x2, v2, k)


def _sr4_lambda(k1, k2, I3, k):
    den = I3 * I3 - 4 * k * k
    if den <= 0:
        raise SingularConfiguration("I3 <= 2k: particular solutions not independent")
    return (k1 * k2 * I3 + k * (-1 + k1 * k1 + k2 * k2)) / den


def _sr4_square(x1, x2, lam, k1, k2, I3, k, sign):
    rad = lam * (-k * (x1 ** 4 + x2 ** 4) + I3 * x1 * x1 * x2 * x2)
    scale = k * (x1 ** 4 + x2 ** 4)
    if rad < 0:
        if rad < -1e-10 * max(scale, 1.0):
            raise Inadmissible(f"negative inner radicand {rad:g}")
        rad = 0.0
    sq = k1 * x1 * x1 + k2 * x2 * x2 + sign * 2 * math.sqrt(rad)
    if sq < 0:
        raise Inadmissible(f"negative radicand {sq:g}")
    return sq


def pinney_two_solution_rule(x1, x2, v1, v2, k1, k2, k, branch=1):
    """Positive Milne-Pinney solution from two others and constants ``k1, k2``."""
    if k <= 0:
        raise ValueError("k must be positive")
    I3 = pinney_I3(x1, x2, v1, v2, k)
    lam = _sr4_lambda(k1, k2, I3, k)
    return math.sqrt(_sr4_square(x1, x2, lam, k1, k2, I3, k, branch))


def pinney_sr4_constants(x, v, x1, x2, v1, v2, k):
    """``(k1, k2, branch)`` reproducing the state ``(x, v)``."""
    I1 = pinney_invariant(x1, v1, x, v, k)
    I2 = pinney_invariant(x2, v2, x, v, k)
    I3 = pinney_I3(x1, x2, v1, v2, k)
    den = I3 * I3 - 4 * k * k
    if den <= 0:
        raise SingularConfiguration("I3 <= 2k: particular solutions not independent")
    k1 = (I2 * I3 - 2 * I1 * k) / den
    k2 = (I1 * I3 - 2 * I2 * k) / den
    branch = _pick_branch(
        abs(x), lambda s: pinney_two_solution_rule(x1, x2, v1, v2, k1, k2, k, s))
    return k1, k2, branch


def _pick_branch(target, candidate):
    best, err = None, math.inf
    for s in (1, -1):
        try:
            e = abs(candidate(s) - target)
        except (Inadmissible, ValueError):
            continue
        if e < err:
            best, err = s, e
    if best is None:
        raise Inadmissible("no admissible branch")
    return best


def pinney_classic_rule(y1, y2, vy1, vy2, I1, I2, k, branch=1):
    """Milne-Pinney solution from two linear-oscillator solutions ``y1, y2``."""
    W = y1 * vy2 - y2 * vy1
    if W == 0:
        raise SingularConfiguration("zero Wronskian")
    disc = 4 * I1 * I2 - k * W * W
    if disc < 0:
        if disc < -1e-10 * max(1.0, abs(k) * W * W):
            raise Inadmissible(f"4 I1 I2 < k W^2 ({disc:g})")
        disc = 0.0
    sq = I2 * y1 * y1 + I1 * y2 * y2 + branch * math.sqrt(disc) * y1 * y2
    if sq < 0:
        raise Inadmissible("negative radicand")
    return math.sqrt(2.0) / abs(W) * math.sqrt(sq)


def pinney_classic_constants(x, v, y1, y2, vy1, vy2, k):
    if x == 0:
        raise ZeroDivisionError("x must be nonzero")
    I1 = 0.5 * ((y1 * v - x * vy1) ** 2 + k * (y1 / x) ** 2)
    I2 = 0.5 * ((y2 * v - x * vy2) ** 2 + k * (y2 / x) ** 2)
    branch = _pick_branch(
        abs(x), lambda s: pinney_classic_rule(y1, y2, vy1, vy2, I1, I2, k, s))
    return I1, I2, branch


def _mixed_C(x, v, ua, ub, k):
    w = ub - v / x
    return w * x * x + (k + w * w * x ** 4) / ((ua - ub) * x * x)


def pinney_mixed_constants(x, v, x1, x2, x3, k):
    """``(C1, C2)`` for a Milne-Pinney state and three Riccati solutions."""
    if min(abs(x1), abs(x2), abs(x3)) == 0 or x == 0:
        raise SingularConfiguration("zero Riccati solution or state")
    u1, u2, u3 = 1 / x1, 1 / x2, 1 / x3
    if u1 == u2 or u1 == u3 or u2 == u3:
        raise SingularConfiguration("coincident Riccati solutions")
    return _mixed_C(x, v, u1, u2, k), _mixed_C(x, v, u1, u3, k)


def pinney_from_riccati(x1, x2, x3, C1, C2, k):
    """Milne-Pinney solution from three solutions of ``x' = 1 + w^2 x^2``."""
    if min(abs(x1), abs(x2), abs(x3)) == 0:
        raise SingularConfiguration("zero Riccati solution")
    u1, u2, u3 = 1 / x1, 1 / x2, 1 / x3
    if u1 == u2 or u1 == u3 or u2 == u3:
        raise SingularConfiguration("coincident Riccati solutions")
    num = (C1 * (u1 - u2) - C2 * (u1 - u3)) ** 2 + k * (u2 - u3) ** 2
    den = (C2 - C1) * (u2 - u3) * (u2 - u1) * (u1 - u3)
    if den == 0:
        raise Inadmissible("C1 == C2")
    q = num / den
    if q <= 0:
        raise Inadmissible(f"non-positive radicand {q:g}")
    return math.sqrt(q)


# ------------------------------------------------------------ Ermakov

def ermakov_lewis(x, y, vx, vy, k):
    """``k (y/x)^2 + (y vx - x vy)^2``."""
    if x == 0:
        raise ZeroDivisionError("x must be nonzero")
    return k * (y / x) ** 2 + (y * vx - x * vy) ** 2


def generalized_ermakov(f, g, state, u_ref=1.0):
    """First integral of the generalised Ermakov system for ``f(u), g(u)``.

    ``state = (x, y, vx, vy)``; the indefinite integral is anchored at
    ``u_ref``, so only differences between states are meaningful.
    """
    x, y, vx, vy = (float(s) for s in state)
    if x == 0 or y == 0:
        raise ZeroDivisionError("x and y must be nonzero")
    ff = el.lambdify(el.as_expr(f), ["u"])
    gg = el.lambdify(el.as_expr(g), ["u"])
    u = x / y
    xi = x * vy - y * vx

    def integrand(z):
        return -ff(1.0 / z) / z ** 3 + z * gg(1.0 / z)

    return 0.5 * xi * xi + quad(integrand, u_ref, u)


# ---------------------------------------------------- SODE examples

def sode_velocity_free_examples(kind: str) -> SuperpositionRule:
    """Rules for ``x'' = a(t) x`` (linear) and ``y y'' - 2 y'^2 = -a(t) y^2``."""
    if kind == "linear":
        def fwd(t, s, k):
            return k[0] * np.asarray(s[0], dtype=float) + k[1] * np.asarray(s[1], dtype=float)

        def ext(t, x, s):
            M = np.array([[s[0][0], s[1][0]], [s[0][1], s[1][1]]], dtype=float)
            if abs(np.linalg.det(M)) < 1e-14:
                raise SingularConfiguration("dependent initial data")
            return tuple(np.linalg.solve(M, np.asarray(x, dtype=float)))

        def sampler(rng):
            while True:
                s = [rng.uniform(-1, 1, 2) for _ in range(2)]
                if abs(s[0][0] * s[1][1] - s[0][1] * s[1][0]) > 0.2:
                    return s, rng.uniform(-1, 1, 2)
        return SuperpositionRule("sode.linear", 2, 2, fwd, ext, sampler,
                                 description="x'' = a(t) x")
    if kind == "reciprocal":
        def fwd(t, s, k):
            (y1, w1), (y2, w2) = s
            z = k[0] / y1 + k[1] / y2
            if z == 0:
                raise Inadmissible("reciprocal sum vanishes")
            y = 1.0 / z
            return np.array([y, y * y * (k[0] * w1 / y1 ** 2 + k[1] * w2 / y2 ** 2)])

        def ext(t, x, s):
            (y1, w1), (y2, w2) = s
            M = np.array([[1 / y1, 1 / y2], [-w1 / y1 ** 2, -w2 / y2 ** 2]])
            if abs(np.linalg.det(M)) < 1e-14:
                raise SingularConfiguration("dependent initial data")
            rhs = np.array([1 / x[0], -x[1] / x[0] ** 2])
            return tuple(np.linalg.solve(M, rhs))

        def sampler(rng):
            while True:
                s = [np.array([rng.uniform(0.8, 1.5), rng.uniform(-0.3, 0.3)])
                     for _ in range(2)]
                det = s[1][1] / s[1][0] ** 2 / s[0][0] - s[0][1] / s[0][0] ** 2 / s[1][0]
                if abs(det) > 0.1:
                    return s, np.array([rng.uniform(0.8, 1.5), rng.uniform(-0.3, 0.3)])
        return SuperpositionRule("sode.reciprocal", 2, 2, fwd, ext, sampler,
                                 description="y y'' - 2 y'^2 = -a(t) y^2")
    raise ValueError(f"unknown kind {kind!r}")


# ------------------------------------------------------------ registry

def _sr4(k):
    def fwd(t, s, c):
        (x1, v1), (x2, v2) = s
        return np.array([pinney_two_solution_rule(x1, x2, v1, v2, c[0], c[1], k, c[2])])

    def ext(t, x, s):
        (x1, v1), (x2, v2) = s
        return pinney_sr4_constants(x[0], x[1], x1, x2, v1, v2, k)

    return SuperpositionRule("pinney.sr4", 2, 2, fwd, ext, _pinney_sampler,
                             observe=lambda st: np.array([abs(st[0])]),
                             params={"k": k, "branch_slot": 2},
                             description="Milne-Pinney, two-solution rule")


def _pinney_sampler(rng):
    sols = [np.array([rng.uniform(0.6, 1.6), rng.uniform(-0.6, 0.6)]) for _ in range(2)]
    return sols, np.array([rng.uniform(0.6, 1.6), rng.uniform(-0.6, 0.6)])


def _classic(k):
    def fwd(t, s, c):
        (y1, w1), (y2, w2) = s
        return np.array([pinney_classic_rule(y1, y2, w1, w2, c[0], c[1], k, c[2])])

    def ext(t, x, s):
        (y1, w1), (y2, w2) = s
        return pinney_classic_constants(x[0], x[1], y1, y2, w1, w2, k)

    def sampler(rng):
        while True:
            s = [rng.uniform(-1, 1, 2) for _ in range(2)]
            if abs(s[0][0] * s[1][1] - s[0][1] * s[1][0]) > 0.3:
                return s, np.array([rng.uniform(0.6, 1.6), rng.uniform(-0.6, 0.6)])

    return SuperpositionRule("pinney.classic", 2, 2, fwd, ext, sampler,
                             observe=lambda st: np.array([abs(st[0])]),
                             params={"k": k},
                             description="Milne-Pinney from two linear oscillators")


def _mixed(k):
    def fwd(t, s, c):
        return np.array([pinney_from_riccati(s[0][0], s[1][0], s[2][0], c[0], c[1], k)])

    def ext(t, x, s):
        return pinney_mixed_constants(x[0], x[1], s[0][0], s[1][0], s[2][0], k)

    def sampler(rng):
        while True:
            xs = rng.uniform(0.05, 0.45, 3)
            if np.min(np.abs(xs[:, None] - xs[None, :]) + np.eye(3)) > 0.08:
                return ([np.array([v]) for v in xs],
                        np.array([rng.uniform(0.6, 1.6), rng.uniform(-0.6, 0.6)]))

    return SuperpositionRule("pinney.mixed", 3, 2, fwd, ext, sampler,
                             observe=lambda st: np.array([abs(st[0])]),
                             params={"k": k},
                             description="Milne-Pinney from three Riccati solutions")


RULE_NAMES = ("riccati", "linear", "affine", "pinney.sr4", "pinney.classic",
              "pinney.mixed", "sode.linear", "sode.reciprocal", "rule.abel",
              "rule.dismp-family", "rule.dismp")


def get_rule(name: str, **params) -> SuperpositionRule:
    """Rule by stable name; ``n`` for linear/affine, ``k`` for Pinney rules."""
    if name == "riccati":
        return SuperpositionRule("riccati", 3, 1, _riccati_fwd, _riccati_ext,
                                 _riccati_sampler, description="Riccati cross ratio")
    if name == "linear":
        return _linear(int(params.get("n", 2)))
    if name == "affine":
        return _affine(int(params.get("n", 2)))
    if name == "pinney.sr4":
        return _sr4(float(params.get("k", 1.0)))
    if name == "pinney.classic":
        return _classic(float(params.get("k", 1.0)))
    if name == "pinney.mixed":
        return _mixed(float(params.get("k", 1.0)))
    if name == "sode.linear":
        return sode_velocity_free_examples("linear")
    if name == "sode.reciprocal":
        return sode_velocity_free_examples("reciprocal")
    if name in ("rule.abel", "rule.dismp-family", "rule.dismp"):
        from . import quasilie
        return quasilie.get_rule(name, **params)
    raise KeyError(f"unknown rule {name!r}")


# ------------------------------------------------------------ systems

def riccati_system(b1, b2, b3):
    """``x' = b1 + b2 x + b3 x^2`` with Expr coefficients in ``t``."""
    b1, b2, b3 = (el.as_expr(b) for b in (b1, b2, b3))
    return TDVectorField([b1 + b2 * el.Var("x1") + b3 * el.Var("x1") ** 2])


def riccati_unit_system(omega2):
    """``x' = 1 + w^2(t) x^2``."""
    return riccati_system("1", "0", omega2)


def linear_system(A):
    """``x' = A(t) x`` from a nested list of Expr sources."""
    n = len(A)
    comps = []
    for i in range(n):
        acc = None
        for j in range(n):
            term = el.as_expr(A[i][j]) * el.Var(f"x{j + 1}")
            acc = term if acc is None else acc + term
        comps.append(acc)
    return TDVectorField(comps)


def affine_system(A, b):
    lin = linear_system(A)
    return TDVectorField([c + el.as_expr(bi) for c, bi in zip(lin.components, b)])


def milne_pinney_system(omega2, k):
    """``x'' = -w^2(t) x + k/x^3`` as a first-order system in ``(x1, x2)``."""
    w = el.as_expr(omega2)
    x, v = el.Var("x1"), el.Var("x2")
    return TDVectorField([v, -w * x + el.Const(float(k)) / x ** 3])


def harmonic_system(omega2):
    """``y'' = -w^2(t) y``."""
    w = el.as_expr(omega2)
    return TDVectorField([el.Var("x2"), -w * el.Var("x1")])


def ermakov_system(omega2, k):
    """Milne-Pinney plus harmonic oscillator on ``(x, y, vx, vy)``."""
    w = el.as_expr(omega2)
    x, y, vx, vy = (el.Var(f"x{i}") for i in range(1, 5))
    return TDVectorField([vx, vy, -w * x + el.Const(float(k)) / x ** 3, -w * y])


# ------------------------------------------------------------ verifier

@dataclass
class VerificationReport:
    rule: str
    system: str
    trials: int
    max_error: float
    failures: list = field(default_factory=list)
    per_trial: list = field(default_factory=list)

    def passed(self, threshold: float) -> bool:
        ok = [p for p in self.per_trial if p.get("error") is not None]
        return bool(ok) and self.max_error <= threshold

    def to_dict(self):
        return asdict(self)


def _stacked(parts):
    """One field integrating several independent systems side by side."""
    dims = [p.dim for p, _ in parts]
    offs = np.cumsum([0] + dims)

    def f(t, x):
        return np.concatenate([p(t, x[offs[i]:offs[i + 1]])
                               for i, (p, _) in enumerate(parts)])
    ic = np.concatenate([np.asarray(c, dtype=float) for _, c in parts])
    return TDVectorField(func=f, dim=int(offs[-1])), ic, offs


class BranchAmbiguity(Inadmissible):
    """Both sign branches agree; the rule alone cannot tell which continues."""


def _extrapolate(pts, t):
    """Quadratic Lagrange extrapolation through three (t, y) pairs."""
    (ta, ya), (tb, yb), (tc, yc) = pts
    la = (t - tb) * (t - tc) / ((ta - tb) * (ta - tc))
    lb = (t - ta) * (t - tc) / ((tb - ta) * (tb - tc))
    lc = (t - ta) * (t - tb) / ((tc - ta) * (tc - tb))
    return la * ya + lb * yb + lc * yc


def _branch_step(rule, t, sols, consts, slot, hist, continuation):
    cands = {}
    for b in (consts[slot], -consts[slot]):
        c = list(consts)
        c[slot] = b
        try:
            cands[b] = np.asarray(rule.forward(t, sols, c), dtype=float)
        except Inadmissible:
            pass
    cur = consts[slot]
    if cur not in cands:
        if not continuation or not cands:
            raise BranchAmbiguity(f"branch {cur:+d} inadmissible at t={t:g}")
        cur = next(iter(cands))
    flipped = 0
    other = -cur
    if other in cands and len(hist) >= 3:
        pred = _extrapolate(hist[-3:], t)
        if (np.max(np.abs(cands[other] - pred))
                < np.max(np.abs(cands[cur] - pred))):
            if not continuation:
                raise BranchAmbiguity(f"sign branch changes near t={t:g}")
            cur, flipped = other, 1
    out = list(consts)
    out[slot] = cur
    hist.append((t, cands[cur]))
    return cands[cur], out, flipped


def verify_rule(rule: SuperpositionRule, system, trials: int = 5,
                horizon: float = 1.0, tol: float = 1e-11, seed: int = 0,
                t0: float = 0.0, particular_system=None, sampler=None,
                description: str = "", continuation: bool = False
                ) -> VerificationReport:
    """Reconstruct held-out solutions of ``system`` from particular ones.

    The particular and held-out solutions are integrated as one stacked
    system, so the comparison at every accepted mesh time involves no
    interpolation. The error of a trial is ``max |rule - truth| / max(1,
    |truth|)`` over the mesh of ``[t0, t0 + horizon]``.

    Rules with a sign branch (``params["branch_slot"]``) keep the branch
    chosen at ``t0``. When a quadratic extrapolation of the last three
    outputs points to the other branch the trial is aborted, unless
    ``continuation`` is set, in which case the other branch is followed.
    """
    rng = np.random.default_rng(seed)
    sampler = sampler or rule.sampler
    if sampler is None:
        raise ValueError("rule has no default sampler")
    psys = particular_system or system
    report = VerificationReport(rule.name, description or rule.description,
                                trials, 0.0)
    for trial in range(trials):
        p_ics, target_ic = sampler(rng)
        entry = {"trial": trial, "error": None}
        field_, ic, offs = _stacked([(psys, c) for c in p_ics] + [(system, target_ic)])
        try:
            tr = integrate(field_, ic, t0, t0 + horizon, tol)
        except (StoppedAtSingularity, StepUnderflow) as exc:
            report.failures.append({"trial": trial, "reason": str(exc)})
            report.per_trial.append(entry)
            continue

        def split(row):
            return [row[offs[i]:offs[i + 1]] for i in range(len(offs) - 1)]
        first = split(tr.y[0])
        try:
            consts = rule.extract(t0, first[-1], first[:-1])
        except (SingularConfiguration, Inadmissible, ZeroDivisionError) as exc:
            report.failures.append({"trial": trial, "reason": f"extract: {exc}"})
            report.per_trial.append(entry)
            continue
        entry["constants"] = [float(c) for c in consts]
        slot = rule.params.get("branch_slot")
        consts = list(consts)
        hist = []
        flips = 0
        worst = 0.0
        try:
            for t, row in zip(tr.t, tr.y):
                parts = split(row)
                if slot is None:
                    got = np.asarray(rule.forward(t, parts[:-1], consts), dtype=float)
                else:
                    got, consts, flipped = _branch_step(rule, t, parts[:-1], consts,
                                                        slot, hist, continuation)
                    flips += flipped
                truth = rule.observe(parts[-1])
                e = float(np.max(np.abs(got - truth))) / max(1.0, float(np.max(np.abs(truth))))
                worst = max(worst, e if math.isfinite(e) else math.inf)
        except (Inadmissible, SingularConfiguration, ZeroDivisionError,
                QuadratureError) as exc:
            report.failures.append({"trial": trial, "reason": f"forward: {exc}"})
            report.per_trial.append(entry)
            continue
        entry["error"] = worst
        entry["mesh_points"] = int(tr.t.size)
        if slot is not None:
            entry["branch_flips"] = flips
        report.per_trial.append(entry)
        report.max_error = max(report.max_error, worst)
    if all(p["error"] is None for p in report.per_trial):
        raise Inadmissible("all trials inadmissible")
    return report
