"""Quasi-Lie schemes and their applications to non-Lie second-order equations.

A scheme is a pair of vector-field spaces ``W`` and ``V`` with ``W`` a Lie
algebra inside ``V`` that normalises ``V``. Its t-dependent changes of
variables ``x = gamma x'``, ``v = beta v' + alpha x'`` map the covered
systems onto each other; when the image is a Lie system one obtains
t-dependent constants of the motion and superposition rules.

Every quadrature of a coefficient ``a(t)`` is anchored at ``t = 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, NamedTuple

import numpy as np

from . import exprlang as el
from .liealg import PolyVectorField, bracket, in_span, rank
from .numerics import Antiderivative, chebyshev_grid
from .odecore import TDVectorField, Trajectory, integrate
from .superpose import (Inadmissible, SuperpositionRule, pinney_classic_constants,
                        pinney_classic_rule, pinney_sr4_constants,
                        pinney_two_solution_rule)

__all__ = [
    "Scheme", "SchemeReport", "verify_scheme", "get_scheme", "SCHEME_NAMES",
    "TDTransform", "FiveCoefficients", "transform_system", "transform_emden",
    "emden_reduce", "emden_construct", "emden_eq_family", "emden_family_constants",
    "dissipative_mp", "perelomov_reduce", "gauss_2f1", "mathews_lakshmanan",
    "mathews_lakshmanan_invariant", "abel_family_rule", "abel_family_constant",
    "dissipative_mp_family_rule", "dissipative_mp_family_invariant", "get_rule",
    "abel_family_system", "dismp_family_system", "dismp_system",
    "dismp_linear_system", "emden_system", "nlo_system", "ml_system",
    "ConditionViolated",
]


class ConditionViolated(ValueError):
    """An integrability condition or a hypothesis on the input fails."""


def _e(x) -> el.Expr:
    return el.as_expr(x)


def _src(x) -> str:
    return el.to_source(_e(x))


def _fn(x) -> Callable[[float], float]:
    f = el.lambdify(_e(x), ["t"])
    return lambda t: float(f(float(t)))


def _spread(vals, rel=1e-8):
    vals = np.asarray(vals, dtype=float)
    mean = float(np.mean(vals))
    dev = float(np.max(vals) - np.min(vals))
    return dev, mean, dev <= rel * (1 + abs(mean))


# ------------------------------------------------------------ schemes

@dataclass(frozen=True)
class Scheme:
    name: str
    W: tuple
    V: tuple
    labels: dict = field(default_factory=dict)

    def __post_init__(self):
        dims = {f.dim for f in self.W + self.V}
        if len(dims) != 1:
            raise ValueError("scheme fields must share the dimension")


@dataclass
class SchemeReport:
    name: str
    w_in_v: bool
    w_closed: bool
    normalises: bool
    offending: list

    @property
    def holds(self):
        return self.w_in_v and self.w_closed and self.normalises

    def to_dict(self):
        return {"name": self.name, "holds": self.holds, "w_in_v": self.w_in_v,
                "w_closed": self.w_closed, "normalises": self.normalises,
                "offending": self.offending}


def verify_scheme(s: Scheme) -> SchemeReport:
    """Exact checks of ``W <= V``, ``[W, W] <= W`` and ``[W, V] <= V``."""
    W, V = list(s.W), list(s.V)
    if len({f.dim for f in W + V}) != 1:
        raise ValueError("dimension mismatch")
    w_in_v = rank(V + W) == rank(V)
    bad = []
    w_closed = True
    for i, a in enumerate(W):
        for b in W[i + 1:]:
            if not in_span(bracket(a, b), W):
                w_closed = False
                bad.append(("W", repr(a), repr(b)))
    normalises = True
    for a in W:
        for b in V:
            if not in_span(bracket(a, b), V):
                normalises = False
                bad.append(("V", repr(a), repr(b)))
    return SchemeReport(s.name, w_in_v, w_closed, normalises, bad)


def _f(names, *comps, params=None):
    return PolyVectorField.from_exprs(list(comps), names, params)


def _exp(n) -> str:
    q = Fraction(n).limit_denominator(10_000)
    if abs(float(q) - float(n)) > 1e-15:
        raise ValueError("exponent must be rational")
    return f"({q.numerator}/{q.denominator})" if q.denominator != 1 else f"({q.numerator})"


SCHEME_NAMES = ("scheme.emden", "scheme.dismp", "scheme.nlo", "scheme.ml",
                "scheme.dismp-broken")


def get_scheme(name: str, n: float = 5, lam: float = 1.0) -> Scheme:
    """Named scheme; ``n`` is the Emden/oscillator power, ``lam`` the ML parameter.

    ``scheme.dismp-broken`` adds ``x^3 d/dx`` to the dissipative Milne-Pinney
    space; its bracket with ``x d/dv`` leaves the span (a negative control).
    """
    xv = ("x", "v")
    if name in ("scheme.emden", "scheme.nlo"):
        if n in (0, 1):
            raise ValueError("n must differ from 0 and 1")
        X1 = _f(xv, "0", "x")
        X2 = _f(xv, "0", f"x^{_exp(n)}")
        X3 = _f(xv, "v", "0")
        X4 = _f(xv, "0", "v")
        X5 = _f(xv, "x", "0")
        return Scheme(name, (X4, X1, X5), (X1, X2, X3, X4, X5))
    if name in ("scheme.dismp", "scheme.dismp-broken"):
        X1 = _f(xv, "0", "v")
        X2 = _f(xv, "0", "x")
        X3 = _f(xv, "0", "x^(-3)")
        X4 = _f(xv, "v", "0")
        X5 = _f(xv, "x", "0")
        V = (X1, X2, X3, X4, X5)
        if name.endswith("broken"):
            V = V + (_f(xv, "x^3", "0"),)
        return Scheme(name, (X1, X2), V)
    if name == "scheme.ml":
        p = {"lam": Fraction(lam).limit_denominator(10_000)}
        X1 = _f(xv, "v", "lam*x*v^2/(1 + lam*x^2)", params=p)
        X2 = _f(xv, "0", "x/(1 + lam*x^2)", params=p)
        X3 = _f(xv, "0", "v")
        return Scheme(name, (X3,), (X1, X2, X3))
    raise KeyError(f"unknown scheme {name!r}")


# ------------------------------------------------------------ transformations

@dataclass(frozen=True)
class TDTransform:
    """``x = gamma(t) x'``, ``v = beta(t) v' + alpha(t) x'``."""

    alpha: el.Expr
    beta: el.Expr
    gamma: el.Expr

    def __post_init__(self):
        for k in ("alpha", "beta", "gamma"):
            object.__setattr__(self, k, _e(getattr(self, k)))

    @classmethod
    def identity(cls):
        return cls(0.0, 1.0, 1.0)

    def check(self, samples, group: bool = False):
        """Positivity of ``beta``, ``gamma`` (and identity at 0 when ``group``)."""
        fa, fb, fg = _fn(self.alpha), _fn(self.beta), _fn(self.gamma)
        for t in samples:
            if not (fb(t) > 0 and fg(t) > 0):
                raise ConditionViolated(f"beta or gamma not positive at t={t:g}")
        if group and (abs(fa(0)) > 1e-14 or abs(fb(0) - 1) > 1e-14
                      or abs(fg(0) - 1) > 1e-14):
            raise ConditionViolated("group elements need alpha(0)=0, beta(0)=gamma(0)=1")
        return True

    def apply(self, t, xp, vp):
        """Primed to original variables."""
        g, b, a = _fn(self.gamma)(t), _fn(self.beta)(t), _fn(self.alpha)(t)
        return g * xp, b * vp + a * xp

    def inverse(self, t, x, v):
        g, b, a = _fn(self.gamma)(t), _fn(self.beta)(t), _fn(self.alpha)(t)
        xp = x / g
        return xp, (v - a * xp) / b

    def compose(self, other: "TDTransform") -> "TDTransform":
        """``self`` followed by ``other`` (``other`` acts on the primed variables)."""
        return TDTransform(self.beta * other.alpha + self.alpha * other.gamma,
                           self.beta * other.beta, self.gamma * other.gamma)


class FiveCoefficients(NamedTuple):
    """``x' = xx x + xv v``, ``v' = vx x + vv v + vn x^n``."""

    xx: el.Expr
    xv: el.Expr
    vx: el.Expr
    vv: el.Expr
    vn: el.Expr

    def field(self, n):
        fs = [_fn(c) for c in self]

        def f(t, y):
            x, v = y
            return np.array([fs[0](t) * x + fs[1](t) * v,
                             fs[2](t) * x + fs[3](t) * v + fs[4](t) * x ** n])
        return TDVectorField(func=f, dim=2, names=["x", "v"])


def transform_system(c: FiveCoefficients, n, T: TDTransform) -> FiveCoefficients:
    """Coefficients of the same family after the change ``T``."""
    c = FiveCoefficients(*(_e(x) for x in c))
    a, b, g = T.alpha, T.beta, T.gamma
    xx = (c.xx * g + c.xv * a - el.diff_t(g)) / g
    xv = c.xv * b / g
    vv = (c.vv * b - el.diff_t(b) - a * xv) / b
    vx = (c.vv * a + c.vx * g - el.diff_t(a) - a * xx) / b
    vn = c.vn * g ** el.Const(float(n)) / b
    return FiveCoefficients(xx, xv, vx, vv, vn)


def transform_emden(a, b, n, T: TDTransform, q=0.0, samples=None) -> FiveCoefficients:
    """Transform ``x'' = a x' - q x + b x^n`` under ``T``.

    The default ``q = 0`` is the Emden equation; with ``alpha = gamma'`` and
    ``gamma'' = a gamma' - q gamma`` the ``x'`` term of ``v'`` drops out.
    """
    if samples is not None:
        T.check(samples)
    return transform_system(FiveCoefficients(_e(0.0), _e(1.0), -_e(q), _e(a), _e(b)),
                            n, T)


# ------------------------------------------------------------ Emden equations

def emden_system(a, b, n) -> TDVectorField:
    """``x' = v``, ``v' = a v + b x^n``."""
    fa, fb = _fn(a), _fn(b)
    return TDVectorField(func=lambda t, y: np.array([y[1], fa(t) * y[1] + fb(t) * y[0] ** n]),
                         dim=2, names=["x", "v"])


def _particular(xp, a, b, n, grid):
    if isinstance(xp, Trajectory):
        fa, fb = _fn(a), _fn(b)

        def X(t):
            return xp(t)
        res = 0.0
        for t, y, dy in zip(xp.t, xp.y, xp.dy):
            res = max(res, abs(dy[1] - (fa(t) * y[1] + fb(t) * y[0] ** n))
                      / (1 + abs(dy[1])))
        return (lambda t: float(X(t)[0])), (lambda t: float(X(t)[1])), res
    xe = _e(xp)
    x, dx, ddx = _fn(xe), _fn(el.diff_t(xe)), _fn(el.diff_t(el.diff_t(xe)))
    fa, fb = _fn(a), _fn(b)
    res = max(abs(ddx(t) - fa(t) * dx(t) - fb(t) * x(t) ** n) / (1 + abs(ddx(t)))
              for t in grid)
    return x, dx, res


def emden_reduce(a, b, n, xp, interval=(0.5, 2.0), residual_tol=1e-7,
                 condition_tol=1e-6):
    """t-dependent constant of the motion from a particular solution ``xp``.

    ``xp`` (Expr or Trajectory of ``(x, v)``) must solve the equation and obey
    ``xp'^2 = xp^(n+1)``. Returns ``I(t, x, v)``.
    """
    if n == 1:
        raise ValueError("n must differ from 1")
    grid = chebyshev_grid(*interval, 32)
    X, DX, res = _particular(xp, a, b, n, grid)
    if res > residual_tol:
        raise ConditionViolated(f"xp does not solve the equation (residual {res:.3g})")
    dev = 0.0
    for t in grid:
        lhs, rhs = DX(t) ** 2, X(t) ** (n + 1)
        if DX(t) == 0:
            raise ConditionViolated(f"xp' vanishes at t={t:g}")
        dev = max(dev, abs(lhs - rhs) / max(abs(lhs), abs(rhs)))
    if dev > condition_tol:
        raise ConditionViolated(f"xp'^2 = xp^(n+1) violated (relative {dev:.3g})")

    def invariant(t, x, v):
        p, dp = X(t), DX(t)
        head = math.log(x / p) if n == -1 else x ** (n + 1) / ((n + 1) * p ** (n + 1))
        return head + v * v / (2 * dp * dp) - x * v / (p * dp)
    invariant.condition_deviation = dev
    invariant.residual = res
    return invariant


def _family_invariant(n, K1, K3):
    e1 = 2 * (n + 1) / (n - 1)
    e2 = (n + 3) / (n - 1)

    def invariant(t, x, v):
        w = K1 + K3 * t
        if w < 0 and (e1 != int(e1) or e2 != int(e2)):
            raise el.DomainError("negative base with non-integer power")
        return w ** e1 * (x ** (n + 1) / (n + 1) + v * v / 2) + w ** e2 * 2 * v * x / (n + 3)
    return invariant


def emden_eq_family(n, K1):
    """``x'' = -x'/(K1 + K3 t) - x^n`` with ``K3 = (n-1)/(n+3)``.

    Returns ``a``, ``b``, the particular solution and the closed invariant.
    """
    if n + 3 == 0:
        raise ZeroDivisionError("K3 = (n-1)/(n+3) is singular for n = -3")
    if n == 1:
        raise ValueError("n must differ from 1")
    K3 = (n - 1) / (n + 3)
    K2 = (4 / (n + 3) ** 2) ** (1 / (n - 1))
    nu = 2 / (n - 1)
    a = el.parse(f"-1/({K1!r} + {K3!r}*t)")
    xp = el.parse(f"{K2!r}*({K1!r} + {K3!r}*t)^(-{nu!r})")
    return {"a": a, "b": el.Const(-1.0), "xp": xp, "K3": K3,
            "invariant": _family_invariant(n, K1, K3)}


def emden_construct(n, K, interval=None, residual_tol=1e-9):
    """Emden equation with ``b = -1`` built around ``xp = (K + (1-n)t/2)^(-2/(n-1))``."""
    if n == 1:
        raise ValueError("n must differ from 1")
    s = f"({K!r} + {(1 - n) / 2!r}*t)"
    xp = el.parse(f"{s}^({-2 / (n - 1)!r})")
    a = el.parse(f"{(3 + n) / 2!r}/{s}")
    b = el.Const(-1.0)
    if interval is None:
        # stay on the side of t = 0 where K + (1-n)t/2 keeps its sign
        end = 2 * K / (n - 1) if n > 1 else 1.0
        interval = (0.0, 0.8 * end) if end > 0 else (0.0, 1.0)
    grid = chebyshev_grid(*interval, 32)
    _, _, res = _particular(xp, a, b, n, grid)
    if res > residual_tol:
        raise ConditionViolated(f"constructed xp has residual {res:.3g}")
    out = {"a": a, "b": b, "xp": xp, "interval": interval, "residual": res,
           "invariant": emden_reduce(a, b, n, xp, interval)}
    if n != -3:
        out["invariant_family"] = _family_invariant(n, -2 * K / (n + 3), (n - 1) / (n + 3))
    return out


def emden_family_constants(a, b, n, variant: str, interval=(0.5, 2.0)):
    """Integrability condition and invariant for two Emden subfamilies.

    ``exp-condition``: ``b e^{-2A} = K`` with ``A = int_0^t a``.
    ``nested-integral``: ``b e^{-2A} (2J)^{(n+3)/2} = K`` with ``J = int_0^t e^A``.
    """
    fa, fb = _fn(a), _fn(b)
    A = Antiderivative(fa, 0.0)
    grid = chebyshev_grid(*interval, 64)
    if variant == "exp-condition":
        vals = [fb(t) * math.exp(-2 * A(t)) for t in grid]
        dev, K, ok = _spread(vals)

        def invariant(t, x, v):
            return math.exp(-2 * A(t)) * (0.5 * v * v - fb(t) * x ** (n + 1) / (n + 1))
    elif variant == "nested-integral":
        J = Antiderivative(lambda s: math.exp(A(s)), 0.0)
        for t in grid:
            if J(t) <= 0:
                raise ConditionViolated("int_0^t e^A must be positive on the interval")
        vals = [fb(t) * math.exp(-2 * A(t)) * (2 * J(t)) ** ((n + 3) / 2) for t in grid]
        dev, K, ok = _spread(vals)

        def invariant(t, x, v):
            At = A(t)
            return ((0.5 * v * v - fb(t) * x ** (n + 1) / (n + 1)) * math.exp(-2 * At) * J(t)
                    - 0.5 * x * v * math.exp(-At))
    else:
        raise KeyError(f"unknown variant {variant!r}")
    return {"holds": ok, "K": K, "deviation": dev, "invariant": invariant}


# ------------------------------------------------------------ dissipative Milne-Pinney

def _alpha(a):
    A = Antiderivative(_fn(a), 0.0)
    return lambda t: math.exp(A(t))


def dismp_system(a, b, k) -> TDVectorField:
    """``x'' = a x' + b x + k e^{2A} x^-3`` with ``A = int_0^t a``."""
    fa, fb, al = _fn(a), _fn(b), _alpha(a)

    def f(t, y):
        x, v = y
        return np.array([v, fa(t) * v + fb(t) * x + k * al(t) ** 2 / x ** 3])
    return TDVectorField(func=f, dim=2, names=["x", "v"])


def dismp_linear_system(a, b) -> TDVectorField:
    """Companion ``y'' = a y' + b y``."""
    fa, fb = _fn(a), _fn(b)
    return TDVectorField(func=lambda t, y: np.array([y[1], fa(t) * y[1] + fb(t) * y[0]]),
                         dim=2, names=["y", "w"])


def _dismp_rule(a, k):
    al = _alpha(a)

    def fwd(t, s, c):
        (y1, w1), (y2, w2) = s
        A = al(t)
        return np.array([pinney_classic_rule(y1, y2, w1 / A, w2 / A, c[0], c[1], k, c[2])])

    def ext(t, x, s):
        (y1, w1), (y2, w2) = s
        A = al(t)
        return pinney_classic_constants(x[0], x[1] / A, y1, y2, w1 / A, w2 / A, k)

    def sampler(rng):
        while True:
            s = [rng.uniform(-1, 1, 2) for _ in range(2)]
            if abs(s[0][0] * s[1][1] - s[0][1] * s[1][0]) > 0.3:
                return s, np.array([rng.uniform(0.6, 1.6), rng.uniform(-0.6, 0.6)])

    return SuperpositionRule("rule.dismp", 2, 2, fwd, ext, sampler,
                             observe=lambda st: np.array([abs(st[0])]),
                             t_dependent=True, params={"k": k, "a": _src(a)},
                             description="dissipative Milne-Pinney, t-dependent rule")


def dissipative_mp(a, b, k, c=None, interval=(0.0, 1.0)):
    """Check ``c = k exp(2 int_0^t a)`` and return the t-dependent rule.

    With ``c`` omitted the equation is built to satisfy the condition.
    """
    if k == 0:
        raise ValueError("k must be non-zero")
    al = _alpha(a)
    grid = chebyshev_grid(*interval, 64)
    if c is None:
        dev, ok = 0.0, True
    else:
        fc = _fn(c)
        vals = np.array([fc(t) for t in grid])
        if np.any(np.sign(vals) != np.sign(k)):
            raise ConditionViolated("c and k must have the same sign")
        ref = np.array([k * al(t) ** 2 for t in grid])
        dev = float(np.max(np.abs(vals - ref) / (1 + np.abs(ref))))
        ok = dev <= 1e-8
    return {"holds": ok, "deviation": dev, "alpha": al,
            "omega": (lambda t, fb=_fn(b): -fb(t) / al(t)),
            "rule": _dismp_rule(a, k), "system": dismp_system(a, b, k),
            "linear_system": dismp_linear_system(a, b)}


# ------------------------------------------------------------ Perelomov oscillators

def nlo_system(b, c, n) -> TDVectorField:
    """``x'' = b x + c x^n``."""
    fb, fc = _fn(b), _fn(c)
    return TDVectorField(func=lambda t, y: np.array([y[1], fb(t) * y[0] + fc(t) * y[0] ** n]),
                         dim=2, names=["x", "v"])


def gauss_2f1(a, b, c, z, return_error: bool = False, max_terms: int = 1_000_000):
    """Gauss hypergeometric series; needs ``|z| < 1`` and ``c`` not in ``{0, -1, ...}``.

    With ``return_error`` the last term relative to the sum is returned too.
    """
    if abs(z) >= 1:
        raise ValueError("|z| must be below 1")
    if c <= 0 and float(c).is_integer():
        raise ValueError("c must not be a non-positive integer")
    total, term = 1.0, 1.0
    k = 0
    while k < max_terms:
        term *= (a + k) * (b + k) / ((c + k) * (k + 1)) * z
        total += term
        k += 1
        if abs(term) < 1e-16 * abs(total):
            break
        if term == 0:
            break
    err = abs(term) / abs(total) if total else math.inf
    if k >= max_terms and err > 1e-12:
        raise ArithmeticError(f"series did not converge (relative estimate {err:.3g})")
    return (total, err) if return_error else total


def perelomov_reduce(b, c, n, gamma_ic=(1.0, 0.0), interval=(0.0, 1.0), gamma1=None,
                     tol=1e-12, i3_gate=0.95):
    """Reduction of ``x'' = b x + c x^n`` to ``x''(tau) = c0 x^n``.

    ``gamma1`` solves ``gamma'' = b gamma``; if not given as an Expr it is
    integrated from ``gamma_ic`` at ``interval[0]``. Requires
    ``c gamma1^(n+3) = c0`` on the grid. Returns the invariants
    ``I(t, x, v)`` for one solution and ``I3(t, s1, s2)`` for a pair.
    """
    if n in (0, 1):
        raise ValueError("n must differ from 0 and 1")
    fb, fc = _fn(b), _fn(c)
    t0, t1 = interval
    if gamma1 is not None:
        ge = _e(gamma1)
        G, DG = _fn(ge), _fn(el.diff_t(ge))
        ddg = _fn(el.diff_t(el.diff_t(ge)))
        grid = chebyshev_grid(t0, t1, 64)
        res = max(abs(ddg(t) - fb(t) * G(t)) for t in grid)
        if res > 1e-9:
            raise ConditionViolated(f"gamma1 does not solve gamma'' = b gamma ({res:.3g})")
    else:
        tr = integrate(lambda t, y: np.array([y[1], fb(t) * y[0]]), list(gamma_ic),
                       t0, t1, tol)

        def G(t):
            return float(tr(t)[0])

        def DG(t):
            return float(tr(t)[1])
    grid = chebyshev_grid(t0, t1, 64)
    gs = np.array([G(t) for t in grid])
    if np.any(gs == 0) or np.any(np.sign(gs) != np.sign(gs[0])):
        raise ConditionViolated("gamma1 vanishes on the interval")
    vals = [fc(t) * G(t) ** (n + 3) for t in grid]
    dev, c0, ok = _spread(vals)
    if not ok:
        raise ConditionViolated(f"c gamma1^(n+3) is not constant (spread {dev:.3g})")

    def invariant(t, x, v):
        g, dg = G(t), DG(t)
        return 0.5 * (g * v - dg * x) ** 2 - c0 * x ** (n + 1) / (g ** (n + 1) * (n + 1))

    def _term(t, x, v):
        I = invariant(t, x, v)
        if I <= 0:
            raise ConditionViolated("I_i <= 0: square root of the invariant undefined")
        g = G(t)
        z = -c0 * x ** (n + 1) / (g ** (n + 1) * I * (n + 1))
        if abs(z) >= i3_gate:
            raise ConditionViolated(f"|z| = {abs(z):.3g} outside the I3 domain")
        return x / math.sqrt(I) * gauss_2f1(1 / (n + 1), 0.5, 1 + 1 / (n + 1), z)

    def invariant3(t, s1, s2):
        return (_term(t, *s1) - _term(t, *s2)) / G(t)

    return {"holds": ok, "c0": c0, "deviation": dev, "gamma1": G, "f": lambda t: G(t) ** -2,
            "invariant": invariant, "invariant3": invariant3,
            "system": nlo_system(b, c, n)}


# ------------------------------------------------------------ Mathews-Lakshmanan

def ml_system(F, lam, omega) -> TDVectorField:
    """``x' = v``, ``v' = F v + lam x v^2/(1 + lam x^2) - omega x/(1 + lam x^2)``."""
    fF, fw = _fn(F), _fn(omega)

    def f(t, y):
        x, v = y
        d = 1 + lam * x * x
        return np.array([v, fF(t) * v + lam * x * v * v / d - fw(t) * x / d])
    return TDVectorField(func=f, dim=2, names=["x", "v"])


def mathews_lakshmanan(F, lam, omega=None, interval=(0.0, 1.0)):
    """Condition ``omega = -exp(2 int_0^t F)`` and the invariant evaluator."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    al = _alpha(F)
    dev = 0.0
    if omega is not None:
        fw = _fn(omega)
        dev = max(abs(fw(t) + al(t) ** 2) / (1 + al(t) ** 2)
                  for t in chebyshev_grid(*interval, 64))

    def invariant(t, x, v):
        a2 = al(t) ** 2
        return (a2 + lam * a2 * x * x) / (a2 + lam * v * v)
    return {"holds": dev <= 1e-8, "deviation": dev, "alpha": al, "invariant": invariant,
            "omega": (lambda t: -al(t) ** 2)}


def mathews_lakshmanan_invariant(F, lam, t, x, v):
    return mathews_lakshmanan(F, lam)["invariant"](t, x, v)


# ------------------------------------------------------------ Lie families

def abel_family_system(b) -> TDVectorField:
    """``x' = (t + x) + b(t) (1 + t + x)^3``."""
    fb = _fn(b)
    return TDVectorField(func=lambda t, y: np.array([t + y[0] + fb(t) * (1 + t + y[0]) ** 3]),
                         dim=1, names=["x"])


def abel_family_rule(x1, k, t):
    """``((x1 + t + 1)^-2 + k e^{-2t})^{-1/2} - t - 1``."""
    u = x1 + t + 1
    if u == 0:
        raise Inadmissible("x1 + t + 1 vanishes")
    rad = u ** -2 + k * math.exp(-2 * t)
    if rad <= 0:
        raise Inadmissible(f"non-positive radicand {rad:g}")
    return rad ** -0.5 - t - 1


def abel_family_constant(x, x1, t):
    """Inverse of :func:`abel_family_rule` at time ``t``."""
    u, u1 = x + t + 1, x1 + t + 1
    if u <= 0 or u1 <= 0:
        raise Inadmissible("the rule covers solutions with x + t + 1 > 0")
    return math.exp(2 * t) * (u ** -2 - u1 ** -2)


def _abel_rule():
    def fwd(t, s, c):
        return np.array([abel_family_rule(s[0][0], c[0], t)])

    def ext(t, x, s):
        return (abel_family_constant(x[0], s[0][0], t),)

    def sampler(rng):
        while True:
            u = rng.uniform(0.4, 1.0, 2)
            if abs(u[0] - u[1]) > 0.05:
                return [np.array([u[0] - 1])], np.array([u[1] - 1])

    return SuperpositionRule("rule.abel", 1, 1, fwd, ext, sampler, t_dependent=True,
                             description="Abel Lie family, t-dependent rule")


def dismp_family_system(F, omega2) -> TDVectorField:
    """``x'' = -F' x' + omega^2 x + e^{-2F} x^-3``."""
    fF, dF, fw = _fn(F), _fn(el.diff_t(_e(F))), _fn(omega2)

    def f(t, y):
        x, v = y
        return np.array([v, -dF(t) * v + fw(t) * x + math.exp(-2 * fF(t)) / x ** 3])
    return TDVectorField(func=f, dim=2, names=["x", "v"])


def dissipative_mp_family_invariant(F, t, x1, x2, v1, v2):
    """``e^{2F} (x1 v2 - x2 v1)^2 + (x1/x2)^2 + (x2/x1)^2``."""
    eF = math.exp(_fn(F)(t))
    r = x1 / x2
    return eF * eF * (x1 * v2 - x2 * v1) ** 2 + r * r + 1 / (r * r)


def dissipative_mp_family_rule(F, x1, x2, v1, v2, k1, k2, t, branch=1):
    """Common rule of the family; the velocities enter scaled by ``e^F``."""
    eF = math.exp(_fn(F)(t))
    return pinney_two_solution_rule(x1, x2, eF * v1, eF * v2, k1, k2, 1.0, branch)


def _dismp_family_rule(F):
    fF = _fn(F)

    def fwd(t, s, c):
        (x1, v1), (x2, v2) = s
        eF = math.exp(fF(t))
        return np.array([pinney_two_solution_rule(x1, x2, eF * v1, eF * v2,
                                                  c[0], c[1], 1.0, c[2])])

    def ext(t, x, s):
        (x1, v1), (x2, v2) = s
        eF = math.exp(fF(t))
        return pinney_sr4_constants(x[0], eF * x[1], x1, x2, eF * v1, eF * v2, 1.0)

    def sampler(rng):
        sols = [np.array([rng.uniform(0.6, 1.6), rng.uniform(-0.6, 0.6)]) for _ in range(2)]
        return sols, np.array([rng.uniform(0.6, 1.6), rng.uniform(-0.6, 0.6)])

    return SuperpositionRule("rule.dismp-family", 2, 2, fwd, ext, sampler,
                             observe=lambda st: np.array([abs(st[0])]),
                             t_dependent=True, params={"F": _src(F), "branch_slot": 2},
                             description="dissipative Milne-Pinney Lie family")


def get_rule(name: str, **params) -> SuperpositionRule:
    """``rule.abel``; ``rule.dismp-family`` (param ``F``); ``rule.dismp`` (``a``, ``k``)."""
    if name == "rule.abel":
        return _abel_rule()
    if name == "rule.dismp-family":
        return _dismp_family_rule(params.get("F", "0"))
    if name == "rule.dismp":
        return _dismp_rule(params.get("a", "0"), float(params.get("k", 1.0)))
    raise KeyError(f"unknown rule {name!r}")
