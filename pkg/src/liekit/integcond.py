"""Integrability conditions and closed-form solutions.

Covers Riccati equations (constant K functional, linear changes onto
``D(t)(c1 + c2 x + c3 x^2)``, reduction with a particular solution,
linearizability), t-dependent harmonic oscillators and spin-1/2
Hamiltonians. "Constant on an interval" always means: the sampled values on
64 Chebyshev points spread by at most ``1e-8 * (1 + |mean|)``.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from . import exprlang as el
from .groupflow import SL2_BASIS, mobius
from .numerics import Antiderivative, chebyshev_grid, expm2, quad
from .odecore import Trajectory

__all__ = [
    "ConditionReport", "RiccatiCoefficients", "CoefficientZero",
    "ConditionFailed", "riccati_constant_K", "riccati_transform_TU",
    "solve_canonical", "riccati_reduce_with_solution", "rao_ukidave",
    "ratner_check", "hovy_solution", "hovy_system", "upper_incomplete_gamma",
    "riccati_linearizable", "tdho_check", "tdho_closed", "tdho_invariants",
    "tdho_2d_invariants", "tdho_2d_solution", "spin_condition",
    "spin_rotating_solution", "spin_field", "CONDITIONS", "SPREAD_TOL",
]

SPREAD_TOL = 1e-8
GRID_POINTS = 64


class CoefficientZero(ValueError):
    """A coefficient required to be non-vanishing vanishes on the grid."""


class ConditionFailed(ValueError):
    pass


@dataclass
class ConditionReport:
    name: str
    holds: bool
    witness: object
    deviation: float
    grid: tuple
    details: dict = field(default_factory=dict)

    def to_dict(self):
        w = self.witness
        if isinstance(w, complex):
            w = {"re": w.real, "im": w.imag}
        return {"name": self.name, "holds": bool(self.holds), "witness": w,
                "deviation": float(self.deviation), "grid": list(self.grid),
                "details": _jsonable(self.details)}


def _jsonable(d):
    out = {}
    for k, v in d.items():
        if isinstance(v, (el.Expr,)):
            out[k] = el.to_source(v)
        elif isinstance(v, (np.floating, np.integer)):
            out[k] = v.item()
        elif isinstance(v, (list, tuple)):
            out[k] = [el.to_source(x) if isinstance(x, el.Expr) else x for x in v]
        elif isinstance(v, dict):
            out[k] = _jsonable(v)
        elif callable(v):
            continue
        else:
            out[k] = v
    return out


@dataclass(frozen=True)
class RiccatiCoefficients:
    """``x' = b1(t) + b2(t) x + b3(t) x^2`` on ``interval``."""

    b1: el.Expr
    b2: el.Expr
    b3: el.Expr
    interval: tuple = (0.0, 1.0)

    def __post_init__(self):
        for k in ("b1", "b2", "b3"):
            object.__setattr__(self, k, el.as_expr(getattr(self, k)))
        a, b = self.interval
        if not a < b:
            raise ValueError("empty interval")

    def grid(self, n: int = GRID_POINTS):
        return chebyshev_grid(self.interval[0], self.interval[1], n)

    def funcs(self):
        return [_fn(e) for e in (self.b1, self.b2, self.b3)]


def _fn(e) -> Callable[[float], float]:
    f = el.lambdify(el.as_expr(e), ["t"])
    return lambda t: float(f(float(t)))


def _src(e) -> str:
    return el.to_source(el.as_expr(e))


def _spread(vals):
    vals = np.asarray(vals, dtype=float)
    mean = float(np.mean(vals))
    dev = float(np.max(vals) - np.min(vals))
    return dev, mean, dev <= SPREAD_TOL * (1 + abs(mean))


def _nonzero(f, grid, what):
    vals = np.array([f(t) for t in grid])
    if np.any(vals == 0) or np.any(~np.isfinite(vals)):
        raise CoefficientZero(f"{what} vanishes on the grid")
    if np.any(np.sign(vals) != np.sign(vals[0])):
        raise CoefficientZero(f"{what} changes sign on the grid")
    return vals


# ------------------------------------------------------------ K functional

def _K_expr(b1, b2, b3):
    return el.parse(f"({_src(b2)} + 0.5*({_src(el.diff_t(b3))}/{_src(b3)}"
                    f" - {_src(el.diff_t(b1))}/{_src(b1)}))"
                    f" / sqrt(abs({_src(b1)}*{_src(b3)}))")


def riccati_constant_K(rc: RiccatiCoefficients, grid=None,
                       name: str = "riccati.K") -> ConditionReport:
    """Constancy of ``(b2 + (b3'/b3 - b1'/b1)/2) / sqrt|b1 b3|``."""
    grid = rc.grid() if grid is None else np.asarray(grid, dtype=float)
    _nonzero(_fn(rc.b1), grid, "b1")
    _nonzero(_fn(rc.b3), grid, "b3")
    K = _K_expr(rc.b1, rc.b2, rc.b3)
    vals = np.array([_fn(K)(t) for t in grid])
    dev, mean, ok = _spread(vals)
    return ConditionReport(name, ok, mean, dev, (float(grid[0]), float(grid[-1]), len(grid)),
                           {"K": K, "min": float(vals.min()), "max": float(vals.max())})


def riccati_transform_TU(rc: RiccatiCoefficients, c1: float, c2: float, c3: float,
                         grid=None) -> ConditionReport:
    """Is there ``x' = G(t) x`` onto ``x' = D(t)(c1 + c2 x' + c3 x'^2)``?

    On success ``details`` holds ``G`` and ``D`` as Exprs and ``kappa``.
    """
    if c1 * c3 == 0:
        raise ValueError("c1*c3 must be non-zero")
    grid = rc.grid() if grid is None else np.asarray(grid, dtype=float)
    v1 = _nonzero(_fn(rc.b1), grid, "b1")
    v3 = _nonzero(_fn(rc.b3), grid, "b3")
    if np.sign(v1[0] * v3[0]) != np.sign(c1 * c3):
        raise ConditionFailed("sign(b1 b3) differs from sign(c1 c3)")
    kappa = float(np.sign(v1[0] / c1))
    ratio = f"({_src(rc.b1)})*({_src(rc.b3)})/({c1!r}*{c3!r})"
    D = el.parse(f"{kappa!r}*sqrt({ratio})")
    G = el.parse(f"sqrt(({_src(rc.b3)})*{c1!r}/(({_src(rc.b1)})*{c3!r}))")
    lhs = el.parse(f"({_src(_K_expr(rc.b1, rc.b2, rc.b3))})"
                   f"*sqrt(abs({_src(rc.b1)}*{_src(rc.b3)}))"
                   f"*sqrt({c1!r}*{c3!r}/(({_src(rc.b1)})*({_src(rc.b3)})))")
    vals = np.array([_fn(lhs)(t) for t in grid])
    dev = float(np.max(np.abs(vals - kappa * c2)))
    ok = dev <= SPREAD_TOL * (1 + abs(c2))
    target = tuple(el.parse(f"({_src(D)})*{c!r}") for c in (c1, c2, c3))
    return ConditionReport("riccati.TU", ok, kappa * c2, dev,
                           (float(grid[0]), float(grid[-1]), len(grid)),
                           {"G": G, "D": D, "kappa": kappa, "target": target,
                            "c": (c1, c2, c3)})


def solve_canonical(D, c, y0, t0: float, t: float):
    """Solution of ``y' = D(t)(c1 + c2 y + c3 y^2)`` by one quadrature.

    The autonomous flow in ``s = int D`` is an SL(2, R) exponential acting by
    a Mobius map, so poles of ``y`` are passed through infinity.
    """
    s = quad(_fn(D) if isinstance(D, (el.Expr, str)) else D, t0, t)
    c1, c2, c3 = (float(x) for x in c)
    gen = -(c1 * SL2_BASIS[0] + c2 * SL2_BASIS[1] + c3 * SL2_BASIS[2])
    return mobius(expm2(s * gen), y0)


def rao_ukidave(rc: RiccatiCoefficients, c: float, k: float, grid=None):
    """Rao-Ukidave condition as the linear-change test with ``(1, -k, 1/c)``.

    The change is ``x' = x/v`` with ``v = sqrt(b1/(c b3))``.
    """
    if c <= 0:
        raise ValueError("c must be positive")
    rep = riccati_transform_TU(rc, 1.0, -k, 1.0 / c, grid)
    rep.name = "riccati.rao-ukidave"
    rep.details["v"] = el.parse(f"sqrt(({_src(rc.b1)})/({c!r}*({_src(rc.b3)})))")
    return rep


def ratner_check(rc: RiccatiCoefficients, grid=None) -> ConditionReport:
    """The special pathway ``M = b2/b3``: ``d/dt(b2/b3) + b1 == 0``."""
    grid = rc.grid() if grid is None else np.asarray(grid, dtype=float)
    _nonzero(_fn(rc.b3), grid, "b3")
    e = el.parse(f"{_src(el.diff_t(el.parse(f'({_src(rc.b2)})/({_src(rc.b3)})')))}"
                 f" + ({_src(rc.b1)})")
    vals = np.array([_fn(e)(t) for t in grid])
    dev = float(np.max(np.abs(vals)))
    return ConditionReport("riccati.M=b2/b3", dev <= SPREAD_TOL, 0.0, dev,
                           (float(grid[0]), float(grid[-1]), len(grid)))


def riccati_reduce_with_solution(rc: RiccatiCoefficients, xp, c2: float = 0.0,
                                 c3: float = 1.0, anchor: float | None = None,
                                 D0: float = 1.0, residual_tol: float = 1e-7):
    """Reduce with a particular solution ``xp`` (Expr, callable or Trajectory).

    ``D`` solves ``D' = (b2 + b3'/b3 + 2 b3 xp) D - c2 D^2`` with ``D(anchor) = D0``
    in closed quadrature form; the change ``x' = b3 (x - xp) / (D c3)`` maps
    solutions onto ``x' = D (c2 x' + c3 x'^2)``. Returns a dict of callables.
    """
    f1, f2, f3 = rc.funcs()
    d3 = _fn(el.diff_t(rc.b3))
    a = rc.interval[0] if anchor is None else float(anchor)
    if isinstance(xp, Trajectory):
        res = max(abs(float(dy[0]) - (f1(t) + f2(t) * y[0] + f3(t) * y[0] ** 2))
                  for t, y, dy in zip(xp.t, xp.y, xp.dy))
        xfun = lambda t: float(xp(t)[0])  # noqa: E731
    elif isinstance(xp, (el.Expr, str, int, float)):
        xe = el.as_expr(xp)
        xfun = _fn(xe)
        dx = _fn(el.diff_t(xe))
        res = max(abs(dx(t) - (f1(t) + f2(t) * xfun(t) + f3(t) * xfun(t) ** 2))
                  for t in rc.grid())
    else:
        xfun, res = xp, 0.0
    if res > residual_tol:
        raise ConditionFailed(f"xp is not a particular solution (residual {res:.3g})")

    def P(t):
        b3 = f3(t)
        return f2(t) + d3(t) / b3 + 2 * b3 * xfun(t)
    IP = Antiderivative(P, anchor=a)
    E = lambda t: math.exp(IP(t))  # noqa: E731
    IE = Antiderivative(E, anchor=a)

    def D(t):
        den = 1.0 / D0 + c2 * IE(t)
        if den == 0 or (c2 and den * (1.0 / D0) <= 0):
            raise ZeroDivisionError(f"D vanishes or blows up near t={t:g}")
        return E(t) / den

    def change(t, x):
        return f3(t) * (x - xfun(t)) / (D(t) * c3)

    def inverse(t, y):
        return xfun(t) + y * D(t) * c3 / f3(t)
    return {"D": D, "M": lambda t: -xfun(t), "change": change, "inverse": inverse,
            "target": (lambda t: 0.0, lambda t: D(t) * c2, lambda t: D(t) * c3),
            "residual": res}


# ------------------------------------------------------------ Hovy

def upper_incomplete_gamma(a: float, t: float) -> float:
    """``Gamma(a, t)`` by quadrature up to ``t + 40 + 10 a`` plus the tail estimate."""
    if a <= 0 or t < 0:
        raise ValueError("need a > 0 and t >= 0")
    T = t + 40.0 + 10.0 * a
    if a == 1:
        body = quad(lambda s: math.exp(-s), t, T, epsabs=1e-15, epsrel=1e-13)
    else:
        body = quad(lambda s: s ** (a - 1) * math.exp(-s), t, T,
                    epsabs=1e-15, epsrel=1e-13)
    tail = math.exp(-T) * T ** (a - 1) / max(1.0 - (a - 1) / T, 0.5)
    return body + tail


def hovy_system(n: float, interval=(0.5, 3.0)) -> RiccatiCoefficients:
    """``x' = -n/t + (1 + n/t) x - x^2``; ``x = 1`` is a particular solution."""
    return RiccatiCoefficients(f"-{n!r}/t", f"1 + {n!r}/t", -1.0, interval)


def hovy_solution(n: float, K: float, t: float) -> float:
    """General solution ``1 - e^{-t} t^n / (Gamma(n+1, t) + K)``."""
    if t <= 0:
        raise ValueError("t must be positive")
    den = upper_incomplete_gamma(n + 1, t) + K
    if den == 0:
        raise ZeroDivisionError("Gamma(n+1, t) + K vanishes")
    return 1.0 - math.exp(-t) * t ** n / den


# ------------------------------------------------------------ linearizability

def riccati_linearizable(rc: RiccatiCoefficients, grid=None) -> ConditionReport:
    """Does the equation admit a real constant solution ``K``?

    Roots of ``b3 K^2 + b2 K + b1`` are sampled on the grid; a complex
    discriminant is reported (``details["complex"]``), not raised.
    """
    grid = rc.grid() if grid is None else np.asarray(grid, dtype=float)
    f1, f2, f3 = rc.funcs()
    g = (float(grid[0]), float(grid[-1]), len(grid))
    B1 = np.array([f1(t) for t in grid])
    B2 = np.array([f2(t) for t in grid])
    B3 = np.array([f3(t) for t in grid])
    disc = B2 * B2 - 4 * B1 * B3
    if np.all(B3 == 0):
        if np.any(B2 == 0):
            raise CoefficientZero("b2 vanishes in the linear case")
        vals = -B1 / B2
        dev, mean, ok = _spread(vals)
        return ConditionReport("riccati.linearizable", ok, mean, dev, g,
                               {"branch": "linear"})
    if np.any(B3 == 0):
        raise CoefficientZero("b3 vanishes on part of the grid")
    if np.any(disc < 0):
        i = int(np.argmin(disc))
        K = (-B2[i] + cmath.sqrt(disc[i])) / (2 * B3[i])
        return ConditionReport("riccati.linearizable", False, complex(K),
                               float(-disc.min()), g, {"complex": True})
    roots, devs = [], []
    for sgn in (1.0, -1.0):
        vals = (-B2 + sgn * np.sqrt(disc)) / (2 * B3)
        dev, mean, ok = _spread(vals)
        devs.append((dev, mean, sgn))
        if ok:
            roots.append(mean)
    dev, mean, sgn = min(devs)
    # the branches swap where b3 changes sign; test the identity directly too
    scale = np.abs(B1) + np.abs(B2) * abs(mean) + np.abs(B3) * mean * mean
    ident = float(np.max(np.abs(B1 + B2 * mean + B3 * mean * mean)
                         / np.maximum(scale, 1e-300)))
    holds = bool(roots) or ident <= SPREAD_TOL
    if holds and not roots:
        roots.append(mean)
    roots = sorted(set(roots))
    return ConditionReport("riccati.linearizable", holds, roots[0] if roots else mean,
                           min(dev, ident), g,
                           {"complex": False, "roots": roots, "identity_residual": ident})


# ------------------------------------------------------------ oscillators

def tdho_check(b1, b3, grid=None, interval=(0.0, 1.0), b2="0") -> ConditionReport:
    """K functional for ``x' = b1 p``, ``p' = -b3 x``; holds means ``c2 = K`` with ``c1 = c3 = 1``."""
    rc = RiccatiCoefficients(b1, b2, b3, interval)
    rep = riccati_constant_K(rc, grid, name="tdho.K")
    rep.details["c"] = (1.0, rep.witness, 1.0)
    return rep


def _flow(M, s, x0, p0):
    E = expm2(s * np.asarray(M, dtype=float))
    return E @ np.array([x0, p0], dtype=float)


def tdho_closed(kind: str, params: dict, t: float):
    """Closed-form ``(x, p)`` for the integrable oscillator families.

    ``caldirola-kanai``: keys ``m0, mu, omega, x0, p0``; ``m = m0 e^{mu t}``.
    ``inverse-square``: keys ``omega, L, c2, x0, p0``; ``F = (L - c2 omega t)^-2``.
    ``inverse-quartic``: keys ``omega, u1, u0, x0, p0``; ``F = (u1 t + u0)^-4``.
    All use unit mass except Caldirola-Kanai.
    """
    x0, p0 = float(params["x0"]), float(params["p0"])
    if kind == "caldirola-kanai":
        m0, mu, w = (float(params[k]) for k in ("m0", "mu", "omega"))
        s = math.sqrt(m0 * w)
        xs, ps = _flow([[mu / 2, w], [-w, -mu / 2]], t, s * x0, p0 / s)
        g = s * math.exp(mu * t / 2)
        return xs / g, ps * g
    if kind == "inverse-square":
        w, L, c2 = (float(params[k]) for k in ("omega", "L", "c2"))
        r = L - c2 * w * t
        if L <= 0 or r <= 0:
            raise ValueError("L - c2 omega t must stay positive")
        tau = w * t / L if c2 == 0 else math.log(L / r) / c2
        a0 = math.sqrt(w / L)
        xs, ps = _flow([[c2 / 2, 1.0], [-1.0, -c2 / 2]], tau, a0 * x0, p0 / a0)
        a = math.sqrt(w / r)
        return xs / a, ps * a
    if kind == "inverse-quartic":
        w, u1, u0 = (float(params[k]) for k in ("omega", "u1", "u0"))
        V = u1 * t + u0
        if u0 <= 0 or V <= 0:
            raise ValueError("V(t) = u1 t + u0 must stay positive")
        tau = t / (u0 * V)
        xs, ps = _flow([[0.0, 1.0], [-w * w, 0.0]], tau, x0 / u0, -u1 * x0 + u0 * p0)
        x = V * xs
        return x, (ps + u1 * x) / V
    raise KeyError(f"unknown oscillator family {kind!r}")


def _asin(z):
    if abs(z) > 1 + 1e-12:
        raise ValueError(f"arcsin argument {z!r} outside [-1, 1]")
    return math.asin(max(-1.0, min(1.0, z)))


def tdho_invariants(u1, u0, omega, t, x, v):
    """``(I1, I2)`` for ``x'' = -omega^2 (u1 t + u0)^-4 x``."""
    V = u1 * t + u0
    if V == 0 or u1 == 0:
        raise ValueError("need V(t) != 0 and u1 != 0")
    I1 = (x * omega / V) ** 2 + (V * v - u1 * x) ** 2
    I2 = _asin(x * omega / (V * math.sqrt(I1))) + omega / (u1 * V)
    return I1, I2


@dataclass(frozen=True)
class TDHO2DInvariants:
    I1: float
    I2: float
    I12: float
    well_defined: bool


def _rational(r, max_den=1000):
    q = Fraction(r).limit_denominator(max_den)
    return abs(float(q) - r) <= 1e-12 * max(1.0, abs(r))


def tdho_2d_invariants(u1, u0, w1, w2, t, state) -> TDHO2DInvariants:
    """``I1``, ``I2`` and the phase-difference invariant ``I12``.

    ``state`` is ``(x1, x2, p1, p2)``. ``I12`` is always evaluated; the
    ``well_defined`` flag records whether ``w1/w2`` is rational.
    """
    x1, x2, p1, p2 = (float(s) for s in state)
    V = u1 * t + u0
    I1 = (w1 * x1 / V) ** 2 + (V * p1 - u1 * x1) ** 2
    I2 = (w2 * x2 / V) ** 2 + (V * p2 - u1 * x2) ** 2
    I12 = (_asin(x1 * w1 / (V * math.sqrt(I1))) / w1
           - _asin(x2 * w2 / (V * math.sqrt(I2))) / w2)
    return TDHO2DInvariants(I1, I2, I12, _rational(w1 / w2))


def tdho_2d_solution(u1, u0, w, I, Ibar, t):
    """``x(t) = V sqrt(I)/w * sin(Ibar - w/(V u1))`` for one component."""
    V = u1 * t + u0
    return V * math.sqrt(I) / w * math.sin(Ibar - w / (V * u1))


# ------------------------------------------------------------ spin

def spin_field(B, theta, phi):
    """Cartesian components ``(Bx, By, Bz)`` as Exprs from polar ones."""
    B, th, ph = (_src(e) for e in (B, theta, phi))
    return (el.parse(f"{B}*sin({th})*cos({ph})"), el.parse(f"{B}*sin({th})*sin({ph})"),
            el.parse(f"{B}*cos({th})"))


def spin_condition(B, theta, phi, grid=None, interval=(0.0, 1.0)) -> ConditionReport:
    """Constancy of ``gamma`` with ``cot gamma = (phi'/B - cos theta)/sin theta``.

    ``gamma`` is reported in ``(0, pi)``; it is defined modulo pi.
    """
    grid = chebyshev_grid(*interval, GRID_POINTS) if grid is None else np.asarray(grid)
    fB, fth = _fn(B), _fn(theta)
    fdphi = _fn(el.diff_t(el.as_expr(phi)))
    gam = []
    for t in grid:
        s = math.sin(fth(t))
        b = fB(t)
        if abs(s) < 1e-14 or b == 0:
            raise ValueError(f"gamma undefined at t={t:g} (sin theta or B vanishes)")
        cot = (fdphi(t) / b - math.cos(fth(t))) / s
        gam.append(0.5 * math.pi - math.atan(cot))
    dev, mean, ok = _spread(gam)
    return ConditionReport("spin.gamma", ok, mean, dev,
                           (float(grid[0]), float(grid[-1]), len(grid)))


def _spin_ops():
    sx = 0.5 * np.array([[0, 1], [1, 0]], dtype=complex)
    sy = 0.5 * np.array([[0, -1j], [1j, 0]])
    sz = 0.5 * np.array([[1, 0], [0, -1]], dtype=complex)
    return sx, sy, sz


def spin_rotating_solution(B: float, theta: float, omega: float, t: float, psi0,
                           branch: int = 1):
    """Closed-form spinor for ``B (sin th cos wt, sin th sin wt, cos th) . S``.

    With ``U(t) = exp(i gamma (sin wt S_x - cos wt S_y))`` the rotated spinor
    evolves under ``D S_z``, so ``psi(t) = U(t)^-1 exp(-i D t S_z) U(0) psi0``.
    """
    if math.sin(theta) == 0:
        raise ValueError("theta must not be a multiple of pi")
    root = math.sqrt(omega * omega / (B * B) - 2 * omega / B * math.cos(theta) + 1)
    tg2 = (-omega / B + math.cos(theta) + branch * root) / math.sin(theta)
    gamma = 2 * math.atan(tg2)
    D = B * (math.cos(theta) - tg2 * math.sin(theta))
    sx, sy, sz = _spin_ops()

    def U(s):
        return expm2(1j * gamma * (math.sin(omega * s) * sx - math.cos(omega * s) * sy))
    psi0 = np.asarray(psi0, dtype=complex)
    return np.linalg.solve(U(t), expm2(-1j * D * t * sz) @ (U(0.0) @ psi0))


# ------------------------------------------------------------ registry

CONDITIONS = ("riccati.K", "riccati.TU", "riccati.linearizable", "tdho.K", "spin.gamma")
