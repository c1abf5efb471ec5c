"""Lie-group equations on small matrix groups and their applications.

A group equation reads ``A' = -sum_a b_a(t) M_a A`` with ``A(0) = I``. Its
solution acts on points (Mobius on the extended line, linearly on pairs,
on spinors) to give solutions of the associated Lie systems. Wei-Norman
factorizations, a few closed forms and the affine action of curves in
SL(2, R) on coefficient curves are also provided here.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import exprlang as el
from .numerics import Antiderivative
from .odecore import Trajectory, integrate
from .superpose import INFINITY

__all__ = [
    "LieGroupEquation", "GroupTrajectory", "ProjectionError", "ZeroCrossing",
    "preset", "PRESETS", "SL2_BASIS", "SU2_BASIS", "SL3_PAINLEVE_BASIS",
    "solve_group_equation", "act", "riccati_via_group",
    "wei_norman_sl2", "wei_norman_quadratic", "wei_norman_product",
    "heisenberg_quadratures", "caldirola_kanai_closed", "tplusk_closed",
    "transform_coefficients", "compose_curves", "sl2_reduction_oscillator",
    "su2_real_form", "structure_residual", "mobius", "milne_pinney_action", "project", "group_residual",
]


class ProjectionError(RuntimeError):
    """The state drifted too far from the group before projection."""


class ZeroCrossing(ValueError):
    pass


SL2_BASIS = (np.array([[0.0, -1.0], [0.0, 0.0]]),
             0.5 * np.array([[-1.0, 0.0], [0.0, 1.0]]),
             np.array([[0.0, 0.0], [1.0, 0.0]]))
SL2_TABLE = {(1, 2): {1: 1}, (1, 3): {2: 2}, (2, 3): {3: 1}}

SU2_BASIS = (0.5 * np.array([[0, 1j], [1j, 0]]),
             0.5 * np.array([[0, 1], [-1, 0]], dtype=complex),
             0.5 * np.array([[1j, 0], [0, -1j]]))
SU2_TABLE = {(1, 2): {3: -1}, (1, 3): {2: 1}, (2, 3): {1: -1}}

SL3_PAINLEVE_BASIS = tuple(np.array(m, dtype=float) for m in (
    [[0, -1, 0], [0, 0, -1], [0, 0, 0]],
    [[0, 0, 0], [0, 0, 0], [-1, 0, 0]],
    [[0, 0, 0], [1, 0, 0], [0, -1, 0]],
    [[1 / 3, 0, 0], [0, -2 / 3, 0], [0, 0, 1 / 3]],
    [[0, 1, 0], [0, 0, -1], [0, 0, 0]],
    [[0, 0, 2], [0, 0, 0], [0, 0, 0]],
    [[0, 0, 0], [-1, 0, 0], [0, -1, 0]],
    [[2, 0, 0], [0, 0, 0], [0, 0, -2]],
))


def _painleve_table():
    from .liealg import PAINLEVE_TABLE
    return PAINLEVE_TABLE


def _coef_fn(b):
    if callable(b) and not isinstance(b, el.Expr):
        return b
    f = el.lambdify(el.as_expr(b), ["t"])
    return lambda t: float(f(t))


@dataclass(frozen=True)
class LieGroupEquation:
    """``A' = -sum b_a(t) M_a A`` on the group named by ``group``.

    ``group`` is one of ``SL2R``, ``SU2``, ``SL3R`` or ``GL``. Coefficients
    are Exprs in ``t`` (or sources) or plain callables.
    """

    group: str
    basis: tuple
    coeffs: tuple
    constants: dict | None = None
    _fns: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.group not in ("SL2R", "SU2", "SL3R", "GL"):
            raise ValueError(f"unknown group {self.group!r}")
        basis = tuple(np.asarray(m) for m in self.basis)
        if len(basis) != len(self.coeffs):
            raise ValueError("need one coefficient per basis matrix")
        coeffs = tuple(c if callable(c) and not isinstance(c, el.Expr)
                       else el.as_expr(c) for c in self.coeffs)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "_fns", tuple(_coef_fn(c) for c in coeffs))
        for m in basis:
            if self.group != "GL" and abs(np.trace(m)) > 1e-12:
                raise ValueError("basis matrices must be traceless")
            if self.group == "SU2" and np.max(np.abs(m + m.conj().T)) > 1e-12:
                raise ValueError("su(2) basis must be skew-Hermitian")
        if self.constants is not None:
            res = structure_residual(basis, self.constants)
            if res > 1e-12:
                raise ValueError(f"basis violates declared structure constants ({res:g})")

    @property
    def dim(self):
        return self.basis[0].shape[0]

    @property
    def complex(self):
        return any(np.iscomplexobj(m) for m in self.basis)

    def generator(self, t):
        """Right-hand-side matrix ``-sum b_a(t) M_a``."""
        out = np.zeros(self.basis[0].shape, dtype=complex if self.complex else float)
        for f, m in zip(self._fns, self.basis):
            out -= f(t) * m
        return out


def structure_residual(basis, table) -> float:
    """Max entry of ``[M_i, M_j] - sum_k c_ij^k M_k`` over all pairs."""
    r = len(basis)
    worst = 0.0
    for i in range(r):
        for j in range(i + 1, r):
            lhs = basis[i] @ basis[j] - basis[j] @ basis[i]
            rhs = np.zeros_like(lhs)
            for k, c in table.get((i + 1, j + 1), {}).items():
                rhs = rhs + float(c) * basis[k - 1]
            worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


PRESETS = ("sl2r.a1a2a3", "su2.v1v2v3", "sl3r.painleve")


def preset(name: str, coeffs: Sequence) -> LieGroupEquation:
    """Group equation from a named basis and matching coefficients."""
    if name == "sl2r.a1a2a3":
        return LieGroupEquation("SL2R", SL2_BASIS, tuple(coeffs), SL2_TABLE)
    if name == "su2.v1v2v3":
        return LieGroupEquation("SU2", SU2_BASIS, tuple(coeffs), SU2_TABLE)
    if name == "sl3r.painleve":
        return LieGroupEquation("SL3R", SL3_PAINLEVE_BASIS, tuple(coeffs),
                                _painleve_table())
    raise KeyError(f"unknown group preset {name!r}")


# ------------------------------------------------------------ solving

@dataclass(frozen=True)
class GroupTrajectory:
    t: np.ndarray
    A: np.ndarray
    group: str
    residuals: np.ndarray

    @property
    def final(self):
        return self.A[-1].copy()

    def at(self, t):
        """State at a mesh time; other times are refused."""
        idx = np.nonzero(self.t == t)[0]
        if idx.size == 0:
            raise ValueError("time is not a mesh point; use solve_group_equation(t1=...)")
        return self.A[idx[0]].copy()


def group_residual(group, A) -> float:
    n = A.shape[0]
    if group == "SU2":
        return max(float(np.max(np.abs(A.conj().T @ A - np.eye(n)))),
                   abs(np.linalg.det(A) - 1.0))
    if group in ("SL2R", "SL3R"):
        return abs(float(np.linalg.det(A)) - 1.0)
    return 0.0


def project(group, A):
    """Nearest-group correction used after every accepted step."""
    n = A.shape[0]
    if group == "SU2":
        u, _, vh = np.linalg.svd(A)
        U = u @ vh
        return U / np.sqrt(np.linalg.det(U))
    if group in ("SL2R", "SL3R"):
        d = float(np.linalg.det(A))
        if d <= 0:
            raise ProjectionError("determinant left the identity component")
        return A / d ** (1.0 / n)
    return A


def _pack(A, cplx):
    return np.concatenate([A.real.ravel(), A.imag.ravel()]) if cplx else A.ravel()


def _unpack(y, n, cplx):
    if cplx:
        h = n * n
        return (y[:h] + 1j * y[h:]).reshape(n, n)
    return y.reshape(n, n)


def solve_group_equation(eq: LieGroupEquation, t1: float, tol: float = 1e-10,
                         t0: float = 0.0, project_steps: bool = True,
                         max_residual: float = 1e-6) -> GroupTrajectory:
    """Integrate from ``A(t0) = I`` entrywise and project each accepted state.

    The residual recorded for every step is measured before projection; a
    value above ``max_residual`` raises :class:`ProjectionError`.
    """
    n, cplx = eq.dim, eq.complex
    log = [0.0]

    def rhs(t, y):
        A = _unpack(y, n, cplx)
        return _pack(eq.generator(t) @ A, cplx)

    def post(t, y):
        A = _unpack(y, n, cplx)
        r = group_residual(eq.group, A)
        log.append(r)
        if r > max_residual:
            raise ProjectionError(f"group residual {r:.3g} at t={t:g}")
        return _pack(project(eq.group, A), cplx) if project_steps else y

    tr = integrate(rhs, _pack(np.eye(n, dtype=complex if cplx else float), cplx),
                   t0, t1, tol, post=post)
    mats = np.array([_unpack(y, n, cplx) for y in tr.y])
    return GroupTrajectory(tr.t, mats, eq.group, np.array(log))


def su2_real_form(A) -> np.ndarray:
    """``(x1, x2, y1, y2)`` with ``A = [[a, b], [-b*, a*]]``, ``a = x1+iy1``, ``b = x2+iy2``."""
    A = np.asarray(A)
    a, b = A[0, 0], A[0, 1]
    out = np.array([a.real, b.real, a.imag, b.imag])
    out.setflags(write=False)
    return out


# ------------------------------------------------------------ actions

def mobius(A, x):
    """Projective action on the extended real line; ``INFINITY`` is a value."""
    (a, b), (c, d) = np.asarray(A, dtype=float)
    if x is INFINITY:
        return INFINITY if c == 0 else a / c
    den = c * x + d
    if den == 0:
        return INFINITY
    return (a * x + b) / den


def act(tag: str, A, point):
    """Group action by tag: ``mobius``, ``linear`` or ``spinor``.

    The group tags ``SL2R`` (Mobius on scalars, linear on pairs), ``SU2``
    (spinor) and ``SL3R``/``GL`` (linear) are accepted as shorthands.
    """
    A = np.asarray(A)
    if tag == "SL2R":
        tag = "mobius" if point is INFINITY or np.ndim(point) == 0 else "linear"
    elif tag == "SU2":
        tag = "spinor"
    elif tag in ("SL3R", "GL"):
        tag = "linear"
    if tag == "mobius":
        return mobius(A, point)
    if tag == "linear":
        return A @ np.asarray(point, dtype=float)
    if tag == "spinor":
        return A @ np.asarray(point, dtype=complex)
    raise KeyError(f"unknown action {tag!r}")


def milne_pinney_action(A, x: float, v: float, k: float):
    """SL(2,R) action on ``(x, v)``, ``x > 0``, whose fundamental fields are
    ``v d_x + k/x^3 d_v``, ``(x d_x - v d_v)/2`` and ``-x d_v`` (``k > 0``).

    Spot-check helper only; the velocity sign comes from the
    ``exp(-a1 M1) exp(a3 M3) exp(-a2 M2)`` factorization and loses about
    half the digits where ``v`` is near zero.
    """
    A = np.asarray(A, dtype=float)
    if x <= 0 or k <= 0:
        raise ValueError("needs x > 0 and k > 0")
    (a, b), (c, d) = A
    if abs(d) < 1e-6 * max(1.0, abs(a), abs(b), abs(c)):
        # A = (A S^-1) S with S = [[1, -1], [0, 1]]; both factors have d away from 0
        S = np.array([[1.0, -1.0], [0.0, 1.0]])
        S_inv = np.array([[1.0, 1.0], [0.0, 1.0]])
        return milne_pinney_action(A @ S_inv, *milne_pinney_action(S, x, v, k), k)
    p = d * v + c * x
    xb = math.sqrt((k + ((b * v + a * x) * p + k * d * b / x ** 2) ** 2)
                   / (p * p + k * (d / x) ** 2))
    kappa = np.sign(b / d * p * p + k * d * b / x ** 2 + abs(x) / d * p)
    vb2 = p * p + k * d * d / x ** 2 * (1 - x * x / (d * d * xb * xb))
    return xb, float(kappa) * math.sqrt(max(vb2, 0.0))


def riccati_via_group(b1, b2, b3, t1: float, tol: float = 1e-11, t0: float = 0.0):
    """Solve ``x' = b1 + b2 x + b3 x^2`` for every initial value at once.

    Returns ``(flow, trajectory)``; ``flow(i, x0)`` is the solution at mesh
    index ``i``. Poles of individual solutions are crossed through infinity.
    """
    gt = solve_group_equation(preset("sl2r.a1a2a3", (b1, b2, b3)), t1, tol, t0)

    def flow(i, x0):
        return mobius(gt.A[i], x0)
    return flow, gt


# ------------------------------------------------------------ Wei-Norman

def _fns(bs):
    return [_coef_fn(b) for b in bs]


def wei_norman_sl2(b1, b2, b3, t1: float, tol: float = 1e-10) -> Trajectory:
    """Exponents ``(v1, v2, v3)`` for the ordering ``exp(-v1 a1) exp(-v2 a2) exp(-v3 a3)``.

    A pole of ``v1`` raises :class:`~liekit.odecore.StoppedAtSingularity`.
    """
    f1, f2, f3 = _fns((b1, b2, b3))

    def rhs(t, v):
        c1, c2, c3 = f1(t), f2(t), f3(t)
        return np.array([c1 + c2 * v[0] + c3 * v[0] ** 2,
                         c2 + 2 * c3 * v[0],
                         math.exp(v[1]) * c3])
    return integrate(rhs, np.zeros(3), 0.0, t1, tol)


def wei_norman_product(v) -> np.ndarray:
    """SL(2, R) element ``exp(-v1 a1) exp(-v2 a2) exp(-v3 a3)``."""
    v1, v2, v3 = (float(x) for x in v[:3])
    e1 = np.array([[1.0, v1], [0.0, 1.0]])
    e2 = np.diag([math.exp(v2 / 2), math.exp(-v2 / 2)])
    e3 = np.array([[1.0, 0.0], [-v3, 1.0]])
    return e1 @ e2 @ e3


def wei_norman_quadratic(bs: Sequence, t1: float, tol: float = 1e-10) -> Trajectory:
    """Exponents ``v1..v6`` of the six-parameter quadratic-Hamiltonian group."""
    if len(bs) != 6:
        raise ValueError("six coefficients required")
    f = _fns(bs)

    def rhs(t, v):
        b1, b2, b3, b4, b5, b6 = (g(t) for g in f)
        v1, v2, _, v4, v5, _ = v
        return np.array([
            b1 + b2 * v1 + b3 * v1 ** 2,
            b2 + 2 * b3 * v1,
            math.exp(v2) * b3,
            b4 + 0.5 * b2 * v4 + b1 * v5,
            b5 - b3 * v4 - 0.5 * b2 * v5,
            b6 - b5 * v4 + 0.5 * b3 * v4 ** 2 - 0.5 * b1 * v5 ** 2,
        ])
    return integrate(rhs, np.zeros(6), 0.0, t1, tol)


def heisenberg_quadratures(m, S, t: float):
    """Closed quadrature solution ``(v1, v2, v3, v4)`` for mass ``m`` and force ``S``.

    ``m`` must stay positive on ``[0, t]``.
    """
    fm, fs = _coef_fn(m), _coef_fn(S)

    def inv_m(u):
        mu = fm(u)
        if mu <= 0:
            raise ValueError(f"mass not positive at t={u:g}")
        return 1.0 / mu
    V1 = Antiderivative(inv_m)
    V3 = Antiderivative(fs)
    V2 = Antiderivative(lambda u: inv_m(u) * V3(u))
    V4 = Antiderivative(lambda u: -fs(u) * V2(u) - 0.5 * inv_m(u) * V3(u) ** 2)
    return V1(t), V2(t), V3(t), V4(t)


def caldirola_kanai_closed(m0: float, r: float, w0: float, t: float):
    """``(v1, v2, v3)`` for mass ``m0 e^{-rt}`` and frequency ``w0``.

    When ``r^2 < 4 w0^2`` the trigonometric continuation is used.
    """
    d = r * r - 4 * w0 * w0
    if t == 0:
        return 0.0, 0.0, 0.0
    if d > 0:
        wb = math.sqrt(d)
        x = 0.5 * t * wb
        den = r + wb / math.tanh(x)
        inner = r * math.sinh(x) + wb * math.cosh(x)
        v2 = r * t + 2 * math.log(wb) - 2 * math.log(inner)
    elif d < 0:
        wb = math.sqrt(-d)
        x = 0.5 * t * wb
        if math.sin(x) == 0:
            raise ZeroDivisionError(f"coth pole at t={t:g}")
        den = r + wb * math.cos(x) / math.sin(x)
        inner = (r * math.sin(x) + wb * math.cos(x)) / wb
        if inner <= 0:
            raise ZeroDivisionError(f"logarithm singular at t={t:g}")
        v2 = r * t - 2 * math.log(inner)
    else:
        den = r + 2.0 / t
        v2 = r * t - 2 * math.log(1 + 0.5 * r * t)
    if den == 0:
        raise ZeroDivisionError(f"coth pole at t={t:g}")
    v1 = 2 * math.exp(r * t) / (m0 * den)
    v3 = 2 * m0 * w0 * w0 / den
    return v1, v2, v3


def tplusk_closed(m: float, w0: float, k: float, t: float):
    """``(v1, v2, v3)`` for frequency ``w0/(t+k)``; complex exponents if ``w0 > 1/2``."""
    if k <= 0 or t + k <= 0:
        raise ValueError("need k > 0 and t + k > 0")
    wb = cmath.sqrt(1 - 4 * w0 * w0)
    if abs(wb) < 1e-12:
        raise ValueError("w0 = 1/2 is a degenerate case")
    P = (k + t) ** wb
    Q = k ** wb
    den = Q * (wb - 1) + P * (wb + 1)
    if den == 0:
        raise ZeroDivisionError(f"pole at t={t:g}")
    v1 = 2 * (k + t) * (P - Q) / (m * den)
    v2 = ((1 + wb) * cmath.log(k + t) - (1 + wb) * math.log(k)
          + 2 * cmath.log(2 * Q * wb) - 2 * cmath.log(den))
    v3 = 2 * m * w0 * w0 / k * (P - Q) / den
    im = math.remainder(v2.imag, 2 * math.pi)
    if max(abs(v1.imag), abs(v3.imag), abs(im)) > 1e-9 * (1 + abs(v1) + abs(v3)):
        raise ValueError("closed form is not real on this branch")
    return v1.real, v2.real, v3.real


# ------------------------------------------------------------ transformations

def transform_coefficients(Abar: Sequence, b: Sequence, samples=None,
                           det_tol: float = 1e-10):
    """Coefficients ``(b1', b2', b3')`` after the change ``x' = Abar(t) . x``.

    ``Abar`` is ``(alpha, beta, gamma, delta)`` with unit determinant, which
    is checked at ``samples`` (default: eleven points in ``[0, 1]``).
    """
    al, be, ga, de = (el.as_expr(a) for a in Abar)
    b1, b2, b3 = (el.as_expr(x) for x in b)
    det = al * de - be * ga
    fdet = el.lambdify(det, ["t"])
    for t in (np.linspace(0, 1, 11) if samples is None else samples):
        if abs(fdet(float(t)) - 1.0) > det_tol:
            raise ValueError(f"determinant {fdet(float(t))!r} != 1 at t={t:g}")
    da, db, dg, dd = (el.diff_t(x) for x in (al, be, ga, de))
    n3 = de * de * b3 - de * ga * b2 + ga * ga * b1 + ga * dd - de * dg
    n2 = (-2 * be * de * b3 + (al * de + be * ga) * b2 - 2 * al * ga * b1
          + de * da - al * dd + be * dg - ga * db)
    n1 = be * be * b3 - al * be * b2 + al * al * b1 + al * db - be * da
    return n1, n2, n3


def compose_curves(A2: Sequence, A1: Sequence):
    """Entries of the product curve ``A2 . A1``."""
    a2, b2, c2, d2 = (el.as_expr(x) for x in A2)
    a1, b1, c1, d1 = (el.as_expr(x) for x in A1)
    return (a2 * a1 + b2 * c1, a2 * b1 + b2 * d1,
            c2 * a1 + d2 * c1, c2 * b1 + d2 * d1)



def sl2_reduction_oscillator(omega2, alpha1: Trajectory, floor: float = 1e-8):
    """Reduce ``A' = -(a1 + W^2 a3) A`` using ``alpha1`` solving ``a'' = -W^2 a``.

    ``alpha1`` carries ``(alpha, alpha')`` with ``alpha(0) = 1``, ``alpha'(0) = 0``.
    Returns a dict with the reduced coefficient ``1/alpha^2`` on the mesh,
    ``log alpha``, ``alpha'/alpha`` and ``reconstruct(i)``, the group element
    rebuilt from the reduced (abelian) solution at mesh index ``i``.
    """
    a = alpha1.y[:, 0]
    da = alpha1.y[:, 1]
    if np.any(np.sign(a[1:]) != np.sign(a[:-1])) or np.any(np.abs(a) < floor):
        i = int(np.argmax((np.abs(a) < floor) | np.r_[False, np.sign(a[1:]) != np.sign(a[:-1])]))
        raise ZeroCrossing(f"alpha1 vanishes near t={alpha1.t[i]:g}")
    t = alpha1.t
    coef = 1.0 / a ** 2
    # Simpson on each mesh interval, midpoints from the dense output
    mid = alpha1(0.5 * (t[1:] + t[:-1]))[:, 0]
    h = np.diff(t)
    v = np.concatenate([[0.0], np.cumsum(h / 6 * (coef[:-1] + 4 / mid ** 2 + coef[1:]))])

    def reconstruct(i):
        gt = np.array([[a[i], 0.0], [da[i], 1.0 / a[i]]])
        return gt @ np.array([[1.0, v[i]], [0.0, 1.0]])
    return {"t": t, "coefficient": coef, "log_alpha": np.log(np.abs(a)),
            "ratio": da / a, "v": v, "reconstruct": reconstruct}
