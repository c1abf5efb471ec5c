"""Adaptive integration of nonautonomous first-order systems.

The Dormand-Prince 5(4) kernel is compiled with Cython when available; the
pure-Python twin is used otherwise (or when ``LIEKIT_PURE_PYTHON=1``).
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import _dopri_py
from .exprlang import as_expr, lambdify

try:
    if os.environ.get("LIEKIT_PURE_PYTHON"):
        raise ImportError("pure Python requested")
    from . import _dopri as _compiled
except ImportError:
    _compiled = None

BACKEND = "cython" if _compiled is not None else "python"
BLOWUP = 1e12

__all__ = ["TDVectorField", "Trajectory", "StoppedAtSingularity",
           "StepUnderflow", "integrate", "sample", "BACKEND", "kernels"]


def kernels():
    """Available kernel names, compiled first."""
    return (["cython"] if _compiled is not None else []) + ["python"]


class StoppedAtSingularity(RuntimeError):
    """A component exceeded the blow-up bound; ``t_last`` is the last valid time."""

    def __init__(self, t_last, trajectory):
        super().__init__(f"solution blew up after t={t_last!r}")
        self.t_last = t_last
        self.trajectory = trajectory


class StepUnderflow(RuntimeError):
    def __init__(self, t_last, trajectory):
        super().__init__(f"step size underflow at t={t_last!r}")
        self.t_last = t_last
        self.trajectory = trajectory


class TDVectorField:
    """t-dependent vector field on R^n from Exprs or a callable ``f(t, x)``.

    Expr components use the variable ``t`` and the state names ``names``
    (default ``x1..xn``); any extra symbols must be bound via ``params``.
    """

    def __init__(self, components=None, func: Callable | None = None,
                 dim: int | None = None, names: Sequence[str] | None = None,
                 params: dict | None = None):
        if (components is None) == (func is None):
            raise ValueError("give exactly one of components or func")
        if components is not None:
            self.components = [as_expr(c) for c in components]
            self.dim = len(self.components)
            if dim is not None and dim != self.dim:
                raise ValueError("dim does not match number of components")
            self.names = list(names) if names else [f"x{i + 1}" for i in range(self.dim)]
            params = dict(params or {})
            args = ["t"] + self.names + list(params)
            fns = [lambdify(c, args) for c in self.components]
            pvals = list(params.values())

            def f(t, x, fns=fns, pvals=pvals):
                return np.array([g(t, *x, *pvals) for g in fns])
            self.func = f
        else:
            if dim is None:
                raise ValueError("dim required with func")
            self.components = None
            self.dim = int(dim)
            self.names = list(names) if names else [f"x{i + 1}" for i in range(self.dim)]
            self.func = func

    def __call__(self, t, x):
        return np.asarray(self.func(t, np.asarray(x, dtype=float)), dtype=float)


@dataclass(frozen=True)
class Trajectory:
    """Accepted-step mesh with cubic Hermite dense output."""

    t: np.ndarray
    y: np.ndarray
    dy: np.ndarray
    tol: float

    @property
    def t0(self):
        return float(self.t[0])

    @property
    def t1(self):
        return float(self.t[-1])

    @property
    def dim(self):
        return self.y.shape[1]

    @property
    def final(self):
        return self.y[-1].copy()

    def __call__(self, t):
        return sample(self, t)

    def sample(self, t):
        return sample(self, t)


def sample(tr: Trajectory, t):
    """Hermite state at time ``t`` (scalar or array); mesh points are exact."""
    ts = tr.t
    scalar = np.ndim(t) == 0
    tq = np.atleast_1d(np.asarray(t, dtype=float))
    lo, hi = min(ts[0], ts[-1]), max(ts[0], ts[-1])
    if np.any(tq < lo) or np.any(tq > hi):
        raise ValueError(f"t outside [{lo}, {hi}]")
    forward = ts[-1] >= ts[0]
    key = ts if forward else ts[::-1]
    out = np.empty((tq.size, tr.y.shape[1]))
    for q, tv in enumerate(tq):
        j = int(np.searchsorted(key, tv))
        if j < len(key) and key[j] == tv:
            idx = j if forward else len(ts) - 1 - j
            out[q] = tr.y[idx]
            continue
        if forward:
            i0, i1 = j - 1, j
        else:
            i1 = len(ts) - j
            i0 = i1 - 1
        ta, tb = ts[i0], ts[i1]
        h = tb - ta
        th = (tv - ta) / h
        th2, th3 = th * th, th * th * th
        h00 = 2 * th3 - 3 * th2 + 1
        h10 = th3 - 2 * th2 + th
        h01 = -2 * th3 + 3 * th2
        h11 = th3 - th2
        out[q] = (h00 * tr.y[i0] + h10 * h * tr.dy[i0]
                  + h01 * tr.y[i1] + h11 * h * tr.dy[i1])
    return out[0] if scalar else out


def _initial_step(f, t0, x0, t1, tol):
    span = abs(t1 - t0)
    if span == 0.0:
        return 0.0
    f0 = np.asarray(f(t0, x0), dtype=float)
    sc = tol * (1.0 + np.abs(x0))
    n = max(x0.size, 1)
    d0 = math.sqrt(float(np.sum((x0 / sc) ** 2)) / n)
    d1 = math.sqrt(float(np.sum((f0 / sc) ** 2)) / n)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    s = 1.0 if t1 >= t0 else -1.0
    try:
        f1 = np.asarray(f(t0 + s * h0, x0 + s * h0 * f0), dtype=float)
        d2 = math.sqrt(float(np.sum(((f1 - f0) / sc) ** 2)) / n) / h0
    except (ArithmeticError, ValueError):
        d2 = math.inf
    if not math.isfinite(d2):
        h1 = 1e-3 * h0
    elif max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    floor = 64 * np.finfo(float).eps * max(abs(t0), 1.0)
    return min(span, max(min(1e-3 * span, 100 * h0, h1), floor))


def integrate(f, x0, t0: float, t1: float, tol: float = 1e-8,
              hmax: float | None = None, max_steps: int = 2_000_000,
              backend: str | None = None, post=None) -> Trajectory:
    """Integrate ``f`` from ``t0`` to ``t1`` (either direction).

    Local error per step is kept below ``tol*(1+|x|)`` componentwise.
    Raises :class:`StoppedAtSingularity` when any component exceeds 1e12.
    ``post(t, y)`` may replace each accepted state, e.g. by a projection.
    """
    if not (1e-13 <= tol <= 1e-3):
        raise ValueError("tol must lie in [1e-13, 1e-3]")
    fun = f if callable(f) else TDVectorField(f)
    x0 = np.array(x0, dtype=float).reshape(-1)
    if not np.all(np.isfinite(x0)):
        raise ValueError("non-finite initial state")
    t0, t1 = float(t0), float(t1)
    kern = {"cython": _compiled, "python": _dopri_py,
            None: _compiled or _dopri_py}[backend]
    if kern is None:
        raise ValueError("compiled kernel not available")
    h0 = _initial_step(fun, t0, x0, t1, tol)
    hmax = abs(t1 - t0) if hmax is None else hmax
    ts, ys, dys, status = kern.solve(fun, t0, x0, t1, tol, h0, hmax,
                                     int(max_steps), BLOWUP, post)
    tr = Trajectory(ts, ys, dys, tol)
    if status == _dopri_py.SINGULAR:
        raise StoppedAtSingularity(float(ts[-1]), tr)
    if status == _dopri_py.UNDERFLOW:
        raise StepUnderflow(float(ts[-1]), tr)
    if status == _dopri_py.MAXSTEPS:
        raise RuntimeError(f"step budget exhausted at t={ts[-1]!r}")
    return tr
