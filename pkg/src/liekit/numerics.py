"""Small numerical building blocks: adaptive quadrature and matrix exponentials."""
from __future__ import annotations

import cmath
import heapq
import math

import numpy as np

__all__ = ["QuadratureError", "quad", "Antiderivative", "expm", "expm2",
           "chebyshev_grid"]


class QuadratureError(ArithmeticError):
    pass


# Gauss-Kronrod 7/15 nodes and weights on [-1, 1]
_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KW = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GW = np.zeros(15)
_GW[1:7:2] = _WG[:3]
_GW[7] = _WG[3]
_GW[9:14:2] = _WG[2::-1]


def _gk15(f, a, b):
    c = 0.5 * (a + b)
    h = 0.5 * (b - a)
    fx = np.array([f(c + h * x) for x in _NODES], dtype=float)
    if not np.all(np.isfinite(fx)):
        raise QuadratureError("integrand not finite on [%g, %g]" % (a, b))
    k = h * float(np.dot(_KW, fx))
    g = h * float(np.dot(_GW, fx))
    err = abs(k - g)
    # QUADPACK error scaling
    resasc = abs(h) * float(np.dot(_KW, np.abs(fx - k / (2 * h))))
    if resasc != 0.0 and err != 0.0:
        err = resasc * min(1.0, (200.0 * err / resasc) ** 1.5)
    return k, max(err, 50 * 2.2e-16 * abs(k))


def quad(f, a: float, b: float, epsabs: float = 1e-13, epsrel: float = 1e-12,
         limit: int = 500) -> float:
    """Globally adaptive Gauss-Kronrod 15 quadrature of a scalar function."""
    a, b = float(a), float(b)
    if a == b:
        return 0.0
    val, err = _gk15(f, a, b)
    heap = [(-err, a, b, val)]
    total, toterr = val, err
    n = 1
    while toterr > max(epsabs, epsrel * abs(total)):
        if n >= limit:
            raise QuadratureError(
                f"no convergence on [{a}, {b}]: estimate {total}, error {toterr}")
        e, lo, hi, v = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        v1, e1 = _gk15(f, lo, mid)
        v2, e2 = _gk15(f, mid, hi)
        total += v1 + v2 - v
        toterr += e1 + e2 + e
        heapq.heappush(heap, (-e1, lo, mid, v1))
        heapq.heappush(heap, (-e2, mid, hi, v2))
        n += 1
    # recompute the total from the pieces to drop accumulated rounding
    return math.fsum(item[3] for item in heap)


class Antiderivative:
    """``t -> int_anchor^t f`` with cached panel sums on a fixed step lattice."""

    def __init__(self, f, anchor: float = 0.0, panel: float = 0.125,
                 epsabs: float = 1e-14, epsrel: float = 1e-13):
        self.f = f
        self.anchor = float(anchor)
        self.panel = panel
        self.eps = (epsabs, epsrel)
        self._cache = {0: 0.0}

    def _node(self, k):
        """Integral from anchor to anchor + k*panel."""
        if k in self._cache:
            return self._cache[k]
        step = 1 if k > 0 else -1
        j = k
        while j not in self._cache:
            j -= step
        acc = self._cache[j]
        while j != k:
            a = self.anchor + j * self.panel
            acc += quad(self.f, a, a + step * self.panel, *self.eps)
            j += step
            self._cache[j] = acc
        return acc

    def __call__(self, t: float) -> float:
        t = float(t)
        u = (t - self.anchor) / self.panel
        k = math.floor(u) if u >= 0 else math.ceil(u)
        return self._node(k) + quad(self.f, self.anchor + k * self.panel, t,
                                    *self.eps)


def chebyshev_grid(a: float, b: float, n: int = 64) -> np.ndarray:
    """Chebyshev points of the first kind mapped to [a, b], ascending."""
    k = np.arange(n)
    x = np.cos((2 * k + 1) * np.pi / (2 * n))[::-1]
    return 0.5 * (a + b) + 0.5 * (b - a) * x


# ------------------------------------------------------- matrix exponential

_PADE13 = (64764752532480000., 32382376266240000., 7771770303897600.,
           1187353796428800., 129060195264000., 10559470521600.,
           670442572800., 33522128640., 1323241920., 40840800., 960960.,
           16380., 182., 1.)


def expm(A) -> np.ndarray:
    """Scaling-and-squaring exponential with a degree-13 Pade approximant."""
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("square matrix required")
    dtype = np.result_type(A.dtype, float)
    A = A.astype(dtype)
    n = A.shape[0]
    norm = np.linalg.norm(A, 1)
    s = 0
    if norm > 5.371920351148152:
        s = max(0, int(math.ceil(math.log2(norm / 5.371920351148152))))
    A = A / (2.0 ** s)
    b = _PADE13
    I = np.eye(n, dtype=dtype)
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A4 @ A2
    U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
             + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * I)
    V = (A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
         + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * I)
    R = np.linalg.solve(V - U, V + U)
    for _ in range(s):
        R = R @ R
    return R


def expm2(A) -> np.ndarray:
    """Closed-form exponential of a 2x2 (real or complex) matrix."""
    A = np.asarray(A)
    if A.shape != (2, 2):
        raise ValueError("2x2 matrix required")
    cplx = np.iscomplexobj(A)
    mu = 0.5 * (A[0, 0] + A[1, 1])
    N = A - mu * np.eye(2)
    delta = N[0, 0] * N[0, 0] + N[0, 1] * N[1, 0]  # N^2 = delta * I
    if cplx or (isinstance(delta, complex)):
        r = cmath.sqrt(delta)
        if abs(r) < 1e-8:
            ch, sh = 1 + delta / 2, 1 + delta / 6
        else:
            ch, sh = cmath.cosh(r), cmath.sinh(r) / r
        scale = cmath.exp(mu)
        out = scale * (ch * np.eye(2) + sh * N)
        return out if cplx else out.real
    delta = float(delta)
    if abs(delta) < 1e-8:
        ch = 1 + delta / 2 + delta * delta / 24
        sh = 1 + delta / 6 + delta * delta / 120
    elif delta > 0:
        r = math.sqrt(delta)
        ch, sh = math.cosh(r), math.sinh(r) / r
    else:
        r = math.sqrt(-delta)
        ch, sh = math.cos(r), math.sin(r) / r
    return math.exp(float(mu)) * (ch * np.eye(2) + sh * N)
