"""Pure-Python Dormand-Prince 5(4) kernel.

Twin of ``_dopri.pyx``; both expose ``solve`` with the same signature and
produce bitwise identical meshes for the same inputs.
"""
import math

import numpy as np

# Dormand-Prince 5(4) tableau (Hairer, Norsett, Wanner, table 5.2)
C2, C3, C4, C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = (19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0,
                      -212.0 / 729.0)
A61, A62, A63, A64, A65 = (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0,
                           49.0 / 176.0, -5103.0 / 18656.0)
A71, A73, A74, A75, A76 = (35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0,
                           -2187.0 / 6784.0, 11.0 / 84.0)
E1, E3, E4, E5, E6, E7 = (71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0,
                          -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)

BETA = 0.04
ALPHA = 0.2 - 0.75 * BETA
SAFETY = 0.9
FAC_MIN, FAC_MAX = 0.2, 10.0

OK, SINGULAR, UNDERFLOW, MAXSTEPS = 0, 1, 2, 3


def _f(fun, t, y):
    return np.asarray(fun(t, y), dtype=float).reshape(-1)


def solve(fun, t0, x0, t1, tol, h0, hmax, max_steps, blowup, post=None):
    """Integrate from t0 to t1; returns (ts, ys, dys, status).

    ``post(t, y)``, if given, replaces each accepted state (e.g. a projection
    onto a constraint manifold); the derivative is then re-evaluated.
    """
    y = np.array(x0, dtype=float).reshape(-1)
    n = y.size
    s = 1.0 if t1 >= t0 else -1.0
    t = float(t0)
    k1 = _f(fun, t, y)
    ts, ys, dys = [t], [y.copy()], [k1.copy()]
    h = s * abs(h0)
    hmax = abs(hmax)
    err_old = 1e-4
    rejected = False
    status = OK
    steps = 0
    eps = np.finfo(float).eps
    while s * (t1 - t) > 0.0:
        if steps >= max_steps:
            status = MAXSTEPS
            break
        if abs(h) > hmax:
            h = s * hmax
        last = s * (t + h - t1) >= 0.0
        if last:
            h = t1 - t
        if abs(h) < 16.0 * eps * max(abs(t), 1.0):
            status = UNDERFLOW
            break
        k2 = _f(fun, t + C2 * h, y + h * (A21 * k1))
        k3 = _f(fun, t + C3 * h, y + h * (A31 * k1 + A32 * k2))
        k4 = _f(fun, t + C4 * h, y + h * (A41 * k1 + A42 * k2 + A43 * k3))
        k5 = _f(fun, t + C5 * h,
                y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4))
        k6 = _f(fun, t + h,
                y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5))
        ynew = y + h * (A71 * k1 + A73 * k3 + A74 * k4 + A75 * k5 + A76 * k6)
        tnew = t + h if not last else t1
        k7 = _f(fun, tnew, ynew)
        steps += 1
        ev = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
        sc = tol * (1.0 + np.maximum(np.abs(y), np.abs(ynew)))
        err = float(np.max(np.abs(ev) / sc)) if n else 0.0
        if not math.isfinite(err) or not np.all(np.isfinite(ynew)):
            h *= FAC_MIN
            rejected = True
            continue
        if err <= 1.0:
            fac = SAFETY * err_old ** BETA / max(err, 1e-16) ** ALPHA
            fac = min(FAC_MAX, max(FAC_MIN, fac))
            if rejected:
                fac = min(fac, 1.0)
            err_old = max(err, 1e-4)
            if n and float(np.max(np.abs(ynew))) > blowup:
                status = SINGULAR
                break
            t, y, k1 = tnew, ynew, k7
            if post is not None:
                y = np.array(post(t, y), dtype=float).reshape(-1)
                k1 = _f(fun, t, y)
            ts.append(t)
            ys.append(y.copy())
            dys.append(k1.copy())
            h *= fac
            rejected = False
        else:
            fac = max(FAC_MIN, SAFETY / err ** 0.2)
            h *= fac
            rejected = True
    return (np.array(ts), np.array(ys).reshape(len(ts), n),
            np.array(dys).reshape(len(ts), n), status)
