# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Dormand-Prince 5(4) kernel; same contract as ``_dopri_py.solve``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, pow, isfinite

cnp.import_array()

cdef double C2 = 1.0 / 5.0, C3 = 3.0 / 10.0, C4 = 4.0 / 5.0, C5 = 8.0 / 9.0
cdef double A21 = 1.0 / 5.0
cdef double A31 = 3.0 / 40.0, A32 = 9.0 / 40.0
cdef double A41 = 44.0 / 45.0, A42 = -56.0 / 15.0, A43 = 32.0 / 9.0
cdef double A51 = 19372.0 / 6561.0, A52 = -25360.0 / 2187.0
cdef double A53 = 64448.0 / 6561.0, A54 = -212.0 / 729.0
cdef double A61 = 9017.0 / 3168.0, A62 = -355.0 / 33.0, A63 = 46732.0 / 5247.0
cdef double A64 = 49.0 / 176.0, A65 = -5103.0 / 18656.0
cdef double A71 = 35.0 / 384.0, A73 = 500.0 / 1113.0, A74 = 125.0 / 192.0
cdef double A75 = -2187.0 / 6784.0, A76 = 11.0 / 84.0
cdef double E1 = 71.0 / 57600.0, E3 = -71.0 / 16695.0, E4 = 71.0 / 1920.0
cdef double E5 = -17253.0 / 339200.0, E6 = 22.0 / 525.0, E7 = -1.0 / 40.0

cdef double BETA = 0.04
cdef double ALPHA = 0.2 - 0.75 * 0.04
cdef double SAFETY = 0.9
cdef double FAC_MIN = 0.2, FAC_MAX = 10.0
cdef double EPS = 2.220446049250313e-16

OK, SINGULAR, UNDERFLOW, MAXSTEPS = 0, 1, 2, 3


cdef inline double[::1] _call(fun, double t, double[::1] y, double[::1] out):
    cdef double[::1] r = np.asarray(fun(t, np.asarray(y).copy()),
                                    dtype=np.float64).reshape(-1)
    out[:] = r
    return out


def solve(fun, double t0, x0, double t1, double tol, double h0, double hmax,
          long max_steps, double blowup, post=None):
    cdef Py_ssize_t n, i
    cdef double[::1] y = np.array(x0, dtype=np.float64).reshape(-1)
    n = y.shape[0]
    cdef double[::1] k1 = np.empty(n), k2 = np.empty(n), k3 = np.empty(n)
    cdef double[::1] k4 = np.empty(n), k5 = np.empty(n), k6 = np.empty(n)
    cdef double[::1] k7 = np.empty(n), ytmp = np.empty(n), ynew = np.empty(n)
    cdef double[::1] proj
    cdef double s = 1.0 if t1 >= t0 else -1.0
    cdef double t = t0, h, tnew, err, e, sc, fac, err_old = 1e-4, ymax, a, b
    cdef bint last, rejected = False, bad
    cdef long steps = 0
    cdef int status = 0
    _call(fun, t, y, k1)
    ts = [t]
    ys = [np.asarray(y).copy()]
    dys = [np.asarray(k1).copy()]
    h = s * fabs(h0)
    hmax = fabs(hmax)
    while s * (t1 - t) > 0.0:
        if steps >= max_steps:
            status = 3
            break
        if fabs(h) > hmax:
            h = s * hmax
        last = s * (t + h - t1) >= 0.0
        if last:
            h = t1 - t
        if fabs(h) < 16.0 * EPS * max(fabs(t), 1.0):
            status = 2
            break
        for i in range(n):
            ytmp[i] = y[i] + h * (A21 * k1[i])
        _call(fun, t + C2 * h, ytmp, k2)
        for i in range(n):
            ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i])
        _call(fun, t + C3 * h, ytmp, k3)
        for i in range(n):
            ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
        _call(fun, t + C4 * h, ytmp, k4)
        for i in range(n):
            ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i]
                                  + A54 * k4[i])
        _call(fun, t + C5 * h, ytmp, k5)
        for i in range(n):
            ytmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i]
                                  + A64 * k4[i] + A65 * k5[i])
        _call(fun, t + h, ytmp, k6)
        for i in range(n):
            ynew[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i]
                                  + A75 * k5[i] + A76 * k6[i])
        tnew = t1 if last else t + h
        _call(fun, tnew, ynew, k7)
        steps += 1
        err = 0.0
        bad = False
        ymax = 0.0
        for i in range(n):
            e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i]
                     + E6 * k6[i] + E7 * k7[i])
            a = fabs(y[i])
            b = fabs(ynew[i])
            sc = tol * (1.0 + (a if a > b else b))
            e = fabs(e) / sc
            if not isfinite(e) or not isfinite(ynew[i]):
                bad = True
            elif e > err:
                err = e
            if b > ymax:
                ymax = b
        if bad:
            h *= FAC_MIN
            rejected = True
            continue
        if err <= 1.0:
            fac = SAFETY * pow(err_old, BETA) / pow(err if err > 1e-16 else 1e-16,
                                                    ALPHA)
            fac = min(FAC_MAX, max(FAC_MIN, fac))
            if rejected:
                fac = min(fac, 1.0)
            err_old = err if err > 1e-4 else 1e-4
            if n and ymax > blowup:
                status = 1
                break
            t = tnew
            y[:] = ynew
            k1[:] = k7
            if post is not None:
                proj = np.asarray(post(t, np.asarray(y).copy()),
                                  dtype=np.float64).reshape(-1)
                y[:] = proj
                _call(fun, t, y, k1)
            ts.append(t)
            ys.append(np.asarray(y).copy())
            dys.append(np.asarray(k1).copy())
            h *= fac
            rejected = False
        else:
            fac = max(FAC_MIN, SAFETY / pow(err, 0.2))
            h *= fac
            rejected = True
    m = len(ts)
    return (np.array(ts), np.array(ys).reshape(m, n),
            np.array(dys).reshape(m, n), status)
