"""Compare the compiled and pure-Python DOPRI5 kernels.

    python3 benchmarks/bench_dopri.py [--repeat N]

Both kernels run the same problems; the script reports wall time per solve,
the speedup and the largest state difference (expected to be exactly zero).
"""
import argparse
import time

import numpy as np

from liekit import superpose as sp
from liekit.odecore import integrate, kernels

PROBLEMS = {
    "riccati (Expr field)": (sp.riccati_system("0.3*sin(t)", "0.2", "0.5*cos(t)"),
                             [0.1], 0.0, 20.0, 1e-11),
    "milne-pinney (Expr field)": (sp.milne_pinney_system("1 + 0.3*sin(t)", 1.0),
                                  [1.0, 0.2], 0.0, 20.0, 1e-11),
    "oscillator (numpy callable)": (lambda t, y: np.array([y[1], -(1 + 0.1 * t) * y[0]]),
                                    [1.0, 0.0], 0.0, 50.0, 1e-12),
}


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    avail = kernels()
    if "cython" not in avail:
        print("compiled kernel not built; only the python kernel is available")
    print(f"{'problem':30s} {'steps':>7s} " + " ".join(f"{k + ' [ms]':>12s}" for k in avail)
          + f" {'speedup':>8s} {'max |diff|':>11s}")
    for name, (f, x0, t0, t1, tol) in PROBLEMS.items():
        res = {k: best_of(lambda k=k: integrate(f, x0, t0, t1, tol, backend=k), args.repeat)
               for k in avail}
        steps = len(res["python"][1].t)
        cols = " ".join(f"{1e3 * res[k][0]:12.2f}" for k in avail)
        if "cython" in res:
            speed = res["python"][0] / res["cython"][0]
            diff = float(np.max(np.abs(res["python"][1].y - res["cython"][1].y)))
            print(f"{name:30s} {steps:7d} {cols} {speed:8.2f} {diff:11.1e}")
        else:
            print(f"{name:30s} {steps:7d} {cols}")


if __name__ == "__main__":
    main()
