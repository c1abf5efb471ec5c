"""Command-line front end.

Problems are JSON documents whose coefficient values are expression strings::

    {"system": "riccati", "coefficients": {"b1": "1", "b2": "0", "b3": "1"},
     "interval": [0, 1], "x0": [0.0]}

Exit codes: 0 success or condition holds, 1 condition fails, 2 problem
error (with the byte offset for malformed expressions), 3 singularity.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import exprlang as el
from . import groupflow as gf
from . import integcond as ic
from . import liealg as la
from . import quasilie as ql
from . import superpose as sp
from .odecore import StepUnderflow, StoppedAtSingularity, TDVectorField, integrate

EXIT_OK, EXIT_FAIL, EXIT_SPEC, EXIT_SINGULAR = 0, 1, 2, 3

SYSTEM_KINDS = ("riccati", "linear", "affine", "milne-pinney", "ermakov",
                "dissipative-mp", "dissipative-mp-family", "emden", "abel", "tdho", "spin",
                "nonlinear-oscillator", "mathews-lakshmanan", "custom-polynomial")


class SpecError(ValueError):
    def __init__(self, msg, offset=None):
        super().__init__(msg if offset is None else f"{msg} (byte offset {offset})")
        self.offset = offset


def _workers() -> int:
    try:
        cap = int(os.environ.get("LIEKIT_THREADS", "0"))
    except ValueError:
        cap = 0
    n = os.cpu_count() or 1
    return max(1, min(cap, n) if cap > 0 else n)


# ------------------------------------------------------------ problem specs

def load_spec(path):
    if path is None:
        raise SpecError("--spec is required")
    raw = sys.stdin.read() if path == "-" else open(path, encoding="utf-8").read()
    try:
        spec = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise SpecError(f"invalid JSON: {exc.msg}", len(raw[:exc.pos].encode())) from None
    if not isinstance(spec, dict):
        raise SpecError("problem spec must be a JSON object")
    return spec


def _expr(spec, key, default=None):
    src = spec.get("coefficients", {}).get(key, default)
    if src is None:
        raise SpecError(f"missing coefficient {key!r}")
    if isinstance(src, (int, float)):
        return el.Const(float(src))
    try:
        return el.parse(str(src))
    except el.ExprSyntaxError as exc:
        raise SpecError(f"coefficient {key!r}: {exc}", exc.offset) from None


def _param(spec, key, default=None):
    v = spec.get("params", {}).get(key, default)
    if v is None:
        raise SpecError(f"missing parameter {key!r}")
    return v


def _interval(spec, t1=None):
    a, b = spec.get("interval", [0.0, 1.0])
    if t1 is not None:
        b = t1
    if not a < b:
        raise SpecError("interval must be nonempty")
    return float(a), float(b)


def _spin_field(spec):
    Bx, By, Bz = ic.spin_field(_expr(spec, "B"), _expr(spec, "theta"), _expr(spec, "phi"))
    return Bx, By, Bz


def build_system(spec) -> TDVectorField:
    kind = spec.get("system")
    if kind not in SYSTEM_KINDS:
        raise SpecError(f"unknown system kind {kind!r}")
    c = lambda k, d=None: _expr(spec, k, d)  # noqa: E731
    if kind == "riccati":
        return sp.riccati_system(c("b1"), c("b2"), c("b3"))
    if kind in ("linear", "affine"):
        A = spec.get("coefficients", {}).get("A")
        if not A:
            raise SpecError("missing matrix 'A'")
        try:
            if kind == "linear":
                return sp.linear_system(A)
            return sp.affine_system(A, spec["coefficients"]["b"])
        except el.ExprSyntaxError as exc:
            raise SpecError(str(exc), exc.offset) from None
        except KeyError:
            raise SpecError("missing vector 'b'") from None
    if kind == "milne-pinney":
        return sp.milne_pinney_system(c("omega2"), float(_param(spec, "k", 1.0)))
    if kind == "ermakov":
        return sp.ermakov_system(c("omega2"), float(_param(spec, "k", 1.0)))
    if kind == "dissipative-mp":
        return ql.dismp_system(c("a"), c("b"), float(_param(spec, "k", 1.0)))
    if kind == "dissipative-mp-family":
        return ql.dismp_family_system(c("F"), c("omega2"))
    if kind == "emden":
        return ql.emden_system(c("a"), c("b"), float(_param(spec, "n")))
    if kind == "abel":
        return ql.abel_family_system(c("b"))
    if kind == "tdho":
        x, p = el.Var("x1"), el.Var("x2")
        return TDVectorField([c("b1") * p, -c("b3") * x])
    if kind == "nonlinear-oscillator":
        return ql.nlo_system(c("b"), c("c"), float(_param(spec, "n")))
    if kind == "mathews-lakshmanan":
        return ql.ml_system(c("F"), float(_param(spec, "lambda")), c("omega"))
    if kind == "spin":
        return _schrodinger(*_spin_field(spec))
    comps = spec.get("coefficients", {}).get("fields")
    if not comps:
        raise SpecError("custom-polynomial needs coefficients.fields")
    try:
        return TDVectorField([el.parse(str(s)) for s in comps])
    except el.ExprSyntaxError as exc:
        raise SpecError(str(exc), exc.offset) from None


def _schrodinger(Bx, By, Bz):
    """``i psi' = B . S psi`` on ``(Re psi1, Re psi2, Im psi1, Im psi2)``."""
    fx, fy, fz = (el.lambdify(e, ["t"]) for e in (Bx, By, Bz))

    def f(t, y):
        p = y[:2] + 1j * y[2:]
        bx, by, bz = fx(t), fy(t), fz(t)
        H = 0.5 * np.array([[bz, bx - 1j * by], [bx + 1j * by, -bz]])
        d = -1j * (H @ p)
        return np.concatenate([d.real, d.imag])
    return TDVectorField(func=f, dim=4)


def _x0(spec, dim):
    x0 = spec.get("x0")
    if x0 is None or len(x0) != dim:
        raise SpecError(f"x0 must have {dim} entries")
    return [float(v) for v in x0]


# ------------------------------------------------------------ output

def _fmt(v) -> str:
    return format(float(v), ".17g")


def write_csv(out, t, Y, names=None):
    Y = np.atleast_2d(np.asarray(Y))
    names = names or [f"x{i + 1}" for i in range(Y.shape[1])]
    out.write(",".join(["t"] + list(names)) + "\n")
    for ti, row in zip(t, Y):
        out.write(",".join([_fmt(ti)] + [_fmt(v) for v in row]) + "\n")


def read_csv(path):
    """Inverse of :func:`write_csv`: ``(names, t, Y)``."""
    with open(path, encoding="utf-8") as fh:
        head = fh.readline().strip().split(",")
        rows = [[float(x) for x in line.split(",")] for line in fh if line.strip()]
    arr = np.array(rows)
    return head[1:], arr[:, 0], arr[:, 1:]


def _open_out(path):
    return sys.stdout if path in (None, "-") else open(path, "w", encoding="utf-8")


def _emit_json(obj, path):
    out = _open_out(path)
    json.dump(obj, out, indent=2, default=_json_default)
    out.write("\n")
    if out is not sys.stdout:
        out.close()


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return {"re": o.real, "im": o.imag}
    if isinstance(o, el.Expr):
        return el.to_source(o)
    return str(o)


def _times(tr, samples):
    if not samples:
        return tr.t, tr.y
    ts = np.linspace(tr.t0, tr.t1, int(samples))
    return ts, np.array([tr(t) for t in ts])


# ------------------------------------------------------------ commands

def cmd_integrate(args, spec):
    sys_ = build_system(spec)
    t0, t1 = _interval(spec, args.t1)
    tol = args.tol or spec.get("tol", 1e-10)
    tr = integrate(sys_, _x0(spec, sys_.dim), t0, t1, tol)
    out = _open_out(args.out)
    write_csv(out, *_times(tr, spec.get("samples")))
    if out is not sys.stdout:
        out.close()
    return EXIT_OK


def _rule_parts(spec):
    name = spec.get("rule")
    if name not in sp.RULE_NAMES:
        raise SpecError(f"unknown rule {name!r}")
    kind = spec.get("system")
    psys = None
    if name == "rule.abel":
        if kind != "abel":
            raise SpecError("rule.abel needs an abel system")
        rule = ql.get_rule(name)
    elif name == "rule.dismp-family":
        if kind != "dissipative-mp-family":
            raise SpecError("rule.dismp-family needs a dissipative-mp-family system")
        F = _expr(spec, "F")
        rule = ql.get_rule(name, F=F)
        return rule, ql.dismp_family_system(F, _expr(spec, "omega2")), None
    elif name == "rule.dismp":
        if kind != "dissipative-mp":
            raise SpecError("rule.dismp needs a dissipative-mp system")
        a, b = _expr(spec, "a"), _expr(spec, "b")
        rule = ql.get_rule(name, a=a, k=float(_param(spec, "k", 1.0)))
        psys = ql.dismp_linear_system(a, b)
    else:
        expect = {"riccati": "riccati", "linear": "linear", "affine": "affine",
                  "pinney.sr4": "milne-pinney", "pinney.classic": "milne-pinney",
                  "pinney.mixed": "milne-pinney"}.get(name)
        if expect and kind != expect:
            raise SpecError(f"rule {name!r} needs a {expect} system")
        params = dict(spec.get("params", {}))
        if name in ("linear", "affine"):
            params["n"] = len(spec["coefficients"]["A"])
        rule = sp.get_rule(name, **params)
        if name == "pinney.classic":
            psys = sp.harmonic_system(_expr(spec, "omega2"))
        elif name == "pinney.mixed":
            psys = sp.riccati_unit_system(_expr(spec, "omega2"))
    return rule, build_system(spec), psys


def cmd_superpose(args, spec):
    rule, system, psys = _rule_parts(spec)
    t0, t1 = _interval(spec, args.t1)
    tol = args.tol or spec.get("tol", 1e-11)
    seed = args.seed if args.seed is not None else spec.get("seed", 0)
    batches = int(spec.get("batches", 1))
    kw = dict(trials=int(spec.get("trials", 5)), horizon=t1 - t0, tol=tol, t0=t0,
              particular_system=psys, continuation=bool(spec.get("continuation", False)))

    def run(i):
        return sp.verify_rule(rule, system, seed=seed + i, **kw)
    with ThreadPoolExecutor(max_workers=min(_workers(), batches)) as pool:
        reports = list(pool.map(run, range(batches)))
    threshold = float(spec.get("threshold", 1e-5))
    worst = max(r.max_error for r in reports)
    ok = all(r.passed(threshold) for r in reports)
    doc = {"rule": rule.name, "t_dependent": rule.t_dependent, "max_error": worst,
           "threshold": threshold, "passed": ok,
           "reports": [r.to_dict() for r in reports]}
    if "branch_slot" in rule.params:
        doc["branch"] = {"continuation": kw["continuation"],
                         "flips": sum(p.get("branch_flips", 0) or 0
                                      for r in reports for p in r.per_trial)}
    _emit_json(doc, args.out)
    return EXIT_OK if ok else EXIT_FAIL


def _run_condition(name, spec):
    grid = spec.get("grid")
    interval = tuple(spec.get("interval", (0.0, 1.0)))
    if name == "riccati.K":
        rc = ic.RiccatiCoefficients(_expr(spec, "b1"), _expr(spec, "b2"), _expr(spec, "b3"),
                                    interval)
        return ic.riccati_constant_K(rc, grid)
    if name == "riccati.TU":
        rc = ic.RiccatiCoefficients(_expr(spec, "b1"), _expr(spec, "b2"), _expr(spec, "b3"),
                                    interval)
        c = spec.get("params", {}).get("c")
        if not c or len(c) != 3:
            raise SpecError("riccati.TU needs params.c = [c1, c2, c3]")
        return ic.riccati_transform_TU(rc, *map(float, c), grid)
    if name == "riccati.linearizable":
        rc = ic.RiccatiCoefficients(_expr(spec, "b1"), _expr(spec, "b2"), _expr(spec, "b3"),
                                    interval)
        return ic.riccati_linearizable(rc, grid)
    if name == "tdho.K":
        return ic.tdho_check(_expr(spec, "b1"), _expr(spec, "b3"), grid, interval)
    if name == "spin.gamma":
        return ic.spin_condition(_expr(spec, "B"), _expr(spec, "theta"), _expr(spec, "phi"),
                                 grid, interval)
    raise SpecError(f"unknown condition {name!r}")


def cmd_check(args, spec):
    name = args.condition or spec.get("condition")
    try:
        rep = _run_condition(name, spec)
    except (ic.CoefficientZero, ic.ConditionFailed, ValueError) as exc:
        if isinstance(exc, SpecError):
            raise
        _emit_json({"name": name, "holds": False, "error": str(exc)}, args.out)
        return EXIT_FAIL
    _emit_json(rep.to_dict(), args.out)
    return EXIT_OK if rep.holds else EXIT_FAIL


def _lie_fields(spec):
    if "preset" in spec:
        presets = la.presets()
        if spec["preset"] not in presets:
            raise SpecError(f"unknown preset {spec['preset']!r}")
        return presets[spec["preset"]]
    fields, names = spec.get("fields"), spec.get("names")
    if not fields or not names:
        raise SpecError("lie needs 'preset' or 'fields' with 'names'")
    try:
        return [la.PolyVectorField.from_exprs(f, names, spec.get("params")) for f in fields], \
            spec.get("table")
    except el.ExprSyntaxError as exc:
        raise SpecError(str(exc), exc.offset) from None


def cmd_lie(args, spec):
    fields, table = _lie_fields(spec)
    if args.sub == "closure":
        res = la.lie_closure(fields, int(spec.get("cap", 32)))
        doc = {"status": res.status, "dimension": res.dimension,
               "basis": [repr(b) for b in res.basis]}
        code = EXIT_OK
    elif args.sub == "minimal-m":
        seed = args.seed if args.seed is not None else spec.get("seed", 0)
        m = la.minimal_m(fields, seed=seed)
        doc = {"m": m, "dim": len(fields), "n": fields[0].dim,
               "lie_condition": len(fields) <= m * fields[0].dim}
        code = EXIT_OK
    else:
        if table is None:
            raise SpecError("structure needs a table")
        if isinstance(table, dict) and all(isinstance(k, str) for k in table):
            table = {tuple(int(i) for i in k.split(",")): {int(g): v for g, v in row.items()}
                     for k, row in table.items()}
        res = la.verify_structure_constants(fields, la.table_to_constants(len(fields), table))
        doc = {"residual": res}
        code = EXIT_OK if res == 0 else EXIT_FAIL
    _emit_json(doc, args.out)
    return code


def _invariant_fn(name, spec):
    p = spec.get("params", {})
    if name == "ermakov-lewis":
        k = float(p.get("k", 1.0))
        return lambda t, y: sp.ermakov_lewis(y[0], y[1], y[2], y[3], k)
    if name == "emden":
        inv = ql.emden_reduce(_expr(spec, "a"), _expr(spec, "b"), float(_param(spec, "n")),
                              _expr(spec, "xp"), tuple(spec.get("interval", (0.5, 2.0))))
        return lambda t, y: inv(t, y[0], y[1])
    if name == "spin-norm":
        return lambda t, y: float(np.dot(y, y))
    if name == "tdho-quartic":
        u1, u0, w = float(p["u1"]), float(p["u0"]), float(p["omega"])
        return lambda t, y: ic.tdho_invariants(u1, u0, w, t, y[0], y[1])[0]
    if name == "mathews-lakshmanan":
        inv = ql.mathews_lakshmanan(_expr(spec, "F"), float(_param(spec, "lambda")))["invariant"]
        return lambda t, y: inv(t, y[0], y[1])
    raise SpecError(f"unknown invariant {name!r}")


def cmd_invariant(args, spec):
    name = args.invariant or spec.get("invariant")
    fn = _invariant_fn(name, spec)
    sys_ = build_system(spec)
    t0, t1 = _interval(spec, args.t1)
    tr = integrate(sys_, _x0(spec, sys_.dim), t0, t1, args.tol or spec.get("tol", 1e-10))
    vals = np.array([fn(t, y) for t, y in zip(tr.t, tr.y)])
    drift = float(np.max(np.abs(vals - vals[0])) / (1 + abs(vals[0])))
    if args.json:
        _emit_json({"invariant": name, "I0": vals[0], "drift": drift,
                    "points": int(vals.size)}, args.out)
    else:
        out = _open_out(args.out)
        write_csv(out, tr.t, vals[:, None], ["I"])
        if out is not sys.stdout:
            out.close()
        sys.stderr.write(f"drift {drift:.3e}\n")
    return EXIT_OK


def cmd_wei_norman(args, spec):
    t0, t1 = _interval(spec, args.t1)
    if t0 != 0:
        raise SpecError("wei-norman starts at t = 0")
    tol = args.tol or spec.get("tol", 1e-10)
    tr = gf.wei_norman_sl2(_expr(spec, "b1"), _expr(spec, "b2"), _expr(spec, "b3"), t1, tol)
    out = _open_out(args.out)
    write_csv(out, tr.t, tr.y, ["v1", "v2", "v3"])
    if out is not sys.stdout:
        out.close()
    return EXIT_OK


def cmd_group_solve(args, spec):
    t0, t1 = _interval(spec, args.t1)
    name = spec.get("preset", "sl2r.a1a2a3")
    coeffs = spec.get("coefficients", {}).get("b")
    if not coeffs:
        raise SpecError("group-solve needs coefficients.b")
    try:
        eq = gf.preset(name, [el.parse(str(s)) for s in coeffs])
    except KeyError as exc:
        raise SpecError(str(exc)) from None
    except el.ExprSyntaxError as exc:
        raise SpecError(str(exc), exc.offset) from None
    gt = gf.solve_group_equation(eq, t1, tol=args.tol or spec.get("tol", 1e-10), t0=t0)
    n = gt.A.shape[1]
    names, rows = [], []
    for i in range(n):
        for j in range(n):
            names.append(f"a{i + 1}{j + 1}")
            if eq.complex:
                names.append(f"a{i + 1}{j + 1}_im")
    for A in gt.A:
        row = []
        for i in range(n):
            for j in range(n):
                row.append(A[i, j].real)
                if eq.complex:
                    row.append(A[i, j].imag)
        rows.append(row)
    out = _open_out(args.out)
    write_csv(out, gt.t, rows, names)
    if out is not sys.stdout:
        out.close()
    return EXIT_OK


GNUPLOT = """set datafile separator ','
set key autotitle columnhead
set xlabel 't'
plot {plots}
"""


def cmd_plot(args, spec):
    if not args.out or args.out == "-":
        raise SpecError("plot needs --out PREFIX")
    sys_ = build_system(spec)
    t0, t1 = _interval(spec, args.t1)
    tr = integrate(sys_, _x0(spec, sys_.dim), t0, t1, args.tol or spec.get("tol", 1e-10))
    csv_path, gp_path = args.out + ".csv", args.out + ".gp"
    with open(csv_path, "w", encoding="utf-8") as fh:
        write_csv(fh, *_times(tr, spec.get("samples", 400)))
    base = os.path.basename(csv_path)
    plots = ", ".join(f"'{base}' using 1:{i + 2} with lines" for i in range(sys_.dim))
    with open(gp_path, "w", encoding="utf-8") as fh:
        fh.write(GNUPLOT.format(plots=plots))
    print(csv_path)
    print(gp_path)
    return EXIT_OK


COMMANDS = {"integrate": cmd_integrate, "superpose": cmd_superpose, "check": cmd_check,
            "lie": cmd_lie, "invariant": cmd_invariant, "wei-norman": cmd_wei_norman,
            "group-solve": cmd_group_solve, "plot": cmd_plot}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", help="problem spec (JSON file, '-' for stdin)")
    common.add_argument("--t1", type=float, help="final time (overrides the interval end)")
    common.add_argument("--tol", type=float, help="integrator tolerance")
    common.add_argument("--seed", type=int, help="seed for randomized trials")
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--json", action="store_true", help="JSON instead of CSV")
    p = argparse.ArgumentParser(prog="liekit", description="Lie systems toolkit")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name, parents=[common])
        if name == "check":
            s.add_argument("condition", nargs="?", choices=ic.CONDITIONS)
        elif name == "lie":
            s.add_argument("sub", choices=("closure", "minimal-m", "structure"))
        elif name == "invariant":
            s.add_argument("invariant", nargs="?")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = load_spec(args.spec)
        return COMMANDS[args.command](args, spec)
    except SpecError as exc:
        sys.stderr.write(f"spec error: {exc}\n")
        return EXIT_SPEC
    except el.ExprSyntaxError as exc:
        sys.stderr.write(f"spec error: {exc} (byte offset {exc.offset})\n")
        return EXIT_SPEC
    except (StoppedAtSingularity, StepUnderflow) as exc:
        sys.stderr.write(f"singularity: last t = {exc.t_last!r}\n")
        return EXIT_SINGULAR
    except OSError as exc:
        sys.stderr.write(f"spec error: {exc}\n")
        return EXIT_SPEC


if __name__ == "__main__":
    sys.exit(main())
